use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution};

use super::{check_len, Diagnostics, Game, GameError, GaussianSampler};
use crate::linalg::{vector, Vector};

/// Linear-critic WGAN on a position-weight matrix.
///
/// The generator holds logits `θ` (one row per position) and emits each
/// position independently from `softmax(θ_pos)`. The discriminator scores a
/// sequence by `Σ_pos w_pos[symbol]`, so
/// `L(θ, w) = Σ_pos ⟨w_pos, p_pos − softmax(θ_pos)⟩`.
///
/// Both players are flattened position-major: index `pos·K + symbol`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmGame {
    true_pwm: Vector,
    length: usize,
    alphabet: usize,
    clip: Option<f64>,
    dataset: Option<PwmDataset>,
}

/// Finite sample from the true PWM, split into training and held-out sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmDataset {
    length: usize,
    /// Training symbols, `n_train × length`, row-major.
    train: Vec<u8>,
    holdout_freq: Vector,
    holdout_size: usize,
}

impl PwmDataset {
    /// Draws `sequences` i.i.d. sequences from `pwm` with a dedicated seed and
    /// holds out the first `⌊holdout_fraction · sequences⌋` of them.
    pub fn generate(pwm: &PwmGame, sequences: usize, holdout_fraction: f64, seed: u64) -> Result<Self, GameError> {
        if !(0.0..=0.5).contains(&holdout_fraction) {
            return Err(GameError::Invalid(format!(
                "holdout fraction must lie in [0, 0.5], got {holdout_fraction}"
            )));
        }
        let holdout = (holdout_fraction * sequences as f64) as usize;
        if sequences <= holdout {
            return Err(GameError::Invalid("dataset has no training sequences".to_string()));
        }
        let (l, k) = (pwm.length, pwm.alphabet);
        let mut rng = GaussianSampler::standard(seed, 0);
        let mut holdout_freq = vec![0.0; l * k];
        let mut train = Vec::with_capacity((sequences - holdout) * l);
        for s in 0..sequences {
            for pos in 0..l {
                let sym = draw_symbol(&pwm.true_pwm[pos * k..(pos + 1) * k], rng.uniform());
                if s < holdout {
                    holdout_freq[pos * k + sym] += 1.0;
                } else {
                    train.push(sym as u8);
                }
            }
        }
        if holdout > 0 {
            for f in &mut holdout_freq {
                *f /= holdout as f64;
            }
        }
        Ok(PwmDataset {
            length: l,
            train,
            holdout_freq,
            holdout_size: holdout,
        })
    }

    pub fn train_size(&self) -> usize {
        self.train.len() / self.length
    }

    pub fn holdout_size(&self) -> usize {
        self.holdout_size
    }

    /// Per-position symbol frequencies of the held-out sequences.
    pub fn holdout_freq(&self) -> &[f64] {
        &self.holdout_freq
    }

    /// Per-position symbol frequencies of `batch` training sequences drawn
    /// uniformly with replacement.
    fn batch_freq(&self, alphabet: usize, batch: usize, noise: &mut GaussianSampler) -> Vector {
        let n = self.train_size();
        let mut freq = vec![0.0; self.length * alphabet];
        let inc = 1.0 / batch as f64;
        for _ in 0..batch {
            let idx = ((noise.uniform() * n as f64) as usize).min(n - 1);
            let row = &self.train[idx * self.length..(idx + 1) * self.length];
            for (pos, sym) in row.iter().enumerate() {
                freq[pos * alphabet + *sym as usize] += inc;
            }
        }
        freq
    }
}

fn draw_symbol(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Empirical frequencies of `n` draws from `probs`, by sequential binomial splitting.
fn multinomial_freq(probs: &[f64], n: usize, noise: &mut GaussianSampler, out: &mut [f64]) {
    let mut left = n as u64;
    let mut mass = 1.0;
    let k = probs.len();
    for (i, p) in probs.iter().enumerate() {
        let count = if i + 1 == k || left == 0 {
            left
        } else {
            let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
            let c = Binomial::new(left, q)
                .expect("probability in [0, 1]")
                .sample(noise.rng_mut());
            mass -= p;
            c
        };
        out[i] = count as f64 / n as f64;
        left -= count;
    }
}

/// Numerically stable softmax of one logit row.
pub fn softmax(theta: &[f64]) -> Vector {
    let m = theta.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let e: Vector = theta.iter().map(|t| libm::exp(t - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

impl PwmGame {
    pub fn new(true_pwm: Vec<Vector>, clip: Option<f64>) -> Result<Self, GameError> {
        let length = true_pwm.len();
        let alphabet = true_pwm.first().map_or(0, |r| r.len());
        if length == 0 || !(2..=256).contains(&alphabet) {
            return Err(GameError::Invalid(
                "PWM needs at least one position and an alphabet of 2..=256 symbols".to_string(),
            ));
        }
        for (pos, row) in true_pwm.iter().enumerate() {
            check_len("pwm row", row, alphabet)?;
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || libm::fabs(total - 1.0) > 1e-12 {
                return Err(GameError::Invalid(format!(
                    "position {pos} is not a probability vector (sum {total})"
                )));
            }
        }
        if let Some(c) = clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(GameError::Invalid(format!("clip must be positive, got {c}")));
            }
        }
        Ok(PwmGame {
            true_pwm: true_pwm.concat(),
            length,
            alphabet,
            clip,
            dataset: None,
        })
    }

    pub fn with_dataset(mut self, sequences: usize, holdout_fraction: f64, seed: u64) -> Result<Self, GameError> {
        self.dataset = Some(PwmDataset::generate(&self, sequences, holdout_fraction, seed)?);
        Ok(self)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Flattened true PWM.
    pub fn true_pwm(&self) -> &[f64] {
        &self.true_pwm
    }

    pub fn dataset(&self) -> Option<&PwmDataset> {
        self.dataset.as_ref()
    }

    /// Per-position softmax of flattened logits.
    pub fn generator_probs(&self, theta: &[f64]) -> Vector {
        theta.chunks(self.alphabet).flat_map(softmax).collect()
    }

    /// `|⟨w, p_holdout − softmax θ⟩|`: the critic's estimate of the distance
    /// between held-out data and the generator.
    pub fn validation_loss(&self, theta: &[f64], w: &[f64]) -> Option<f64> {
        let ds = self.dataset.as_ref().filter(|d| d.holdout_size > 0)?;
        let q = self.generator_probs(theta);
        Some(libm::fabs(vector::dot(w, &vector::sub(&ds.holdout_freq, &q))))
    }

    fn check(&self, theta: &[f64], w: &[f64]) -> Result<(), GameError> {
        check_len("theta", theta, self.length * self.alphabet)?;
        check_len("w", w, self.length * self.alphabet)
    }
}

/// `(∂L/∂θ, ∂L/∂w) = (−J_softmax(θ)ᵀw, p − softmax θ)`, position by position.
pub fn pwm_game_gradients(g: &PwmGame, theta: &[f64], w: &[f64]) -> Result<(Vector, Vector), GameError> {
    Ok((g.gen_gradient(theta, w)?, g.disc_gradient(theta, w)?))
}

impl Game for PwmGame {
    fn name(&self) -> &'static str {
        "pwm"
    }

    fn gen_dim(&self) -> usize {
        self.length * self.alphabet
    }

    fn disc_dim(&self) -> usize {
        self.length * self.alphabet
    }

    fn loss(&self, theta: &[f64], w: &[f64]) -> Result<f64, GameError> {
        self.check(theta, w)?;
        let q = self.generator_probs(theta);
        Ok(vector::dot(w, &vector::sub(&self.true_pwm, &q)))
    }

    fn gen_gradient(&self, theta: &[f64], w: &[f64]) -> Result<Vector, GameError> {
        self.check(theta, w)?;
        let k = self.alphabet;
        let mut g = Vec::with_capacity(theta.len());
        for (t, wp) in theta.chunks(k).zip(w.chunks(k)) {
            let q = softmax(t);
            let qw = vector::dot(&q, wp);
            // Jᵀw = q ⊙ (w − ⟨q, w⟩)
            g.extend(q.iter().zip(wp).map(|(qi, wi)| -qi * (wi - qw)));
        }
        Ok(g)
    }

    fn disc_gradient(&self, theta: &[f64], w: &[f64]) -> Result<Vector, GameError> {
        self.check(theta, w)?;
        Ok(vector::sub(&self.true_pwm, &self.generator_probs(theta)))
    }

    /// Training-batch frequencies minus generator-sample frequencies. The data
    /// batch comes from the dataset when one is attached, else from the true
    /// PWM; it is drawn before the generator batch.
    fn stochastic_disc_gradient(
        &self,
        theta: &[f64],
        w: &[f64],
        batch: usize,
        noise: &mut GaussianSampler,
    ) -> Result<Vector, GameError> {
        if batch == 0 {
            return Err(GameError::EmptyBatch);
        }
        self.check(theta, w)?;
        let k = self.alphabet;
        let data = match &self.dataset {
            Some(ds) => ds.batch_freq(k, batch, noise),
            None => {
                let mut f = vec![0.0; theta.len()];
                for (p, out) in self.true_pwm.chunks(k).zip(f.chunks_mut(k)) {
                    multinomial_freq(p, batch, noise, out);
                }
                f
            }
        };
        let q = self.generator_probs(theta);
        let mut fake = vec![0.0; theta.len()];
        for (p, out) in q.chunks(k).zip(fake.chunks_mut(k)) {
            multinomial_freq(p, batch, noise, out);
        }
        Ok(vector::sub(&data, &fake))
    }

    fn disc_clip(&self) -> Option<f64> {
        self.clip
    }

    fn diagnostics(&self, theta: &[f64], w: &[f64]) -> Result<Diagnostics, GameError> {
        let q = self.generator_probs(theta);
        let kl = crate::analysis::kl_categorical(&self.true_pwm, &q, self.alphabet)
            .map_err(|e| GameError::Invalid(format!("{e}")))?;
        Ok(Diagnostics {
            loss: self.loss(theta, w)?,
            distance: Some(vector::distance(&self.true_pwm, &q)),
            kl: Some(kl),
            validation_loss: self.validation_loss(theta, w),
            ..Default::default()
        })
    }
}
