use alloc::format;
use alloc::string::ToString;

use super::{check_len, Diagnostics, Game, GameError, GaussianSampler};
use crate::linalg::{vector, Vector};

/// Learning the mean of `N(v, I)` with generator `G_θ(z) = z + θ` and linear
/// discriminator `D_w(x) = ⟨w, x⟩`: `L(θ, w) = ⟨w, v − θ⟩`.
///
/// The optional penalty subtracts `λ(‖w‖₂ − 1)²` from the loss, the linear-critic
/// form of a gradient penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanGame {
    v: Vector,
    clip: Option<f64>,
    penalty: Option<f64>,
}

impl MeanGame {
    pub fn new(v: Vector, clip: Option<f64>, penalty: Option<f64>) -> Result<Self, GameError> {
        if v.is_empty() || !vector::all_finite(&v) {
            return Err(GameError::Invalid("mean must be a nonempty finite vector".to_string()));
        }
        if let Some(c) = clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(GameError::Invalid(format!("clip must be positive, got {c}")));
            }
        }
        if let Some(l) = penalty {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(GameError::Invalid(format!("penalty must be nonnegative, got {l}")));
            }
        }
        Ok(MeanGame { v, clip, penalty })
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn penalty(&self) -> Option<f64> {
        self.penalty
    }

    fn penalty_gradient(&self, w: &[f64]) -> Option<Vector> {
        let lambda = self.penalty?;
        let n = vector::norm(w);
        if n == 0.0 {
            // the penalty is not differentiable at w = 0; take the symmetric subgradient
            return None;
        }
        Some(vector::scale(w, 2.0 * lambda * (n - 1.0) / n))
    }
}

/// `(∇_θ, ∇_w) = (−w, v − θ − 2λ·w(‖w‖ − 1)/‖w‖)`
pub fn mean_game_gradients(g: &MeanGame, theta: &[f64], w: &[f64]) -> Result<(Vector, Vector), GameError> {
    Ok((g.gen_gradient(theta, w)?, g.disc_gradient(theta, w)?))
}

impl Game for MeanGame {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn gen_dim(&self) -> usize {
        self.v.len()
    }

    fn disc_dim(&self) -> usize {
        self.v.len()
    }

    fn loss(&self, theta: &[f64], w: &[f64]) -> Result<f64, GameError> {
        check_len("theta", theta, self.v.len())?;
        check_len("w", w, self.v.len())?;
        let mut l = vector::dot(w, &vector::sub(&self.v, theta));
        if let Some(lambda) = self.penalty {
            let r = vector::norm(w) - 1.0;
            l -= lambda * r * r;
        }
        Ok(l)
    }

    fn gen_gradient(&self, theta: &[f64], w: &[f64]) -> Result<Vector, GameError> {
        check_len("theta", theta, self.v.len())?;
        check_len("w", w, self.v.len())?;
        Ok(vector::scale(w, -1.0))
    }

    fn disc_gradient(&self, theta: &[f64], w: &[f64]) -> Result<Vector, GameError> {
        check_len("theta", theta, self.v.len())?;
        check_len("w", w, self.v.len())?;
        let mut g = vector::sub(&self.v, theta);
        if let Some(p) = self.penalty_gradient(w) {
            vector::axpy(&mut g, -1.0, &p);
        }
        Ok(g)
    }

    /// `(1/B)Σxᵢ − (1/B)Σ(zᵢ + θ)` with `xᵢ ~ N(v, I)`, `zᵢ ~ N(0, I)`; data
    /// batch drawn before the noise batch.
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
        check_len("theta", theta, self.v.len())?;
        check_len("w", w, self.v.len())?;
        let n = self.v.len();
        let inv = 1.0 / batch as f64;
        let mut data = alloc::vec![0.0; n];
        let mut fake = alloc::vec![0.0; n];
        let mut buf = alloc::vec![0.0; n];
        for _ in 0..batch {
            noise.fill_standard(&mut buf);
            for k in 0..n {
                data[k] += self.v[k] + buf[k];
            }
        }
        for _ in 0..batch {
            noise.fill_standard(&mut buf);
            for k in 0..n {
                fake[k] += buf[k] + theta[k];
            }
        }
        let mut g: Vector = data.iter().zip(&fake).map(|(d, f)| (d - f) * inv).collect();
        if let Some(p) = self.penalty_gradient(w) {
            vector::axpy(&mut g, -1.0, &p);
        }
        Ok(g)
    }

    fn disc_clip(&self) -> Option<f64> {
        self.clip
    }

    fn diagnostics(&self, theta: &[f64], w: &[f64]) -> Result<Diagnostics, GameError> {
        Ok(Diagnostics {
            loss: self.loss(theta, w)?,
            distance: Some(vector::distance(theta, &self.v)),
            kl: Some(
                crate::analysis::kl_gaussian_mean(&self.v, theta).map_err(|e| GameError::Invalid(format!("{e}")))?,
            ),
            ..Default::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::fd;
    use crate::linalg::testutil::TestRng;
    use alloc::vec;

    #[test]
    fn examples() {
        let g = MeanGame::new(vec![3.0, 4.0], None, None).unwrap();
        let (gt, gw) = mean_game_gradients(&g, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(gw, vec![3.0, 4.0]);
        assert_eq!(gt, vec![-1.0, -1.0]);

        let g = MeanGame::new(vec![3.0, 4.0], None, Some(0.1)).unwrap();
        let (_, gw) = mean_game_gradients(&g, &[0.0, 0.0], &[0.6, 0.8]).unwrap();
        assert!((gw[0] - 3.0).abs() < 1e-15 && (gw[1] - 4.0).abs() < 1e-15);
        let (_, gw) = mean_game_gradients(&g, &[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert!((gw[0] - 2.8).abs() < 1e-15 && gw[1] == 4.0);
        // w = 0: penalty contribution taken as zero
        let (_, gw) = mean_game_gradients(&g, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(gw, vec![2.0, 3.0]);
    }

    #[test]
    fn finite_differences() {
        let mut rng = TestRng::new(21);
        for penalty in [None, Some(0.1), Some(2.0)] {
            let g = MeanGame::new(rng.vector(3), None, penalty).unwrap();
            for _ in 0..20 {
                let (t, w) = (rng.vector(3), rng.vector(3));
                let (gt, gw) = mean_game_gradients(&g, &t, &w).unwrap();
                fd::assert_close(&gt, &fd::gradient(|p| g.loss(p, &w).unwrap(), &t, 1e-5), 1e-6);
                fd::assert_close(&gw, &fd::gradient(|p| g.loss(&t, p).unwrap(), &w, 1e-5), 1e-6);
            }
        }
    }

    #[test]
    fn equilibrium_gradients_vanish() {
        let g = MeanGame::new(vec![3.0, 4.0], Some(10.0), None).unwrap();
        let (gt, gw) = mean_game_gradients(&g, &[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(vector::norm_inf(&gt), 0.0);
        assert_eq!(vector::norm_inf(&gw), 0.0);
    }

    #[test]
    fn stochastic_estimate_is_unbiased() {
        let g = MeanGame::new(vec![3.0, 4.0], None, None).unwrap();
        let mut s = GaussianSampler::standard(1, 2);
        let (theta, w) = ([1.0, -1.0], [0.5, 0.5]);
        let exact = g.disc_gradient(&theta, &w).unwrap();
        let draws = 100;
        let batch = 50;
        let mut mean = vec![0.0; 2];
        for _ in 0..draws {
            let e = g.stochastic_disc_gradient(&theta, &w, batch, &mut s).unwrap();
            vector::axpy(&mut mean, 1.0 / draws as f64, &e);
        }
        // each estimate has per-coordinate variance 2/B
        let sd = libm::sqrt(2.0 / (batch * draws) as f64);
        for k in 0..2 {
            assert!((mean[k] - exact[k]).abs() < 3.0 * sd, "{mean:?} vs {exact:?}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(MeanGame::new(vec![1.0], Some(0.0), None).is_err());
        assert!(MeanGame::new(vec![1.0], None, Some(-1.0)).is_err());
        assert!(MeanGame::new(vec![], None, None).is_err());
    }
}
