use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::GameError;
use crate::linalg::Vector;

/// Seeded Gaussian stream: ChaCha8 uniforms turned into normals by Box–Muller.
///
/// One sampler per run. All of a run's randomness (data batches, generator
/// noise, categorical draws) is taken from it in a fixed order.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    seed: u64,
    mean: Vector,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSampler {
    pub fn new(seed: u64, mean: Vector) -> Self {
        GaussianSampler {
            seed,
            mean,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Zero-mean stream of the given dimension.
    pub fn standard(seed: u64, dim: usize) -> Self {
        Self::new(seed, alloc::vec![0.0; dim])
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 − U lies in (0, 1], so the log is finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(2.0 * core::f64::consts::PI * u2);
        self.spare = Some(r * s);
        r * c
    }

    /// One draw from `N(mean, I)`.
    pub fn sample(&mut self) -> Vector {
        let n = self.mean.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let z = self.standard_normal();
            out.push(self.mean[k] + z);
        }
        out
    }

    /// Fills `out` with standard normals.
    pub fn fill_standard(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.standard_normal();
        }
    }

    /// Underlying generator, for draws that are not Gaussian.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// `size` i.i.d. draws from the sampler's `N(mean, I)`.
pub fn sample_minibatch(sampler: &mut GaussianSampler, size: usize) -> Result<Vec<Vector>, GameError> {
    if size == 0 {
        return Err(GameError::EmptyBatch);
    }
    Ok((0..size).map(|_| sampler.sample()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_mean_matches() {
        let mut s = GaussianSampler::new(7, alloc::vec![3.0, 4.0]);
        let batch = sample_minibatch(&mut s, 100_000).unwrap();
        for k in 0..2 {
            let m: f64 = batch.iter().map(|v| v[k]).sum::<f64>() / batch.len() as f64;
            // 3σ of the sample mean is 3/√10⁵ ≈ 0.0095
            assert!((m - s.mean()[k]).abs() < 0.02, "{m}");
        }
    }

    #[test]
    fn unit_variance() {
        let mut s = GaussianSampler::standard(3, 1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        assert!((v - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn determinism_and_shapes() {
        let mut a = GaussianSampler::standard(42, 3);
        let mut b = GaussianSampler::standard(42, 3);
        assert_eq!(
            sample_minibatch(&mut a, 5).unwrap(),
            sample_minibatch(&mut b, 5).unwrap()
        );
        let one = sample_minibatch(&mut a, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 3);
        assert_eq!(sample_minibatch(&mut a, 0), Err(GameError::EmptyBatch));
        let mut c = GaussianSampler::standard(43, 3);
        assert_ne!(c.sample(), GaussianSampler::standard(42, 3).sample());
    }
}
