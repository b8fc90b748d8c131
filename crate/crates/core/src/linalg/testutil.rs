use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::Matrix;

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

pub fn random_matrix(rng: &mut TestRng, m: usize, n: usize) -> Matrix {
    Matrix::new(m, n, rng.vector(m * n)).unwrap()
}

/// Product of Gaussian `m × r` and `r × n` factors; rank `r` almost surely.
pub fn random_rank_matrix(rng: &mut TestRng, m: usize, n: usize, r: usize) -> Matrix {
    if r == 0 {
        return Matrix::zeros(m, n);
    }
    random_matrix(rng, m, r).matmul(&random_matrix(rng, r, n)).unwrap()
}
