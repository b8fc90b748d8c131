#![allow(dead_code)]

use dynlab_core::linalg::{project_onto_range, spectral_norm, Matrix};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (rand_core::RngCore::next_u64(&mut self.0) % n as u64) as usize
    }

    pub fn matrix(&mut self, m: usize, n: usize) -> Matrix {
        Matrix::new(m, n, self.vector(m * n)).unwrap()
    }

    /// Rank `r` almost surely.
    pub fn rank_matrix(&mut self, m: usize, n: usize, r: usize) -> Matrix {
        if r == 0 {
            return Matrix::zeros(m, n);
        }
        self.matrix(m, r).matmul(&self.matrix(r, n)).unwrap()
    }

    /// `x₀ ∈ R(A)`, `y₀ ∈ R(Aᵀ)`.
    pub fn range_start(&mut self, a: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let x = project_onto_range(a, &self.vector(a.rows())).unwrap();
        let y = project_onto_range(&a.transpose(), &self.vector(a.cols())).unwrap();
        (x, y)
    }
}

pub fn scaled_to(a: &Matrix, norm: f64) -> Matrix {
    let s = spectral_norm(a).unwrap();
    if s == 0.0 {
        a.clone()
    } else {
        a.scale(norm / s)
    }
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().max_abs()
}
