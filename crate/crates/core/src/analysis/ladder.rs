use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::linalg::{pseudoinverse, spectral_norm, vector, Matrix, Vector};

/// Constants governing the convergence theorem for `xᵀAy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceParams {
    /// `‖(AAᵀ)⁺‖`
    pub gamma: f64,
    /// `max(‖A‖, ‖Aᵀ‖)`
    pub lambda_inf: f64,
    pub eta: f64,
}

impl ConvergenceParams {
    pub fn new(a: &Matrix, eta: f64) -> Result<Self, AnalysisError> {
        let aat = a.matmul(&a.transpose())?;
        let gamma = spectral_norm(&pseudoinverse(&aat)?)?;
        let lambda_inf = spectral_norm(a)?;
        Ok(ConvergenceParams { gamma, lambda_inf, eta })
    }

    /// Largest step size the theorem admits: `1/(3γ²)`.
    pub fn eta_bound(&self) -> f64 {
        1.0 / (3.0 * self.gamma * self.gamma)
    }

    /// `1 − η²/γ²`
    pub fn contraction(&self) -> f64 {
        1.0 - self.eta * self.eta / (self.gamma * self.gamma)
    }

    /// Human-readable list of violated hypotheses; empty when all hold.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.gamma > 0.0) {
            out.push(String::from("A has rank zero (gamma is not positive)"));
        }
        if self.lambda_inf > 1.0 + 1e-12 {
            out.push(alloc::format!("lambda_inf = {} exceeds 1", self.lambda_inf));
        }
        if !(self.eta > 0.0) {
            out.push(alloc::format!("eta = {} is not positive", self.eta));
        } else if !(self.eta < self.eta_bound()) {
            out.push(alloc::format!(
                "eta = {} is not below 1/(3 gamma^2) = {}",
                self.eta,
                self.eta_bound()
            ));
        }
        out
    }
}

/// `M_i Aᵀp` for `p` in the row space of `x` (length `rows(A)`): start from
/// `Aᵀp` and alternately apply `A` and `Aᵀ`, `i` times.
pub fn m_image(a: &Matrix, p: &[f64], i: usize) -> Result<Vector, AnalysisError> {
    let mut v = a.tr_matvec(p)?;
    for level in 0..i {
        v = if level % 2 == 0 {
            a.matvec(&v)?
        } else {
            a.tr_matvec(&v)?
        };
    }
    Ok(v)
}

/// `N_i Au` for `u` of length `cols(A)`: start from `Au` and alternately apply
/// `Aᵀ` and `A`, `i` times.
pub fn n_image(a: &Matrix, u: &[f64], i: usize) -> Result<Vector, AnalysisError> {
    let mut v = a.matvec(u)?;
    for level in 0..i {
        v = if level % 2 == 0 {
            a.tr_matvec(&v)?
        } else {
            a.matvec(&v)?
        };
    }
    Ok(v)
}

/// `⟨p, q⟩` in the `M_i` geometry of the x-space: `(M_iAᵀp)·(M_iAᵀq)`.
pub fn inner_m(a: &Matrix, p: &[f64], q: &[f64], i: usize) -> Result<f64, AnalysisError> {
    Ok(vector::dot(&m_image(a, p, i)?, &m_image(a, q, i)?))
}

/// `⟨u, v⟩` in the `N_i` geometry of the y-space: `(N_iAu)·(N_iAv)`.
pub fn inner_n(a: &Matrix, u: &[f64], v: &[f64], i: usize) -> Result<f64, AnalysisError> {
    Ok(vector::dot(&n_image(a, u, i)?, &n_image(a, v, i)?))
}

/// `Δⁱ = ‖N_iAy‖² + ‖M_iAᵀx‖²`
pub fn delta(a: &Matrix, x: &[f64], y: &[f64], i: usize) -> Result<f64, AnalysisError> {
    Ok(vector::norm_sq(&n_image(a, y, i)?) + vector::norm_sq(&m_image(a, x, i)?))
}

/// `[Δ⁰, Δ¹, …, Δ^levels]` in one pass up the ladder.
pub fn delta_ladder(a: &Matrix, x: &[f64], y: &[f64], levels: usize) -> Result<Vec<f64>, AnalysisError> {
    let mut mx = a.tr_matvec(x)?;
    let mut ny = a.matvec(y)?;
    let mut out = Vec::with_capacity(levels + 1);
    out.push(vector::norm_sq(&mx) + vector::norm_sq(&ny));
    for level in 0..levels {
        if level % 2 == 0 {
            mx = a.matvec(&mx)?;
            ny = a.tr_matvec(&ny)?;
        } else {
            mx = a.tr_matvec(&mx)?;
            ny = a.matvec(&ny)?;
        }
        out.push(vector::norm_sq(&mx) + vector::norm_sq(&ny));
    }
    Ok(out)
}
