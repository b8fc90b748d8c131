use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dynamics::BilinearTrajectory;
use crate::linalg::{pseudoinverse, vector, Matrix, Vector};

/// Splits the linear terms of `xᵀAy + bᵀx + cᵀy` into range and null parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralDecomposition {
    /// `AA⁺b`, in the range of `A`.
    pub b1: Vector,
    /// `b − b₁`, in the null space of `Aᵀ`.
    pub b2: Vector,
    /// `(Aᵀ)⁺c`
    pub b3: Vector,
    /// `A⁺Ac`, in the range of `Aᵀ`.
    pub c1: Vector,
    /// `c − c₁`, in the null space of `A`.
    pub c2: Vector,
    /// `A⁺b`
    pub c3: Vector,
}

/// Residuals of the four defining relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResiduals {
    /// `‖Aᵀb₂‖`
    pub b2_null: f64,
    /// `‖Ac₂‖`
    pub c2_null: f64,
    /// `‖Ac₃ − b₁‖`
    pub c3_solves: f64,
    /// `‖Aᵀb₃ − c₁‖`
    pub b3_solves: f64,
}

impl DecompositionResiduals {
    pub fn max(&self) -> f64 {
        self.b2_null.max(self.c2_null).max(self.c3_solves).max(self.b3_solves)
    }
}

pub fn general_decompose(a: &Matrix, b: &[f64], c: &[f64]) -> Result<GeneralDecomposition, AnalysisError> {
    if b.len() != a.rows() {
        return Err(AnalysisError::Dimension {
            expected: a.rows(),
            found: b.len(),
        });
    }
    if c.len() != a.cols() {
        return Err(AnalysisError::Dimension {
            expected: a.cols(),
            found: c.len(),
        });
    }
    let pinv = pseudoinverse(a)?;
    let c3 = pinv.matvec(b)?;
    let b3 = pinv.tr_matvec(c)?;
    let b1 = a.matvec(&c3)?;
    let c1 = a.tr_matvec(&b3)?;
    Ok(GeneralDecomposition {
        b2: vector::sub(b, &b1),
        c2: vector::sub(c, &c1),
        b1,
        b3,
        c1,
        c3,
    })
}

impl GeneralDecomposition {
    pub fn residuals(&self, a: &Matrix) -> Result<DecompositionResiduals, AnalysisError> {
        Ok(DecompositionResiduals {
            b2_null: vector::norm(&a.tr_matvec(&self.b2)?),
            c2_null: vector::norm(&a.matvec(&self.c2)?),
            c3_solves: vector::distance(&a.matvec(&self.c3)?, &self.b1),
            b3_solves: vector::distance(&a.tr_matvec(&self.b3)?, &self.c1),
        })
    }

    /// True when both linear terms lie in the relevant ranges, i.e. the game
    /// has a finite value.
    pub fn has_finite_value(&self, tol: f64) -> bool {
        vector::norm(&self.b2) <= tol && vector::norm(&self.c2) <= tol
    }
}

/// `α_t = x_t + ηt·b₂ + b₃`, `β_t = y_t − ηt·c₂ + c₃` for `t ≥ −2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedIterates {
    alphas: Vec<Vector>,
    betas: Vec<Vector>,
}

impl TransformedIterates {
    pub fn alpha(&self, t: isize) -> &[f64] {
        &self.alphas[(t + 2) as usize]
    }

    pub fn beta(&self, t: isize) -> &[f64] {
        &self.betas[(t + 2) as usize]
    }

    pub fn last_t(&self) -> usize {
        self.alphas.len() - 3
    }

    /// Largest deviation from `α_{t+1} = α_t − 2ηAβ_t + ηAβ_{t−1}` and
    /// `β_{t+1} = β_t + 2ηAᵀα_t − ηAᵀα_{t−1}`; entry `k` is the step into `t = k`.
    pub fn homogeneous_residuals(&self, a: &Matrix, eta: f64) -> Result<Vec<f64>, AnalysisError> {
        let last = self.last_t() as isize;
        let mut out = Vec::with_capacity(self.last_t() + 1);
        for t in -1..last {
            let mut x = self.alpha(t).to_vec();
            vector::axpy(&mut x, -2.0 * eta, &a.matvec(self.beta(t))?);
            vector::axpy(&mut x, eta, &a.matvec(self.beta(t - 1))?);
            let mut y = self.beta(t).to_vec();
            vector::axpy(&mut y, 2.0 * eta, &a.tr_matvec(self.alpha(t))?);
            vector::axpy(&mut y, -eta, &a.tr_matvec(self.alpha(t - 1))?);
            let r = vector::distance(&x, self.alpha(t + 1)).max(vector::distance(&y, self.beta(t + 1)));
            out.push(r);
        }
        Ok(out)
    }
}

/// Maps general-game OMD iterates onto the homogeneous game.
pub fn transform_iterates(
    traj: &BilinearTrajectory,
    dec: &GeneralDecomposition,
    eta: f64,
) -> Result<TransformedIterates, AnalysisError> {
    if traj.last_t() < 1 {
        return Err(AnalysisError::Invalid("trajectory too short"));
    }
    if dec.b2.len() != traj.a.rows() || dec.c2.len() != traj.a.cols() {
        return Err(AnalysisError::Dimension {
            expected: traj.a.rows(),
            found: dec.b2.len(),
        });
    }
    let last = traj.last_t() as isize;
    let mut alphas = Vec::with_capacity(traj.last_t() + 3);
    let mut betas = Vec::with_capacity(traj.last_t() + 3);
    for t in -2..=last {
        let s = eta * t as f64;
        let mut al = vector::add(traj.x(t), &dec.b3);
        vector::axpy(&mut al, s, &dec.b2);
        let mut be = vector::add(traj.y(t), &dec.c3);
        vector::axpy(&mut be, -s, &dec.c2);
        alphas.push(al);
        betas.push(be);
    }
    Ok(TransformedIterates { alphas, betas })
}
