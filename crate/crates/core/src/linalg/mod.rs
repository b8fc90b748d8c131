//! Dense linear algebra for the bilinear-game analysis: SVD, pseudoinverse,
//! spectral norm, range projection and the game norm.

mod matrix;
mod svd;
pub mod vector;

#[cfg(test)]
pub(crate) mod testutil;

pub use matrix::Matrix;
pub use svd::{game_norm, project_onto_range, pseudoinverse, spectral_norm, svd, Svd};
pub use vector::Vector;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("rows have differing lengths")]
    Ragged,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },
}
