//! Numerical checks of the last-iterate convergence theory for bilinear OMD,
//! limit-cycle classification and KL evaluators.

mod cycle;
mod general;
mod kl;
mod ladder;
mod report;
mod verify;

pub use cycle::{detect_limit_cycle, detect_limit_cycle_multi, CycleAnalysis, CycleThresholds, Verdict};
pub use general::{
    general_decompose, transform_iterates, DecompositionResiduals, GeneralDecomposition, TransformedIterates,
};
pub use kl::{kl_categorical, kl_gaussian_mean};
pub use ladder::{delta, delta_ladder, inner_m, inner_n, m_image, n_image, ConvergenceParams};
pub use report::{CheckRecord, VerificationReport};
pub use verify::{
    lemma1_sides, verify_claim1, verify_corollary, verify_gd_divergence, verify_lemma1, verify_lemma1_range,
    verify_theorem, DeltaLadder,
};

use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("expected length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
