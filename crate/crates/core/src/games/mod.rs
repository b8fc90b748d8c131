//! Gradient oracles for the zero-sum games.
//!
//! Every game is `min_gen max_disc L(gen, disc)`. Oracles return the true
//! partial derivatives of `L`; the dynamics descend on the generator gradient
//! and ascend on the discriminator gradient.

mod bilinear;
mod covariance;
mod mean;
mod pwm;
mod sampler;

use alloc::string::String;

pub use bilinear::{bilinear_gradients, BilinearGame};
pub use covariance::{covariance_game_gradients, covariance_stochastic_gradients, CovarianceGame};
pub use mean::{mean_game_gradients, MeanGame};
pub use pwm::{pwm_game_gradients, softmax, PwmDataset, PwmGame};
pub use sampler::{sample_minibatch, GaussianSampler};

use crate::linalg::{LinalgError, Vector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("{what}: expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("invalid game: {0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub(crate) fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), GameError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(GameError::Dimension {
            what,
            expected,
            found: v.len(),
        })
    }
}

/// Per-state quantities recorded alongside a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    pub loss: f64,
    /// `‖Aᵀx‖² + ‖Ay‖²` about the equilibrium (bilinear games).
    pub delta0: Option<f64>,
    /// Distance to the equilibrium in the game's natural metric.
    pub distance: Option<f64>,
    pub kl: Option<f64>,
    /// Held-out discriminator loss (PWM game with a dataset).
    pub validation_loss: Option<f64>,
}

/// A two-player zero-sum game with exact and minibatch gradient oracles.
pub trait Game {
    fn name(&self) -> &'static str;
    fn gen_dim(&self) -> usize;
    fn disc_dim(&self) -> usize;

    fn loss(&self, gen: &[f64], disc: &[f64]) -> Result<f64, GameError>;

    /// `∂L/∂gen`
    fn gen_gradient(&self, gen: &[f64], disc: &[f64]) -> Result<Vector, GameError>;

    /// `∂L/∂disc`
    fn disc_gradient(&self, gen: &[f64], disc: &[f64]) -> Result<Vector, GameError>;

    /// Unbiased minibatch estimate of `∂L/∂gen`. Games without sampling noise
    /// fall back to the exact gradient.
    fn stochastic_gen_gradient(
        &self,
        gen: &[f64],
        disc: &[f64],
        batch: usize,
        noise: &mut GaussianSampler,
    ) -> Result<Vector, GameError> {
        let _ = (batch, noise);
        self.gen_gradient(gen, disc)
    }

    /// Unbiased minibatch estimate of `∂L/∂disc`.
    fn stochastic_disc_gradient(
        &self,
        gen: &[f64],
        disc: &[f64],
        batch: usize,
        noise: &mut GaussianSampler,
    ) -> Result<Vector, GameError> {
        let _ = (batch, noise);
        self.disc_gradient(gen, disc)
    }

    /// Coordinate-wise clip applied to the discriminator after each of its updates.
    fn disc_clip(&self) -> Option<f64> {
        None
    }

    fn diagnostics(&self, gen: &[f64], disc: &[f64]) -> Result<Diagnostics, GameError>;
}

/// Clamps every coordinate to `[−c, c]`.
pub fn clip_weights(w: &[f64], c: f64) -> Vector {
    w.iter().map(|x| x.clamp(-c, c)).collect()
}

pub fn clip_weights_in_place(w: &mut [f64], c: f64) {
    for x in w {
        *x = x.clamp(-c, c);
    }
}

/// Any of the built-in games, for callers that pick one at run time.
#[derive(Debug, Clone)]
pub enum AnyGame {
    Bilinear(BilinearGame),
    Mean(MeanGame),
    Covariance(CovarianceGame),
    Pwm(PwmGame),
}

impl AnyGame {
    fn inner(&self) -> &dyn Game {
        match self {
            AnyGame::Bilinear(g) => g,
            AnyGame::Mean(g) => g,
            AnyGame::Covariance(g) => g,
            AnyGame::Pwm(g) => g,
        }
    }
}

impl Game for AnyGame {
    fn name(&self) -> &'static str {
        self.inner().name()
    }
    fn gen_dim(&self) -> usize {
        self.inner().gen_dim()
    }
    fn disc_dim(&self) -> usize {
        self.inner().disc_dim()
    }
    fn loss(&self, gen: &[f64], disc: &[f64]) -> Result<f64, GameError> {
        self.inner().loss(gen, disc)
    }
    fn gen_gradient(&self, gen: &[f64], disc: &[f64]) -> Result<Vector, GameError> {
        self.inner().gen_gradient(gen, disc)
    }
    fn disc_gradient(&self, gen: &[f64], disc: &[f64]) -> Result<Vector, GameError> {
        self.inner().disc_gradient(gen, disc)
    }
    fn stochastic_gen_gradient(
        &self,
        gen: &[f64],
        disc: &[f64],
        batch: usize,
        noise: &mut GaussianSampler,
    ) -> Result<Vector, GameError> {
        self.inner().stochastic_gen_gradient(gen, disc, batch, noise)
    }
    fn stochastic_disc_gradient(
        &self,
        gen: &[f64],
        disc: &[f64],
        batch: usize,
        noise: &mut GaussianSampler,
    ) -> Result<Vector, GameError> {
        self.inner().stochastic_disc_gradient(gen, disc, batch, noise)
    }
    fn disc_clip(&self) -> Option<f64> {
        self.inner().disc_clip()
    }
    fn diagnostics(&self, gen: &[f64], disc: &[f64]) -> Result<Diagnostics, GameError> {
        self.inner().diagnostics(gen, disc)
    }
}
