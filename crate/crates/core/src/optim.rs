//! Single-player parameter steppers.
//!
//! Every player in a game owns one [`Stepper`]. The discriminator ascends its
//! gradient, the generator descends; [`StepDirection`] carries that sign so the
//! update rules themselves are written once.
//!
//! Optimistic Adam applies the last-step optimistic template
//! `x ± (2η·p_t − η·p_{t−1})` to Adam's bias-corrected preconditioned gradient
//! `p_t = m̂_t / (√v̂_t + ε)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimError {
    #[error("gradient has length {found}, parameters have length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite gradient")]
    NonFinite,
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("Nesterov momentum needs a gradient callback; use `step_with`")]
    NeedsCallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDirection {
    Ascend,
    Descend,
}

impl StepDirection {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            StepDirection::Ascend => 1.0,
            StepDirection::Descend => -1.0,
        }
    }
}

/// Forecast `M_{t+1}` of the next gradient used by optimistic steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PredictorKind {
    /// `M_{t+1} = ∇_t`
    LastGradient,
    /// `M_{t+1} = (1/t) Σ_{i≤t} ∇_i`
    RunningAverage,
    /// `M_{t+1} = λ·M_t + (1 − λ)·∇_t`
    Discounted { lambda: f64 },
}

impl PredictorKind {
    pub fn validate(&self) -> Result<(), OptimError> {
        match *self {
            PredictorKind::Discounted { lambda } if !(lambda > 0.0 && lambda < 1.0) => {
                Err(OptimError::InvalidHyperparameter {
                    name: "lambda",
                    value: lambda,
                })
            }
            _ => Ok(()),
        }
    }
}

/// Predictor memory: the current forecast `M_t` and how many gradients it has seen.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    pub forecast: Vector,
    pub seen: usize,
}

impl PredictorState {
    pub fn zeros(n: usize) -> Self {
        PredictorState {
            forecast: vec![0.0; n],
            seen: 0,
        }
    }
}

/// Advances the predictor with a freshly observed gradient and returns `M_{t+1}`.
pub fn predictor_update(
    kind: &PredictorKind,
    state: &PredictorState,
    gradient: &[f64],
) -> Result<(Vector, PredictorState), OptimError> {
    kind.validate()?;
    if gradient.len() != state.forecast.len() {
        return Err(OptimError::LengthMismatch {
            expected: state.forecast.len(),
            found: gradient.len(),
        });
    }
    let seen = state.seen + 1;
    let next: Vector = match *kind {
        PredictorKind::LastGradient => gradient.to_vec(),
        PredictorKind::RunningAverage => {
            let w = 1.0 / seen as f64;
            state
                .forecast
                .iter()
                .zip(gradient)
                .map(|(m, g)| m + (g - m) * w)
                .collect()
        }
        PredictorKind::Discounted { lambda } => state
            .forecast
            .iter()
            .zip(gradient)
            .map(|(m, g)| lambda * m + (1.0 - lambda) * g)
            .collect(),
    };
    Ok((next.clone(), PredictorState { forecast: next, seen }))
}

/// Scalar knobs shared by the update rules. Unused ones are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Step size η.
    pub lr: f64,
    /// Momentum coefficient γ.
    pub momentum: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.1,
            momentum: 0.9,
            eps: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

impl Hyperparams {
    pub fn with_lr(lr: f64) -> Self {
        Hyperparams {
            lr,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |name, value| Err(OptimError::InvalidHyperparameter { name, value });
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", self.lr);
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", self.momentum);
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", self.eps);
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", self.beta1);
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", self.beta2);
        }
        Ok(())
    }
}

/// Everything a player's update rule may need to remember between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    params: Vector,
    hyper: Hyperparams,
    predictor: PredictorState,
    velocity: Vector,
    accumulator: Vector,
    first_moment: Vector,
    second_moment: Vector,
    timestep: u64,
    previous_preconditioned: Vector,
}

impl OptimizerState {
    pub fn new(params: Vector, hyper: Hyperparams) -> Result<Self, OptimError> {
        hyper.validate()?;
        if !params.iter().all(|x| x.is_finite()) {
            return Err(OptimError::NonFinite);
        }
        let n = params.len();
        Ok(OptimizerState {
            params,
            hyper,
            predictor: PredictorState::zeros(n),
            velocity: vec![0.0; n],
            accumulator: vec![0.0; n],
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            timestep: 0,
            previous_preconditioned: vec![0.0; n],
        })
    }

    #[inline]
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access for projections applied between steps (weight clipping).
    #[inline]
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.accumulator
    }

    pub fn predictor(&self) -> &PredictorState {
        &self.predictor
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    fn check(&self, gradient: &[f64]) -> Result<(), OptimError> {
        if gradient.len() != self.params.len() {
            return Err(OptimError::LengthMismatch {
                expected: self.params.len(),
                found: gradient.len(),
            });
        }
        if !gradient.iter().all(|g| g.is_finite()) {
            return Err(OptimError::NonFinite);
        }
        Ok(())
    }

    /// `x ± η·∇`
    pub fn gd_step(&mut self, gradient: &[f64], dir: StepDirection) -> Result<(), OptimError> {
        self.check(gradient)?;
        let s = dir.sign() * self.hyper.lr;
        for (p, g) in self.params.iter_mut().zip(gradient) {
            *p += s * g;
        }
        Ok(())
    }

    /// `x ± η·(∇_t + M_{t+1} − M_t)`. With the last-gradient predictor this is
    /// `x ± (2η·∇_t − η·∇_{t−1})`.
    pub fn omd_step(
        &mut self,
        gradient: &[f64],
        predictor: &PredictorKind,
        dir: StepDirection,
    ) -> Result<(), OptimError> {
        self.check(gradient)?;
        let (next, state) = predictor_update(predictor, &self.predictor, gradient)?;
        let s = dir.sign() * self.hyper.lr;
        for (((p, g), m_next), m_now) in self
            .params
            .iter_mut()
            .zip(gradient)
            .zip(&next)
            .zip(&self.predictor.forecast)
        {
            *p += s * (g + m_next - m_now);
        }
        self.predictor = state;
        Ok(())
    }

    /// `v ← γ·v + η·∇`, `x ← x ± v`
    pub fn momentum_step(&mut self, gradient: &[f64], dir: StepDirection) -> Result<(), OptimError> {
        self.check(gradient)?;
        let Hyperparams { lr, momentum, .. } = self.hyper;
        let sign = dir.sign();
        for ((p, v), g) in self.params.iter_mut().zip(&mut self.velocity).zip(gradient) {
            *v = momentum * *v + lr * g;
            *p += sign * *v;
        }
        Ok(())
    }

    /// The point Nesterov momentum evaluates its gradient at: `x ± γ·v`.
    pub fn lookahead(&self, dir: StepDirection) -> Vector {
        let s = dir.sign() * self.hyper.momentum;
        self.params.iter().zip(&self.velocity).map(|(p, v)| p + s * v).collect()
    }

    /// Nesterov momentum: the stepper asks `gradient_at` for the gradient at
    /// [`lookahead`](Self::lookahead), then applies a momentum step with it.
    /// Returns the gradient that was used.
    pub fn nesterov_step<F>(&mut self, mut gradient_at: F, dir: StepDirection) -> Result<Vector, OptimError>
    where
        F: FnMut(&[f64]) -> Vector,
    {
        let ahead = self.lookahead(dir);
        let g = gradient_at(&ahead);
        self.momentum_step(&g, dir)?;
        Ok(g)
    }

    /// Per-coordinate step `η / (√Σ∇² + ε)`.
    pub fn adagrad_step(&mut self, gradient: &[f64], dir: StepDirection) -> Result<(), OptimError> {
        self.check(gradient)?;
        let Hyperparams { lr, eps, .. } = self.hyper;
        let sign = dir.sign();
        for ((p, acc), g) in self.params.iter_mut().zip(&mut self.accumulator).zip(gradient) {
            *acc += g * g;
            *p += sign * lr / (libm::sqrt(*acc) + eps) * g;
        }
        Ok(())
    }

    /// Advances Adam's moments and returns the bias-corrected preconditioned
    /// gradient `m̂ / (√v̂ + ε)`.
    fn adam_direction(&mut self, gradient: &[f64]) -> Vector {
        let Hyperparams { beta1, beta2, eps, .. } = self.hyper;
        self.timestep += 1;
        let t = self.timestep as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);
        self.first_moment
            .iter_mut()
            .zip(&mut self.second_moment)
            .zip(gradient)
            .map(|((m, v), g)| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                (*m / c1) / (libm::sqrt(*v / c2) + eps)
            })
            .collect()
    }

    pub fn adam_step(&mut self, gradient: &[f64], dir: StepDirection) -> Result<(), OptimError> {
        self.check(gradient)?;
        let p = self.adam_direction(gradient);
        let s = dir.sign() * self.hyper.lr;
        for (x, d) in self.params.iter_mut().zip(&p) {
            *x += s * d;
        }
        Ok(())
    }

    /// `x ± (2η·p_t − η·p_{t−1})` on Adam's preconditioned gradient `p`.
    pub fn optimistic_adam_step(&mut self, gradient: &[f64], dir: StepDirection) -> Result<(), OptimError> {
        self.check(gradient)?;
        let p = self.adam_direction(gradient);
        let s = dir.sign() * self.hyper.lr;
        for ((x, now), prev) in self.params.iter_mut().zip(&p).zip(&self.previous_preconditioned) {
            *x += s * (2.0 * now - prev);
        }
        self.previous_preconditioned = p;
        Ok(())
    }
}

/// Which update rule a [`Stepper`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum OptimizerKind {
    Gd,
    Omd { predictor: PredictorKind },
    Momentum,
    Nesterov,
    Adagrad,
    Adam,
    OptimisticAdam,
}

impl OptimizerKind {
    pub fn label(&self) -> &'static str {
        match self {
            OptimizerKind::Gd => "gd",
            OptimizerKind::Omd { predictor } => match predictor {
                PredictorKind::LastGradient => "omd-v1",
                PredictorKind::RunningAverage => "omd-v2",
                PredictorKind::Discounted { .. } => "omd-v3",
            },
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Nesterov => "nesterov",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adam => "adam",
            OptimizerKind::OptimisticAdam => "optimistic-adam",
        }
    }
}

/// Rule plus hyperparameters; enough to build a [`Stepper`] for any start point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub kind: OptimizerKind,
    #[serde(flatten)]
    pub hyper: Hyperparams,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        OptimizerConfig {
            kind,
            hyper: Hyperparams::with_lr(lr),
        }
    }

    pub fn gd(lr: f64) -> Self {
        Self::new(OptimizerKind::Gd, lr)
    }

    pub fn omd(lr: f64) -> Self {
        Self::new(
            OptimizerKind::Omd {
                predictor: PredictorKind::LastGradient,
            },
            lr,
        )
    }

    pub fn with_momentum(mut self, gamma: f64) -> Self {
        self.hyper.momentum = gamma;
        self
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        self.hyper.validate()?;
        if let OptimizerKind::Omd { predictor } = &self.kind {
            predictor.validate()?;
        }
        Ok(())
    }
}

/// A configured update rule bound to one player's state.
#[derive(Debug, Clone, PartialEq)]
pub struct Stepper {
    kind: OptimizerKind,
    state: OptimizerState,
}

impl Stepper {
    pub fn new(config: &OptimizerConfig, params: Vector) -> Result<Self, OptimError> {
        config.validate()?;
        Ok(Stepper {
            kind: config.kind,
            state: OptimizerState::new(params, config.hyper)?,
        })
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn params(&self) -> &[f64] {
        self.state.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.state.params_mut()
    }

    /// Applies one update with a precomputed gradient. Nesterov rejects this.
    pub fn step(&mut self, gradient: &[f64], dir: StepDirection) -> Result<(), OptimError> {
        let st = &mut self.state;
        match &self.kind {
            OptimizerKind::Gd => st.gd_step(gradient, dir),
            OptimizerKind::Omd { predictor } => st.omd_step(gradient, predictor, dir),
            OptimizerKind::Momentum => st.momentum_step(gradient, dir),
            OptimizerKind::Nesterov => Err(OptimError::NeedsCallback),
            OptimizerKind::Adagrad => st.adagrad_step(gradient, dir),
            OptimizerKind::Adam => st.adam_step(gradient, dir),
            OptimizerKind::OptimisticAdam => st.optimistic_adam_step(gradient, dir),
        }
    }

    /// Applies one update, asking `gradient_at` for the gradient at whatever point
    /// the rule needs (current parameters, or the lookahead for Nesterov).
    /// Returns the realized gradient.
    pub fn step_with<F>(&mut self, dir: StepDirection, mut gradient_at: F) -> Result<Vector, OptimError>
    where
        F: FnMut(&[f64]) -> Vector,
    {
        self.try_step_with(dir, |p| Ok::<_, OptimError>(gradient_at(p)))
    }

    /// [`step_with`](Self::step_with) for a fallible gradient oracle.
    pub fn try_step_with<E, F>(&mut self, dir: StepDirection, mut gradient_at: F) -> Result<Vector, E>
    where
        E: From<OptimError>,
        F: FnMut(&[f64]) -> Result<Vector, E>,
    {
        let point = match self.kind {
            OptimizerKind::Nesterov => self.state.lookahead(dir),
            _ => self.state.params().to_vec(),
        };
        let g = gradient_at(&point)?;
        match self.kind {
            OptimizerKind::Nesterov => self.state.momentum_step(&g, dir)?,
            _ => self.step(&g, dir)?,
        }
        Ok(g)
    }
}

/// Convenience for tests and examples: repeated application of one rule.
pub fn run_steps<F>(
    stepper: &mut Stepper,
    dir: StepDirection,
    steps: usize,
    mut gradient_at: F,
) -> Result<Vec<Vector>, OptimError>
where
    F: FnMut(&[f64]) -> Vector,
{
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        stepper.step_with(dir, &mut gradient_at)?;
        out.push(stepper.params().to_vec());
    }
    Ok(out)
}
