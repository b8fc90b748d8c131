//! Simultaneous two-player training loops and the exact bilinear OMD recursion.

mod bilinear;

use alloc::string::String;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use bilinear::{
    omd_bilinear_init, omd_bilinear_step, omd_general_init, simulate_bilinear_omd, BilinearOmdState, BilinearTrajectory,
};

use crate::games::{clip_weights_in_place, Diagnostics, Game, GameError, GaussianSampler};
use crate::linalg::{vector, LinalgError, Vector};
use crate::optim::{OptimError, OptimizerConfig, StepDirection, Stepper};

/// A run halts once any parameter vector's norm exceeds this.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("{what}: expected length {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("{which} is not in the required range space (residual {residual:e})")]
    NotInRange { which: &'static str, residual: f64 },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Discriminator updates per generator update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Schedule {
    d_steps_per_g_step: usize,
}

impl Schedule {
    pub fn new(d_steps_per_g_step: usize) -> Result<Self, DynamicsError> {
        if d_steps_per_g_step == 0 {
            return Err(DynamicsError::Config("schedule ratio must be at least 1".to_string()));
        }
        Ok(Schedule { d_steps_per_g_step })
    }

    pub fn simultaneous() -> Self {
        Schedule { d_steps_per_g_step: 1 }
    }

    pub fn d_steps(&self) -> usize {
        self.d_steps_per_g_step
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::simultaneous()
    }
}

impl TryFrom<usize> for Schedule {
    type Error = DynamicsError;
    fn try_from(k: usize) -> Result<Self, Self::Error> {
        Schedule::new(k)
    }
}

impl From<Schedule> for usize {
    fn from(s: Schedule) -> usize {
        s.d_steps_per_g_step
    }
}

/// Everything `run_dynamics` needs besides the game and the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gen: OptimizerConfig,
    pub disc: OptimizerConfig,
    #[serde(default)]
    pub schedule: Schedule,
    pub iterations: usize,
    /// Minibatch size for stochastic gradients; 0 means exact gradients.
    #[serde(default)]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Record every n-th generator update (the last one is always recorded).
    #[serde(default = "one")]
    pub record_every: usize,
    /// Also record a row after each discriminator sub-step.
    #[serde(default)]
    pub record_substeps: bool,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn new(gen: OptimizerConfig, disc: OptimizerConfig, iterations: usize) -> Self {
        RunConfig {
            gen,
            disc,
            schedule: Schedule::simultaneous(),
            iterations,
            batch_size: 0,
            seed: 0,
            record_every: 1,
            record_substeps: false,
        }
    }

    /// Same rule and hyperparameters for both players.
    pub fn symmetric(opt: OptimizerConfig, iterations: usize) -> Self {
        Self::new(opt, opt, iterations)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.gen.validate()?;
        self.disc.validate()?;
        if self.record_every == 0 {
            return Err(DynamicsError::Config("record_every must be at least 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    /// Generator updates performed so far; 0 is the starting point.
    pub iteration: usize,
    /// Discriminator sub-step index for sub-step rows, `None` for round rows.
    pub substep: Option<usize>,
    pub gen: Vector,
    pub disc: Vector,
    /// Norms of the gradients realized in this round (exact gradients at row 0).
    pub gen_grad_norm: f64,
    pub disc_grad_norm: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// Iteration at which the divergence guard tripped.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Rows recorded once per generator update (sub-step rows skipped).
    pub fn rounds(&self) -> impl Iterator<Item = &TrajectoryRow> {
        self.rows.iter().filter(|r| r.substep.is_none())
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rounds().last()
    }

    /// One generator coordinate over the round rows.
    pub fn gen_series(&self, coord: usize) -> Vec<f64> {
        self.rounds().map(|r| r.gen[coord]).collect()
    }

    pub fn disc_series(&self, coord: usize) -> Vec<f64> {
        self.rounds().map(|r| r.disc[coord]).collect()
    }

    /// Any diagnostic over the round rows.
    pub fn series(&self, f: impl Fn(&TrajectoryRow) -> f64) -> Vec<f64> {
        self.rounds().map(f).collect()
    }
}

fn out_of_bounds(p: &[f64]) -> bool {
    !vector::all_finite(p) || vector::norm(p) > DIVERGENCE_GUARD
}

fn oracle_gen<G: Game + ?Sized>(
    game: &G,
    gen: &[f64],
    disc: &[f64],
    batch: usize,
    noise: &mut GaussianSampler,
) -> Result<Vector, DynamicsError> {
    Ok(if batch == 0 {
        game.gen_gradient(gen, disc)?
    } else {
        game.stochastic_gen_gradient(gen, disc, batch, noise)?
    })
}

fn oracle_disc<G: Game + ?Sized>(
    game: &G,
    gen: &[f64],
    disc: &[f64],
    batch: usize,
    noise: &mut GaussianSampler,
) -> Result<Vector, DynamicsError> {
    Ok(if batch == 0 {
        game.disc_gradient(gen, disc)?
    } else {
        game.stochastic_disc_gradient(gen, disc, batch, noise)?
    })
}

/// Simultaneous training: each round runs the schedule's discriminator
/// updates (ascending, clipped after each) and then one generator update
/// (descending).
///
/// With a 1:1 schedule both players see the opponent's parameters from the
/// start of the round. With k:1 the discriminator sub-steps are sequential and
/// the generator sees the latest discriminator. Stochastic runs draw the
/// discriminator batch before the generator batch, from one stream seeded
/// with `cfg.seed`.
pub fn run_dynamics<G: Game + ?Sized>(
    game: &G,
    gen0: Vector,
    disc0: Vector,
    cfg: &RunConfig,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    if gen0.len() != game.gen_dim() {
        return Err(DynamicsError::Shape {
            what: "generator parameters",
            expected: game.gen_dim(),
            found: gen0.len(),
        });
    }
    if disc0.len() != game.disc_dim() {
        return Err(DynamicsError::Shape {
            what: "discriminator parameters",
            expected: game.disc_dim(),
            found: disc0.len(),
        });
    }
    let mut gen = Stepper::new(&cfg.gen, gen0)?;
    let mut disc = Stepper::new(&cfg.disc, disc0)?;
    let mut noise = GaussianSampler::standard(cfg.seed, 0);
    let batch = cfg.batch_size;
    let ratio = cfg.schedule.d_steps();
    let clip = game.disc_clip();

    let mut traj = Trajectory::default();
    let row = |t: usize,
               sub: Option<usize>,
               g: &[f64],
               d: &[f64],
               gn: f64,
               dn: f64|
     -> Result<TrajectoryRow, DynamicsError> {
        Ok(TrajectoryRow {
            iteration: t,
            substep: sub,
            gen: g.to_vec(),
            disc: d.to_vec(),
            gen_grad_norm: gn,
            disc_grad_norm: dn,
            diagnostics: game.diagnostics(g, d)?,
        })
    };
    {
        let (g, d) = (gen.params(), disc.params());
        let gn = vector::norm(&game.gen_gradient(g, d)?);
        let dn = vector::norm(&game.disc_gradient(g, d)?);
        traj.rows.push(row(0, None, g, d, gn, dn)?);
    }

    for t in 1..=cfg.iterations {
        let theta = gen.params().to_vec();
        let w_start = disc.params().to_vec();
        let mut disc_grad = vec![0.0; w_start.len()];
        let mut gen_grad = vec![0.0; theta.len()];
        let mut tripped = false;
        for k in 0..ratio {
            match disc.try_step_with(StepDirection::Ascend, |w| {
                oracle_disc(game, &theta, w, batch, &mut noise)
            }) {
                Ok(g) => disc_grad = g,
                Err(DynamicsError::Optim(OptimError::NonFinite)) => {
                    tripped = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            if let Some(c) = clip {
                clip_weights_in_place(disc.params_mut(), c);
            }
            if out_of_bounds(disc.params()) {
                tripped = true;
                break;
            }
            if cfg.record_substeps {
                traj.rows
                    .push(row(t, Some(k), &theta, disc.params(), 0.0, vector::norm(&disc_grad))?);
            }
        }
        if !tripped {
            let w_seen = if ratio == 1 { w_start } else { disc.params().to_vec() };
            match gen.try_step_with(StepDirection::Descend, |th| {
                oracle_gen(game, th, &w_seen, batch, &mut noise)
            }) {
                Ok(g) => gen_grad = g,
                Err(DynamicsError::Optim(OptimError::NonFinite)) => tripped = true,
                Err(e) => return Err(e),
            }
            tripped |= out_of_bounds(gen.params());
        }
        if tripped {
            traj.diverged_at = Some(t);
        }
        let finite = vector::all_finite(gen.params()) && vector::all_finite(disc.params());
        if finite && (tripped || t % cfg.record_every == 0 || t == cfg.iterations) {
            traj.rows.push(row(
                t,
                None,
                gen.params(),
                disc.params(),
                vector::norm(&gen_grad),
                vector::norm(&disc_grad),
            )?);
        }
        if tripped {
            break;
        }
    }
    Ok(traj)
}
