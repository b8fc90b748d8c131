//! One configuration, many seeded runs, files on disk.

use std::path::{Path, PathBuf};

use dynlab_core::dynamics::{run_dynamics, RunConfig, Trajectory};
use dynlab_core::games::{AnyGame, Game, GaussianSampler};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_runs, Checkpoint, RunRecord, RunSummary, Scheme};
use crate::config::{ExperimentConfig, InitSpec};
use crate::formats::{write_json, write_trajectory_csv};
use crate::verify::experiment_reports;
use crate::Error;

/// Offset separating the initial-point stream from the gradient-noise stream.
const INIT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Worker threads for run-level parallelism: `DYNLAB_THREADS`, 0 or unset
/// meaning one per core.
pub fn thread_count() -> usize {
    std::env::var("DYNLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn pool() -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Data(e.to_string()))
}

/// Which per-row quantity the summaries report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Kl,
    Distance,
    Loss,
}

impl Metric {
    pub fn for_game(game: &AnyGame) -> Self {
        match game {
            AnyGame::Mean(_) | AnyGame::Pwm(_) => Metric::Kl,
            AnyGame::Bilinear(_) | AnyGame::Covariance(_) => Metric::Distance,
        }
    }

    fn read(self, row: &dynlab_core::dynamics::TrajectoryRow) -> f64 {
        let d = &row.diagnostics;
        match self {
            Metric::Kl => d.kl,
            Metric::Distance => d.distance,
            Metric::Loss => Some(d.loss),
        }
        .unwrap_or(f64::NAN)
    }
}

fn initial_point(spec: &InitSpec, dim: usize, noise: &mut GaussianSampler) -> Vec<f64> {
    match spec {
        InitSpec::Fixed(x) => x.clone(),
        InitSpec::Named(_) => vec![0.0; dim],
        InitSpec::Gaussian { gaussian } => (0..dim).map(|_| gaussian * noise.standard_normal()).collect(),
    }
}

/// Starting points of run `run`: both drawn from one stream keyed by the
/// run seed, generator first.
pub fn initial_points(cfg: &ExperimentConfig, game: &AnyGame, run: usize) -> (Vec<f64>, Vec<f64>) {
    let mut noise = GaussianSampler::standard(run_seed(cfg, run) ^ INIT_STREAM, 1);
    let g = initial_point(&cfg.gen_init, game.gen_dim(), &mut noise);
    let d = initial_point(&cfg.disc_init, game.disc_dim(), &mut noise);
    (g, d)
}

pub fn run_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    cfg.seed.wrapping_add(run as u64)
}

/// Dynamics settings for one (learning rate, run) cell.
pub fn run_config(cfg: &ExperimentConfig, lr: Option<f64>, run: usize) -> Result<RunConfig, Error> {
    let mut gen = cfg.gen;
    let mut disc = cfg.disc;
    if let Some(lr) = lr {
        gen.hyper.lr = lr;
        disc.hyper.lr = lr;
    }
    let mut rc = RunConfig::new(gen, disc, cfg.iterations);
    rc.schedule = cfg.schedule()?;
    rc.batch_size = cfg.batch_size;
    rc.seed = run_seed(cfg, run);
    rc.record_every = cfg.record_every;
    rc.record_substeps = cfg.record_substeps;
    Ok(rc)
}

/// One finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: RunRecord,
    pub trajectory: Trajectory,
}

pub fn simulate_run(cfg: &ExperimentConfig, game: &AnyGame, lr_index: usize, run: usize) -> Result<RunOutput, Error> {
    let lrs = cfg.learning_rates();
    let lr = lrs[lr_index];
    let rc = run_config(cfg, cfg.lr_grid.as_ref().map(|_| lr), run)?;
    let (g0, d0) = initial_points(cfg, game, run);
    let trajectory = run_dynamics(game, g0, d0, &rc)?;
    let metric = Metric::for_game(game);
    let checkpoints = trajectory
        .rounds()
        .map(|r| Checkpoint {
            iteration: r.iteration,
            validation_loss: r.diagnostics.validation_loss,
            metric: metric.read(r),
        })
        .collect();
    Ok(RunOutput {
        record: RunRecord {
            run,
            seed: rc.seed,
            lr_index,
            lr,
            diverged_at: trajectory.diverged_at,
            checkpoints,
        },
        trajectory,
    })
}

/// Everything `summary.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub metric: Metric,
    pub last_epoch: Vec<RunSummary>,
    /// Present when the game provides a held-out loss.
    pub best_validation_loss: Option<RunSummary>,
    pub runs: Vec<RunRecord>,
    pub trajectory_files: Vec<String>,
    pub verification_files: Vec<String>,
}

pub fn trajectory_file_name(lr_index: usize, run: usize) -> String {
    format!("lr{lr_index}_run{run:04}.csv")
}

/// Runs every (learning rate, run) pair. With `out` set, writes one
/// trajectory CSV per pair, verification reports where the game admits
/// them, and `summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentSummary, Error> {
    cfg.validate()?;
    let game = cfg.build_game()?;
    let lrs = cfg.learning_rates();
    let jobs: Vec<(usize, usize)> = (0..lrs.len())
        .flat_map(|li| (0..cfg.runs).map(move |r| (li, r)))
        .collect();
    let traj_dir = out.map(|o| o.join("trajectories"));
    let outputs: Vec<RunRecord> = pool()?.install(|| {
        jobs.par_iter()
            .map(|&(li, r)| {
                let o = simulate_run(cfg, &game, li, r)?;
                if let Some(dir) = &traj_dir {
                    write_trajectory_csv(&dir.join(trajectory_file_name(li, r)), &o.trajectory)?;
                }
                Ok(o.record)
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let metric = Metric::for_game(&game);
    let has_validation = outputs
        .iter()
        .all(|r| r.checkpoints.iter().any(|c| c.validation_loss.is_some()));
    let best_validation_loss = if has_validation {
        aggregate_runs(&outputs, Scheme::BestValidationLoss)?.pop()
    } else {
        None
    };
    let mut summary = ExperimentSummary {
        config: cfg.clone(),
        metric,
        last_epoch: aggregate_runs(&outputs, Scheme::LastEpoch)?,
        best_validation_loss,
        trajectory_files: jobs
            .iter()
            .filter(|_| out.is_some())
            .map(|&(li, r)| format!("trajectories/{}", trajectory_file_name(li, r)))
            .collect(),
        runs: outputs,
        verification_files: Vec::new(),
    };
    if let Some(out) = out {
        for (name, report) in experiment_reports(cfg, &game)? {
            write_json(&out.join(&name), &report)?;
            summary.verification_files.push(name);
        }
        write_json(&out.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

/// Output directory layout, for callers that read results back.
pub fn summary_path(out: &Path) -> PathBuf {
    out.join("summary.json")
}
