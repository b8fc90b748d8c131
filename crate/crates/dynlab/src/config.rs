//! Experiment configuration: a JSON document plus `key=value` overrides on
//! dotted paths.

use std::path::Path;

use dynlab_core::dynamics::Schedule;
use dynlab_core::games::{AnyGame, BilinearGame, CovarianceGame, MeanGame, PwmGame};
use dynlab_core::linalg::Matrix;
use dynlab_core::optim::OptimizerConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GameSpec {
    /// `xᵀAy + bᵀx + cᵀy`; `b`, `c` default to zero.
    Bilinear {
        a: Vec<Vec<f64>>,
        #[serde(default)]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: Option<Vec<f64>>,
    },
    Mean {
        v: Vec<f64>,
        #[serde(default)]
        penalty: Option<f64>,
    },
    /// Either `sigma` or its factor `u` (`Σ = UUᵀ`).
    Covariance {
        #[serde(default)]
        sigma: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        factor: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        reg: f64,
    },
    /// `pwm[position][symbol]`; a dataset of `sequences` draws backs the
    /// held-out validation loss when `sequences > 0`.
    Pwm {
        pwm: Vec<Vec<f64>>,
        #[serde(default)]
        sequences: usize,
        #[serde(default)]
        dataset_seed: u64,
    },
}

/// Starting point for one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum InitSpec {
    Fixed(Vec<f64>),
    Named(NamedInit),
    Gaussian { gaussian: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedInit {
    Zeros,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Named(NamedInit::Zeros)
    }
}

fn default_runs() -> usize {
    1
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub gen: OptimizerConfig,
    pub disc: OptimizerConfig,
    /// Discriminator updates per generator update.
    #[serde(default = "default_one")]
    pub schedule: usize,
    pub iterations: usize,
    /// 0 means exact gradients.
    #[serde(default)]
    pub batch_size: usize,
    /// Coordinate-wise discriminator clip.
    #[serde(default)]
    pub clip: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Step sizes applied to both players in turn; overrides `gen.lr` and
    /// `disc.lr` when present.
    #[serde(default)]
    pub lr_grid: Option<Vec<f64>>,
    /// Held-out fraction of the PWM dataset.
    #[serde(default)]
    pub holdout_fraction: f64,
    #[serde(default = "default_one")]
    pub record_every: usize,
    #[serde(default)]
    pub record_substeps: bool,
    #[serde(default)]
    pub gen_init: InitSpec,
    #[serde(default)]
    pub disc_init: InitSpec,
}

impl ExperimentConfig {
    pub fn from_value(v: Value) -> Result<Self, Error> {
        serde_json::from_value(v).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// Reads a JSON file, applies overrides, and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, Error> {
        let mut v = read_json(path)?;
        apply_overrides(&mut v, overrides)?;
        let cfg = Self::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Step sizes to sweep; a single entry taken from the generator config
    /// when no grid is given.
    pub fn learning_rates(&self) -> Vec<f64> {
        self.lr_grid.clone().unwrap_or_else(|| vec![self.gen.hyper.lr])
    }

    /// Every violated constraint, or `Ok`.
    pub fn validate(&self) -> Result<(), Error> {
        let mut v = Vec::new();
        if self.iterations == 0 {
            v.push("iterations must be positive".to_string());
        }
        if self.runs == 0 {
            v.push("runs must be positive".to_string());
        }
        if self.schedule == 0 {
            v.push("schedule must be positive".to_string());
        }
        if self.record_every == 0 {
            v.push("record_every must be positive".to_string());
        }
        for (name, opt) in [("gen", &self.gen), ("disc", &self.disc)] {
            if let Err(e) = opt.validate() {
                v.push(format!("{name}: {e}"));
            }
        }
        if let Some(grid) = &self.lr_grid {
            if grid.is_empty() {
                v.push("lr_grid must not be empty".to_string());
            }
            for lr in grid {
                if !(*lr > 0.0 && lr.is_finite()) {
                    v.push(format!("lr_grid entry {lr} must be positive"));
                }
            }
        }
        if !(0.0..=0.5).contains(&self.holdout_fraction) {
            v.push(format!(
                "holdout_fraction {} must lie in [0, 0.5]",
                self.holdout_fraction
            ));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                v.push(format!("clip {c} must be positive"));
            }
        }
        for (name, init) in [("gen_init", &self.gen_init), ("disc_init", &self.disc_init)] {
            if let InitSpec::Gaussian { gaussian } = init {
                if !(*gaussian >= 0.0) {
                    v.push(format!("{name} scale must be nonnegative"));
                }
            }
        }
        match self.build_game() {
            Err(Error::Config(list)) => v.extend(list),
            Err(e) => v.push(e.to_string()),
            Ok(game) => {
                use dynlab_core::games::Game;
                for (name, init, dim) in [
                    ("gen_init", &self.gen_init, game.gen_dim()),
                    ("disc_init", &self.disc_init, game.disc_dim()),
                ] {
                    if let InitSpec::Fixed(x) = init {
                        if x.len() != dim {
                            v.push(format!("{name} has length {}, the game needs {dim}", x.len()));
                        }
                    }
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn schedule(&self) -> Result<Schedule, Error> {
        Schedule::new(self.schedule).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn build_game(&self) -> Result<AnyGame, Error> {
        let bad = |e: dynlab_core::games::GameError| Error::Config(vec![format!("game: {e}")]);
        let matrix = |rows: &[Vec<f64>]| Matrix::from_rows(rows).map_err(|e| Error::Config(vec![format!("game: {e}")]));
        Ok(match &self.game {
            GameSpec::Bilinear { a, b, c } => {
                let a = matrix(a)?;
                let b = b.clone().unwrap_or_else(|| vec![0.0; a.rows()]);
                let c = c.clone().unwrap_or_else(|| vec![0.0; a.cols()]);
                AnyGame::Bilinear(BilinearGame::new(a, b, c, 0.0).map_err(bad)?)
            }
            GameSpec::Mean { v, penalty } => AnyGame::Mean(MeanGame::new(v.clone(), self.clip, *penalty).map_err(bad)?),
            GameSpec::Covariance { sigma, factor, reg } => match (sigma, factor) {
                (Some(s), None) => AnyGame::Covariance(CovarianceGame::new(matrix(s)?, *reg, self.clip).map_err(bad)?),
                (None, Some(u)) => {
                    AnyGame::Covariance(CovarianceGame::from_factor(matrix(u)?, *reg, self.clip).map_err(bad)?)
                }
                _ => return Err(Error::Config(vec!["game: give exactly one of sigma and factor".into()])),
            },
            GameSpec::Pwm {
                pwm,
                sequences,
                dataset_seed,
            } => {
                let g = PwmGame::new(pwm.clone(), self.clip).map_err(bad)?;
                if *sequences > 0 {
                    AnyGame::Pwm(
                        g.with_dataset(*sequences, self.holdout_fraction, *dataset_seed)
                            .map_err(bad)?,
                    )
                } else {
                    AnyGame::Pwm(g)
                }
            }
        })
    }
}

pub fn read_json(path: &Path) -> Result<Value, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
}

/// Parses `value` as JSON, falling back to a plain string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `path` (dot-separated object keys, or array indices) to `value`,
/// creating intermediate objects as needed.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), Error> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(vec![format!(
                "override path {path:?} has an empty segment"
            )]));
        }
        let last = k + 1 == parts.len();
        if let Value::Array(items) = cur {
            let idx: usize = part
                .parse()
                .map_err(|_| Error::Config(vec![format!("override path {path:?}: {part:?} is not an index")]))?;
            let len = items.len();
            let slot = items.get_mut(idx).ok_or_else(|| {
                Error::Config(vec![format!("override path {path:?}: index {idx} out of range {len}")])
            })?;
            if last {
                *slot = value;
                return Ok(());
            }
            cur = slot;
            continue;
        }
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        let map = cur.as_object_mut().expect("object");
        if last {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(root: &mut Value, overrides: &[String]) -> Result<(), Error> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(vec![format!("override {o:?} is not key=value")]))?;
        set_path(root, k.trim(), parse_value(v.trim()))?;
    }
    Ok(())
}
