//! Grids of experiments: the Cartesian product of named settings applied to
//! a base configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aggregate::Quartiles;
use crate::config::{apply_overrides, read_json, set_path, ExperimentConfig};
use crate::experiment::{run_experiment, ExperimentSummary};
use crate::formats::write_json;
use crate::Error;

/// One named setting along an axis: dotted config paths and their values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub name: String,
    pub set: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// An experiment configuration, possibly incomplete until the axes fill it.
    pub base: Value,
    pub axes: Vec<Vec<GridPoint>>,
}

/// One grid cell and its fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub labels: Vec<String>,
    pub config: ExperimentConfig,
}

impl SweepConfig {
    /// Reads a sweep file and applies `overrides` to the base.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, Error> {
        let mut sweep: SweepConfig = serde_json::from_value(read_json(path)?)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        apply_overrides(&mut sweep.base, overrides)?;
        Ok(sweep)
    }

    /// All cells in row-major order (last axis fastest). Every invalid cell
    /// is reported.
    pub fn cells(&self) -> Result<Vec<Cell>, Error> {
        let mut combos: Vec<Vec<&GridPoint>> = vec![Vec::new()];
        for axis in &self.axes {
            if axis.is_empty() {
                return Err(Error::Config(vec!["sweep axis with no points".into()]));
            }
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    axis.iter().map(move |p| {
                        let mut c = c.clone();
                        c.push(p);
                        c
                    })
                })
                .collect();
        }
        let mut cells = Vec::with_capacity(combos.len());
        let mut problems = Vec::new();
        for combo in combos {
            let labels: Vec<String> = combo.iter().map(|p| p.name.clone()).collect();
            let name = if labels.is_empty() {
                "base".to_string()
            } else {
                labels.join("__")
            };
            if name.contains(['/', '\\']) || name.starts_with('.') {
                problems.push(format!("cell name {name:?} is not a valid directory name"));
                continue;
            }
            let mut v = self.base.clone();
            for p in &combo {
                for (path, val) in &p.set {
                    set_path(&mut v, path, val.clone())?;
                }
            }
            match ExperimentConfig::from_value(v).and_then(|c| c.validate().map(|_| c)) {
                Ok(config) => cells.push(Cell { name, labels, config }),
                Err(Error::Config(errs)) => problems.extend(errs.into_iter().map(|e| format!("{name}: {e}"))),
                Err(e) => return Err(e),
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &cells {
            if !seen.insert(c.name.as_str()) {
                problems.push(format!("duplicate cell name {:?}", c.name));
            }
        }
        if problems.is_empty() {
            Ok(cells)
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Headline numbers for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub name: String,
    pub labels: Vec<String>,
    /// Best-validation-loss selection, when the game has a held-out loss.
    pub best_validation_loss: Option<Quartiles>,
    /// Last-epoch selection, per learning rate.
    pub last_epoch: Vec<(f64, Quartiles)>,
    pub diverged_runs: usize,
}

impl CellSummary {
    fn of(cell: &Cell, s: &ExperimentSummary) -> Self {
        CellSummary {
            name: cell.name.clone(),
            labels: cell.labels.clone(),
            best_validation_loss: s.best_validation_loss.as_ref().map(|b| b.stats),
            last_epoch: s
                .last_epoch
                .iter()
                .map(|r| (r.lr.unwrap_or(f64::NAN), r.stats))
                .collect(),
            diverged_runs: s.runs.iter().filter(|r| r.diverged_at.is_some()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub metric: crate::experiment::Metric,
    pub cells: Vec<CellSummary>,
}

/// Runs every cell. With `out` set, cell `k` writes under `out/<name>/` and
/// the headline table goes to `out/sweep_summary.json`.
pub fn run_sweep(sweep: &SweepConfig, out: Option<&Path>) -> Result<(SweepSummary, Vec<ExperimentSummary>), Error> {
    let cells = sweep.cells()?;
    if cells.is_empty() {
        return Err(Error::Config(vec!["sweep has no cells".into()]));
    }
    let mut full = Vec::with_capacity(cells.len());
    let mut heads = Vec::with_capacity(cells.len());
    for cell in &cells {
        let dir = out.map(|o| o.join(&cell.name));
        let s = run_experiment(&cell.config, dir.as_deref())?;
        heads.push(CellSummary::of(cell, &s));
        full.push(s);
    }
    let summary = SweepSummary {
        metric: full[0].metric,
        cells: heads,
    };
    if let Some(out) = out {
        write_json(&out.join("sweep_summary.json"), &summary)?;
    }
    Ok((summary, full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sweep() -> SweepConfig {
        serde_json::from_value(json!({
            "base": {
                "game": {"kind": "mean", "v": [3.0, 4.0]},
                "gen": {"rule": "gd", "lr": 0.1},
                "disc": {"rule": "gd", "lr": 0.1},
                "iterations": 20,
                "clip": 10.0,
                "runs": 2
            },
            "axes": [
                [
                    {"name": "gd", "set": {}},
                    {"name": "omd", "set": {
                        "gen": {"rule": "omd", "predictor": {"kind": "last_gradient"}, "lr": 0.1},
                        "disc": {"rule": "omd", "predictor": {"kind": "last_gradient"}, "lr": 0.1}}}
                ],
                [
                    {"name": "r1", "set": {"schedule": 1}},
                    {"name": "r5", "set": {"schedule": 5}}
                ]
            ]
        }))
        .unwrap()
    }

    #[test]
    fn product_order_and_files() {
        let s = sweep();
        let names: Vec<_> = s.cells().unwrap().into_iter().map(|c| c.name).collect();
        assert_eq!(names, ["gd__r1", "gd__r5", "omd__r1", "omd__r5"]);
        let dir = tempfile::tempdir().unwrap();
        let (summary, full) = run_sweep(&s, Some(dir.path())).unwrap();
        assert_eq!(summary.cells.len(), 4);
        assert_eq!(full[3].config.schedule, 5);
        assert!(dir.path().join("sweep_summary.json").exists());
        assert!(dir.path().join("omd__r5/trajectories/lr0_run0001.csv").exists());
    }

    #[test]
    fn invalid_cells_are_all_reported() {
        let mut s = sweep();
        s.axes[1][0].set.insert("iterations".into(), json!(0));
        s.axes[1][1].set.insert("runs".into(), json!(0));
        match s.cells() {
            Err(Error::Config(errs)) => assert!(errs.len() >= 4, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }
}
