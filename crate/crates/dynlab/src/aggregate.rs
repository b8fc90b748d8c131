//! Model selection across runs and learning rates, and robust summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::Error;

/// One recorded state of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    /// Held-out discriminator loss, when the game has a validation set.
    pub validation_loss: Option<f64>,
    /// The quality metric being summarized (KL when defined).
    pub metric: f64,
}

/// All checkpoints of one (run, learning rate) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub lr_index: usize,
    pub lr: f64,
    pub diverged_at: Option<usize>,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Per run, the (iteration, learning rate) with the lowest held-out loss.
    /// The untrained starting point is not a candidate.
    BestValidationLoss,
    /// Per learning rate, the model after the last iteration.
    LastEpoch,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::BestValidationLoss => "best_validation_loss",
            Scheme::LastEpoch => "last_epoch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedModel {
    pub run: usize,
    pub lr: f64,
    pub iteration: usize,
    pub validation_loss: Option<f64>,
    pub metric: f64,
}

/// Median and quartiles by linear interpolation between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Result<Self, Error> {
        if values.is_empty() {
            return Err(Error::Data("cannot summarize an empty set".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(Quartiles {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// `p`-quantile of sorted data at position `(n − 1)p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: Scheme,
    /// Set for last-epoch summaries, one per learning rate.
    pub lr: Option<f64>,
    /// Selected model per run, ordered by run index.
    pub selected: Vec<SelectedModel>,
    /// Last-iteration metric per run at the same learning rate(s), for reference.
    pub final_metrics: Vec<f64>,
    pub stats: Quartiles,
}

impl RunSummary {
    pub fn median(&self) -> f64 {
        self.stats.median
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.selected.iter().map(|s| s.metric).collect()
    }
}

fn last(rec: &RunRecord) -> Result<&Checkpoint, Error> {
    rec.checkpoints
        .last()
        .ok_or_else(|| Error::Data(format!("run {} lr {} has no checkpoints", rec.run, rec.lr)))
}

/// Summarizes `records` under `scheme`. The result does not depend on the
/// order of `records`: runs are keyed by index and ties go to the smaller
/// learning-rate index, then the earlier iteration.
pub fn aggregate_runs(records: &[RunRecord], scheme: Scheme) -> Result<Vec<RunSummary>, Error> {
    if records.is_empty() {
        return Err(Error::Data("no runs to aggregate".into()));
    }
    match scheme {
        Scheme::BestValidationLoss => {
            let mut by_run: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
            for r in records {
                by_run.entry(r.run).or_default().push(r);
            }
            let mut selected = Vec::new();
            let mut finals = Vec::new();
            for (run, mut recs) in by_run {
                recs.sort_by_key(|r| r.lr_index);
                let mut best: Option<(f64, usize, usize, SelectedModel)> = None;
                for r in &recs {
                    for c in r.checkpoints.iter().filter(|c| c.iteration > 0) {
                        let Some(v) = c.validation_loss else { continue };
                        if v.is_nan() {
                            continue;
                        }
                        let cand = (v, r.lr_index, c.iteration);
                        let better = match &best {
                            None => true,
                            Some((bv, bl, bi, _)) => {
                                cand.0.total_cmp(bv).then(cand.1.cmp(bl)).then(cand.2.cmp(bi)).is_lt()
                            }
                        };
                        if better {
                            best = Some((
                                v,
                                r.lr_index,
                                c.iteration,
                                SelectedModel {
                                    run,
                                    lr: r.lr,
                                    iteration: c.iteration,
                                    validation_loss: Some(v),
                                    metric: c.metric,
                                },
                            ));
                        }
                    }
                }
                let (_, lr_index, _, model) = best.ok_or_else(|| {
                    Error::Data(format!("run {run} has no validation loss; use the last_epoch scheme"))
                })?;
                let last_model = last(recs.iter().find(|r| r.lr_index == lr_index).expect("selected lr"))?;
                finals.push(last_model.metric);
                selected.push(model);
            }
            let stats = Quartiles::of(&selected.iter().map(|s| s.metric).collect::<Vec<_>>())?;
            Ok(vec![RunSummary {
                scheme,
                lr: None,
                selected,
                final_metrics: finals,
                stats,
            }])
        }
        Scheme::LastEpoch => {
            let mut by_lr: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
            for r in records {
                by_lr.entry(r.lr_index).or_default().push(r);
            }
            let mut out = Vec::new();
            for (_, mut recs) in by_lr {
                recs.sort_by_key(|r| r.run);
                let mut selected = Vec::with_capacity(recs.len());
                for r in &recs {
                    let c = last(r)?;
                    selected.push(SelectedModel {
                        run: r.run,
                        lr: r.lr,
                        iteration: c.iteration,
                        validation_loss: c.validation_loss,
                        metric: c.metric,
                    });
                }
                let metrics: Vec<f64> = selected.iter().map(|s| s.metric).collect();
                out.push(RunSummary {
                    scheme,
                    lr: Some(recs[0].lr),
                    final_metrics: metrics.clone(),
                    stats: Quartiles::of(&metrics)?,
                    selected,
                });
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(run: usize, lr_index: usize, cps: &[(usize, f64, f64)]) -> RunRecord {
        RunRecord {
            run,
            seed: run as u64,
            lr_index,
            lr: [0.1, 0.3][lr_index],
            diverged_at: None,
            checkpoints: cps
                .iter()
                .map(|&(iteration, v, metric)| Checkpoint {
                    iteration,
                    validation_loss: Some(v),
                    metric,
                })
                .collect(),
        }
    }

    #[test]
    fn quartiles_interpolate() {
        let q = Quartiles::of(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.5, 2.0, 2.5));
        let q = Quartiles::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
        assert_eq!(Quartiles::of(&[7.0]).unwrap().median, 7.0);
        assert!(Quartiles::of(&[]).is_err());
    }

    #[test]
    fn last_epoch_median() {
        let recs: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(k, m)| rec(k, 0, &[(10, 0.5, *m)]))
            .collect();
        let s = aggregate_runs(&recs, Scheme::LastEpoch).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].median(), 2.0);
        let single = aggregate_runs(&recs[..1], Scheme::LastEpoch).unwrap();
        assert_eq!(single[0].median(), 1.0);
        assert!(aggregate_runs(&[], Scheme::LastEpoch).is_err());
    }

    #[test]
    fn schemes_differ_when_the_best_checkpoint_is_not_the_last() {
        // Run 0: lr 0.1 reaches its best validation loss at iteration 5
        // (metric 0.2); lr 0.3 never beats it. The last checkpoints carry 0.9.
        let recs = vec![
            rec(0, 0, &[(0, 1.0, 1.0), (5, 0.1, 0.2), (10, 0.4, 0.9)]),
            rec(0, 1, &[(0, 1.0, 1.0), (5, 0.3, 0.5), (10, 0.2, 0.8)]),
            rec(1, 0, &[(0, 1.0, 1.0), (5, 0.6, 0.7), (10, 0.5, 0.6)]),
            rec(1, 1, &[(0, 1.0, 1.0), (5, 0.05, 0.3), (10, 0.6, 1.2)]),
        ];
        let best = aggregate_runs(&recs, Scheme::BestValidationLoss).unwrap();
        assert_eq!(best.len(), 1);
        let sel: Vec<_> = best[0]
            .selected
            .iter()
            .map(|s| (s.run, s.lr, s.iteration, s.metric))
            .collect();
        assert_eq!(sel, vec![(0, 0.1, 5, 0.2), (1, 0.3, 5, 0.3)]);
        assert!((best[0].median() - 0.25).abs() < 1e-15);
        assert_eq!(best[0].final_metrics, vec![0.9, 1.2]);

        let last = aggregate_runs(&recs, Scheme::LastEpoch).unwrap();
        assert_eq!(last.len(), 2);
        assert_eq!(last[0].lr, Some(0.1));
        assert!((last[0].median() - 0.75).abs() < 1e-15);
        assert!((last[1].median() - 1.0).abs() < 1e-15);

        let mut shuffled = recs.clone();
        shuffled.reverse();
        shuffled.swap(0, 2);
        assert_eq!(aggregate_runs(&shuffled, Scheme::BestValidationLoss).unwrap(), best);
        assert_eq!(aggregate_runs(&shuffled, Scheme::LastEpoch).unwrap(), last);
    }

    #[test]
    fn starting_point_is_never_selected() {
        // w = 0 at the start gives a zero held-out loss
        let recs = vec![rec(0, 0, &[(0, 0.0, 5.0), (5, 0.3, 0.4), (10, 0.2, 0.6)])];
        let best = aggregate_runs(&recs, Scheme::BestValidationLoss).unwrap();
        assert_eq!(best[0].selected[0].iteration, 10);
        assert!(aggregate_runs(&[rec(0, 0, &[(0, 0.0, 5.0)])], Scheme::BestValidationLoss).is_err());
    }

    #[test]
    fn best_validation_needs_a_validation_loss() {
        let mut r = rec(0, 0, &[(0, 1.0, 1.0)]);
        r.checkpoints[0].validation_loss = None;
        assert!(aggregate_runs(&[r], Scheme::BestValidationLoss).is_err());
    }
}
