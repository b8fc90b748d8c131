use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dynamics::DIVERGENCE_GUARD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Cycling,
    Diverged,
    Undetermined,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Cycling => "cycling",
            Verdict::Diverged => "diverged",
            Verdict::Undetermined => "undetermined",
        }
    }

    fn severity(self) -> u8 {
        match self {
            Verdict::Converged => 0,
            Verdict::Undetermined => 1,
            Verdict::Cycling => 2,
            Verdict::Diverged => 3,
        }
    }
}

/// Thresholds for [`detect_limit_cycle`]; the window is a fraction of the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleThresholds {
    pub window_fraction: f64,
    pub cycle_tol: f64,
    pub conv_tol: f64,
}

impl Default for CycleThresholds {
    fn default() -> Self {
        CycleThresholds {
            window_fraction: 0.1,
            cycle_tol: 5e-2,
            conv_tol: 1e-3,
        }
    }
}

impl CycleThresholds {
    pub fn window_for(&self, len: usize) -> usize {
        ((len as f64 * self.window_fraction) as usize).max(1)
    }
}

/// Verdict plus the statistics it was read from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleAnalysis {
    pub verdict: Verdict,
    /// `max − min` over the trailing window.
    pub diameter: f64,
    /// The same over the window before it.
    pub previous_diameter: f64,
    pub trailing_mean: f64,
}

fn diameter(w: &[f64]) -> f64 {
    let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    hi - lo
}

fn peak(w: &[f64]) -> f64 {
    w.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Whether `f` over the trailing windows keeps rising: three consecutive
/// increases adding up to more than 1.5x, or a single 1.5x jump when only
/// two windows fit.
fn rising(series: &[f64], window: usize, f: fn(&[f64]) -> f64) -> bool {
    let n = series.len();
    let count = (n / window).min(4);
    let vals: alloc::vec::Vec<f64> = (0..count)
        .rev()
        .map(|k| f(&series[n - (k + 1) * window..n - k * window]))
        .collect();
    let monotone = vals.windows(2).all(|p| p[1] > p[0]);
    monotone && vals[count - 1] > 1.5 * vals[0]
}

/// Classifies the tail of a scalar series.
///
/// Non-finite values or a trailing magnitude above the divergence guard mean
/// divergence. A trailing diameter below `conv_tol` is convergence. Peak
/// magnitudes or diameters that keep growing window over window are also
/// divergence. Otherwise a diameter above `cycle_tol` is a cycle unless it
/// is still halving window over window.
pub fn detect_limit_cycle(
    series: &[f64],
    window: usize,
    cycle_tol: f64,
    conv_tol: f64,
) -> Result<CycleAnalysis, AnalysisError> {
    if window == 0 {
        return Err(AnalysisError::Invalid("window must be positive"));
    }
    if series.len() < 2 * window {
        return Err(AnalysisError::Dimension {
            expected: 2 * window,
            found: series.len(),
        });
    }
    let n = series.len();
    let last = &series[n - window..];
    let prev = &series[n - 2 * window..n - window];
    let d = diameter(last);
    let pd = diameter(prev);
    let mean = last.iter().sum::<f64>() / window as f64;
    let verdict = if !last.iter().all(|x| x.is_finite()) || peak(last) > DIVERGENCE_GUARD || !d.is_finite() {
        Verdict::Diverged
    } else if d < conv_tol {
        Verdict::Converged
    } else if rising(series, window, peak) || rising(series, window, diameter) {
        Verdict::Diverged
    } else if d > cycle_tol && d >= 0.5 * pd {
        Verdict::Cycling
    } else {
        Verdict::Undetermined
    };
    Ok(CycleAnalysis {
        verdict,
        diameter: d,
        previous_diameter: pd,
        trailing_mean: mean,
    })
}

/// Runs [`detect_limit_cycle`] on each coordinate and reports the most severe
/// verdict together with its statistics.
pub fn detect_limit_cycle_multi<S: AsRef<[f64]>>(
    series: &[S],
    thresholds: &CycleThresholds,
) -> Result<CycleAnalysis, AnalysisError> {
    let mut worst: Option<CycleAnalysis> = None;
    for s in series {
        let s = s.as_ref();
        let a = detect_limit_cycle(
            s,
            thresholds.window_for(s.len()),
            thresholds.cycle_tol,
            thresholds.conv_tol,
        )?;
        worst = match worst {
            Some(w) if (w.verdict.severity(), w.diameter) >= (a.verdict.severity(), a.diameter) => Some(w),
            _ => Some(a),
        };
    }
    worst.ok_or(AnalysisError::Invalid("no series given"))
}
