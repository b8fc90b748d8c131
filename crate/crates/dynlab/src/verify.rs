//! Theorem checks on bilinear instances: random families for the `verify`
//! subcommand, and per-experiment reports.

use dynlab_core::analysis::{
    general_decompose, transform_iterates, verify_claim1, verify_corollary, verify_gd_divergence, verify_lemma1_range,
    verify_theorem, CheckRecord, ConvergenceParams, VerificationReport,
};
use dynlab_core::dynamics::{omd_bilinear_init, omd_general_init, run_dynamics, simulate_bilinear_omd, DynamicsError};
use dynlab_core::games::{AnyGame, BilinearGame, GaussianSampler};
use dynlab_core::linalg::{project_onto_range, spectral_norm, vector, Matrix};
use dynlab_core::optim::{OptimizerKind, PredictorKind};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::experiment::{initial_points, run_config};
use crate::Error;

/// A random family of homogeneous instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub instances: usize,
    pub seed: u64,
    pub max_rows: usize,
    pub max_cols: usize,
    /// Iterations checked for the theorem and corollary.
    pub steps: usize,
    /// Iterations checked for the exact one-step identity.
    pub identity_steps: usize,
    pub max_level: usize,
    /// Step size as a fraction of the admissible bound `1/(3γ²)`.
    pub eta_fraction: f64,
    /// Upper cap on the step size.
    pub eta_cap: f64,
    /// Explicit instances, checked after the random family.
    pub specified: Vec<SpecifiedInstance>,
}

/// A hand-written instance. The start must lie in the range spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecifiedInstance {
    pub a: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub eta: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            instances: 50,
            seed: 0,
            max_rows: 8,
            max_cols: 6,
            steps: 500,
            identity_steps: 40,
            max_level: 3,
            eta_fraction: 0.9,
            eta_cap: 0.1,
            specified: Vec::new(),
        }
    }
}

/// One instance, already scaled and with a range-space start.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: Matrix,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub eta: f64,
}

fn gaussian_matrix(rng: &mut GaussianSampler, m: usize, n: usize) -> Matrix {
    Matrix::new(m, n, (0..m * n).map(|_| rng.standard_normal()).collect()).expect("shape")
}

fn below(rng: &mut GaussianSampler, n: usize) -> usize {
    ((rng.uniform() * n as f64) as usize).min(n - 1)
}

/// Instance `k` of the family: shape and rank uniform, `‖A‖` uniform in
/// `[0.5, 1]`, `η = min(fraction/(3γ²), cap)`.
pub fn random_instance(opts: &VerifyOptions, k: usize) -> Result<Instance, Error> {
    let mut rng = GaussianSampler::standard(opts.seed.wrapping_add(k as u64), 1);
    let m = 1 + below(&mut rng, opts.max_rows);
    let n = 1 + below(&mut rng, opts.max_cols);
    let r = 1 + below(&mut rng, m.min(n));
    let raw = gaussian_matrix(&mut rng, m, r)
        .matmul(&gaussian_matrix(&mut rng, r, n))
        .expect("shape");
    let target = 0.5 + 0.5 * rng.uniform();
    let a = raw.scale(target / spectral_norm(&raw).map_err(dynlab_core::analysis::AnalysisError::from)?);
    let bound = ConvergenceParams::new(&a, 1.0)?.eta_bound();
    let eta = (opts.eta_fraction * bound).min(opts.eta_cap);
    let xr: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
    let yr: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let x0 = project_onto_range(&a, &xr).map_err(dynlab_core::analysis::AnalysisError::from)?;
    let y0 = project_onto_range(&a.transpose(), &yr).map_err(dynlab_core::analysis::AnalysisError::from)?;
    Ok(Instance { a, x0, y0, eta })
}

/// The inner-product identities, the one-step identity, the theorem with its lemmas, and the
/// corollary on one instance.
pub fn verify_instance(inst: &Instance, opts: &VerifyOptions, label: &str) -> Result<VerificationReport, Error> {
    let steps = opts.steps.max(opts.identity_steps);
    let traj = simulate_bilinear_omd(omd_bilinear_init(&inst.a, &inst.x0, &inst.y0, inst.eta)?, steps)?;
    let params = ConvergenceParams::new(&inst.a, inst.eta)?;
    let mut report = VerificationReport::new(format!(
        "{label}: {}x{} eta={:e} gamma={:e} lambda_inf={:e}",
        inst.a.rows(),
        inst.a.cols(),
        inst.eta,
        params.gamma,
        params.lambda_inf
    ));
    for i in 0..=opts.max_level {
        report.extend(verify_claim1(&inst.a, &inst.x0, &inst.y0, i)?);
    }
    report.extend(verify_lemma1_range(&traj, opts.identity_steps, opts.max_level)?);
    report.extend(verify_theorem(&traj, &params, opts.steps, opts.max_level)?);
    let mut corollary = verify_corollary(&traj, &params)?;
    // The tail comparison is only meaningful once the transient has decayed.
    corollary.checks.retain(|c| c.name != "corollary_tail");
    corollary.precondition_violations.clear();
    report.extend(corollary);
    Ok(report)
}

fn verify_specified(s: &SpecifiedInstance, opts: &VerifyOptions, label: &str) -> Result<VerificationReport, Error> {
    let a = Matrix::from_rows(&s.a).map_err(dynlab_core::analysis::AnalysisError::from)?;
    match omd_bilinear_init(&a, &s.x0, &s.y0, s.eta) {
        Ok(_) => {}
        Err(DynamicsError::NotInRange { which, residual }) => {
            let mut r = VerificationReport::new(label);
            r.precondition_violations
                .push(format!("{which} is not in the range space, residual {residual:e}"));
            return Ok(r);
        }
        Err(e) => return Err(e.into()),
    }
    let inst = Instance {
        a,
        x0: s.x0.clone(),
        y0: s.y0.clone(),
        eta: s.eta,
    };
    verify_instance(&inst, opts, label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub options: VerifyOptions,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    /// One line per failing instance: its worst check or its violated
    /// preconditions.
    pub failing: Vec<String>,
    pub reports: Vec<VerificationReport>,
}

pub fn verify_family(opts: &VerifyOptions) -> Result<VerifySummary, Error> {
    let mut reports = Vec::with_capacity(opts.instances);
    for k in 0..opts.instances {
        let inst = random_instance(opts, k)?;
        reports.push(verify_instance(&inst, opts, &format!("instance {k}"))?);
    }
    for (k, s) in opts.specified.iter().enumerate() {
        reports.push(verify_specified(s, opts, &format!("specified {k}"))?);
    }
    let checks = reports.iter().map(|r| r.checks.len()).sum();
    let failures = reports.iter().map(|r| r.failures().count()).sum();
    let failing = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| {
            let worst = r
                .failures()
                .max_by(|a, b| (a.residual - a.tolerance).total_cmp(&(b.residual - b.tolerance)));
            match worst {
                Some(c) => format!(
                    "{}: {} t={:?} i={:?} residual {:e} > tolerance {:e}",
                    r.instance, c.name, c.t, c.i, c.residual, c.tolerance
                ),
                None => format!("{}: {}", r.instance, r.precondition_violations.join("; ")),
            }
        })
        .collect();
    Ok(VerifySummary {
        options: opts.clone(),
        passed: reports.iter().all(|r| r.passed()),
        checks,
        failures,
        failing,
        reports,
    })
}

fn is_omd_v1(k: &OptimizerKind) -> bool {
    matches!(
        k,
        OptimizerKind::Omd {
            predictor: PredictorKind::LastGradient
        }
    )
}

fn exact_and_simultaneous(cfg: &ExperimentConfig) -> bool {
    cfg.batch_size == 0 && cfg.schedule == 1 && cfg.gen.hyper.lr == cfg.disc.hyper.lr
}

/// Reports that apply to this experiment, keyed by file name:
///
/// - bilinear game, OMD on both sides: the theorem suite on the exact
///   recursion started from run 0's initial point (after recentering on
///   `(−b₃, −c₃)` and removing the linear drift)
/// - homogeneous `xᵀy`, gradient descent on both sides: the growth check
pub fn experiment_reports(cfg: &ExperimentConfig, game: &AnyGame) -> Result<Vec<(String, VerificationReport)>, Error> {
    let AnyGame::Bilinear(g) = game else {
        return Ok(Vec::new());
    };
    if !exact_and_simultaneous(cfg) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let (x0, y0) = initial_points(cfg, game, 0);
    for (li, lr) in cfg.learning_rates().into_iter().enumerate() {
        let name = format!("verification_lr{li}.json");
        if is_omd_v1(&cfg.gen.kind) && is_omd_v1(&cfg.disc.kind) {
            out.push((name, bilinear_omd_report(g, &x0, &y0, lr, cfg.iterations)?));
        } else if matches!(cfg.gen.kind, OptimizerKind::Gd)
            && matches!(cfg.disc.kind, OptimizerKind::Gd)
            && g.is_homogeneous()
            && g.a().is_square()
            && g.a()
                .sub(&Matrix::identity(g.a().rows()))
                .map(|d| d.max_abs() == 0.0)
                .unwrap_or(false)
        {
            let mut rc = run_config(cfg, Some(lr), 0)?;
            rc.record_every = 1;
            rc.record_substeps = false;
            let traj = run_dynamics(g, x0.clone(), y0.clone(), &rc)?;
            out.push((name, verify_gd_divergence(&traj, lr)?));
        }
    }
    Ok(out)
}

/// Theorem suite for OMD on a (possibly inhomogeneous) bilinear game.
pub fn bilinear_omd_report(
    g: &BilinearGame,
    x0: &[f64],
    y0: &[f64],
    eta: f64,
    steps: usize,
) -> Result<VerificationReport, Error> {
    let a = g.a().clone();
    let params = ConvergenceParams::new(&a, eta)?;
    let label = format!("bilinear {}x{} eta={eta}", a.rows(), a.cols());
    let state = match omd_general_init(g, x0, y0, eta) {
        Ok(s) => s,
        Err(DynamicsError::NotInRange { which, residual }) => {
            let mut r = VerificationReport::new(label);
            r.precondition_violations.push(format!(
                "{which} (after recentering) is not in the range space, residual {residual:e}; the theorem does not apply"
            ));
            return Ok(r);
        }
        Err(e) => return Err(e.into()),
    };
    let traj = simulate_bilinear_omd(state, steps)?;
    let dec = general_decompose(&a, g.b(), g.c())?;
    let shifted = transform_iterates(&traj, &dec, eta)?;
    let mut report = VerificationReport::new(label);
    let scale = vector::norm(shifted.alpha(0))
        .max(vector::norm(shifted.beta(0)))
        .max(1.0);
    for (t, r) in shifted.homogeneous_residuals(&a, eta)?.into_iter().enumerate() {
        report.push(CheckRecord::at_most(
            "transformed_recursion",
            Some(t),
            None,
            r,
            0.0,
            1e-10 * scale,
        ));
    }
    let homogeneous = simulate_bilinear_omd(omd_bilinear_init(&a, shifted.alpha(0), shifted.beta(0), eta)?, steps)?;
    report.extend(verify_theorem(&homogeneous, &params, steps, 3)?);
    report.extend(verify_corollary(&homogeneous, &params)?);
    Ok(report)
}
