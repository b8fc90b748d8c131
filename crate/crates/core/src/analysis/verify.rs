use alloc::format;
use alloc::vec::Vec;

use super::ladder::{delta_ladder, inner_m, inner_n, m_image, n_image, ConvergenceParams};
use super::report::{CheckRecord, VerificationReport};
use super::AnalysisError;
use crate::dynamics::{BilinearTrajectory, Trajectory};
use crate::linalg::{vector, Matrix};

/// `Δᵗⁱ` for `t ≥ −2` and `i ≤ levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLadder {
    levels: usize,
    rows: Vec<Vec<f64>>,
}

impl DeltaLadder {
    pub fn new(traj: &BilinearTrajectory, levels: usize) -> Result<Self, AnalysisError> {
        let last = traj.last_t() as isize;
        let rows = (-2..=last)
            .map(|t| delta_ladder(&traj.a, traj.x(t), traj.y(t), levels))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DeltaLadder { levels, rows })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn last_t(&self) -> usize {
        self.rows.len() - 3
    }

    pub fn get(&self, t: isize, i: usize) -> f64 {
        self.rows[(t + 2) as usize][i]
    }

    /// `Δᵗ⁰` for `t = 0 ..= last_t`.
    pub fn level0(&self) -> Vec<f64> {
        self.rows[2..].iter().map(|r| r[0]).collect()
    }
}

/// `|lhs − rhs|` and the Cauchy–Schwarz scale `‖X p‖‖X q‖` for one side.
fn product_scale(a: &[f64], b: &[f64]) -> f64 {
    vector::norm(a) * vector::norm(b)
}

/// The three inner-product transfers across the `M`/`N` ladder, with
/// `u` in the x-space (length `rows(A)`) and `v` in the y-space:
///
/// - `⟨Av, AAᵀu⟩_{M_i} = ⟨v, Aᵀu⟩_{N_{i+1}}`
/// - `⟨Aᵀu, AᵀAv⟩_{N_i} = ⟨u, Av⟩_{M_{i+1}}`
/// - `⟨u, Av⟩_{M_i} = ⟨v, Aᵀu⟩_{N_i}`
pub fn verify_claim1(a: &Matrix, u: &[f64], v: &[f64], i: usize) -> Result<VerificationReport, AnalysisError> {
    if u.len() != a.rows() {
        return Err(AnalysisError::Dimension {
            expected: a.rows(),
            found: u.len(),
        });
    }
    if v.len() != a.cols() {
        return Err(AnalysisError::Dimension {
            expected: a.cols(),
            found: v.len(),
        });
    }
    let av = a.matvec(v)?;
    let atu = a.tr_matvec(u)?;
    let mut report = VerificationReport::new(format!("claim1 {}x{} i={}", a.rows(), a.cols(), i));
    let pairs: [(&str, (&[f64], &[f64], bool), (&[f64], &[f64], bool, usize)); 3] = [
        ("claim1_m_to_n", (&av, &a.matvec(&atu)?, true), (v, &atu, false, i + 1)),
        (
            "claim1_n_to_m",
            (&atu, &a.tr_matvec(&av)?, false),
            (u, &av, true, i + 1),
        ),
        ("claim1_cross", (u, &av, true), (v, &atu, false, i)),
    ];
    for (name, (p, q, lhs_m), (r, s, rhs_m, rhs_level)) in pairs {
        let (lp, lq) = if lhs_m {
            (m_image(a, p, i)?, m_image(a, q, i)?)
        } else {
            (n_image(a, p, i)?, n_image(a, q, i)?)
        };
        let (rp, rq) = if rhs_m {
            (m_image(a, r, rhs_level)?, m_image(a, s, rhs_level)?)
        } else {
            (n_image(a, r, rhs_level)?, n_image(a, s, rhs_level)?)
        };
        let scale = product_scale(&lp, &lq).max(product_scale(&rp, &rq));
        report.push(CheckRecord::equality(
            name,
            None,
            Some(i),
            vector::dot(&lp, &lq),
            vector::dot(&rp, &rq),
            1e-10 * scale,
        ));
    }
    Ok(report)
}

/// Both sides of the exact one-step identity for `Δᵗⁱ − Δᵗ⁻¹ⁱ`.
pub fn lemma1_sides(traj: &BilinearTrajectory, i: usize, t: usize) -> Result<(f64, f64), AnalysisError> {
    if t < 2 {
        return Err(AnalysisError::Invalid("the identity needs t >= 2"));
    }
    if t > traj.last_t() {
        return Err(AnalysisError::Invalid("t is past the end of the trajectory"));
    }
    let (a, eta) = (&traj.a, traj.eta);
    let t = t as isize;
    let d =
        |s: isize, level: usize| -> Result<f64, AnalysisError> { super::ladder::delta(a, traj.x(s), traj.y(s), level) };
    let lhs = d(t, i)? - d(t - 1, i)?;
    // Iterates before −2 never enter: t ≥ 2 keeps t − 4 ≥ −2.
    let ay = a.matvec(traj.y(t - 4))?;
    let atx = a.tr_matvec(traj.x(t - 4))?;
    let cross = inner_m(a, traj.x(t - 2), &ay, i + 1)? - inner_n(a, traj.y(t - 2), &atx, i + 1)?;
    let rhs = 4.0 * eta * eta * d(t - 1, i + 1)? - 5.0 * eta * eta * d(t - 2, i + 1)? - 2.0 * eta * eta * eta * cross;
    Ok((lhs, rhs))
}

/// Absolute residual of the one-step identity at `(i, t)`.
pub fn verify_lemma1(traj: &BilinearTrajectory, i: usize, t: usize) -> Result<f64, AnalysisError> {
    let (lhs, rhs) = lemma1_sides(traj, i, t)?;
    Ok((lhs - rhs).abs())
}

/// The identity for every `2 ≤ t ≤ max_t`, `i ≤ max_i`, tolerance `1e−10·Δ₀⁰`.
pub fn verify_lemma1_range(
    traj: &BilinearTrajectory,
    max_t: usize,
    max_i: usize,
) -> Result<VerificationReport, AnalysisError> {
    let max_t = max_t.min(traj.last_t());
    let d00 = super::ladder::delta(&traj.a, traj.x(0), traj.y(0), 0)?;
    let mut report = VerificationReport::new(format!("lemma1 t<={max_t} i<={max_i}"));
    for t in 2..=max_t {
        for i in 0..=max_i {
            let (lhs, rhs) = lemma1_sides(traj, i, t)?;
            report.push(CheckRecord::equality("lemma1", Some(t), Some(i), lhs, rhs, 1e-10 * d00));
        }
    }
    Ok(report)
}

fn precondition_report(
    instance: alloc::string::String,
    params: &ConvergenceParams,
    traj: &BilinearTrajectory,
) -> VerificationReport {
    let mut report = VerificationReport::new(instance);
    report.precondition_violations = params.violations();
    if params.eta != traj.eta {
        report.precondition_violations.push(format!(
            "params eta {} differs from trajectory eta {}",
            params.eta, traj.eta
        ));
    }
    report
}

/// Theorem inequalities per level together with the supporting lemmas:
///
/// - `Δ₁ⁱ = Δ₀ⁱ` and `Δ₂ⁱ ≤ (1+η)²Δ₀ⁱ`
/// - `H(i,t)`: `Δᵗⁱ ≤ (1−η²/γ²)Δᵗ⁻¹ⁱ + 16η³Δ₀⁰` for `t ≥ 3`
/// - the bound `Δᵗⁱ − Δᵗ⁻¹ⁱ ≤ 4η²Δᵗ⁻¹ⁱ⁺¹ − 5η²Δᵗ⁻²ⁱ⁺¹ + η³(Δᵗ⁻²ⁱ⁺¹ + Δᵗ⁻⁴ⁱ⁺¹)` for `t ≥ 2`
/// - `Δᵗⁱ⁺¹ ≤ Δᵗⁱ` and `Δᵗⁱ⁺² ≥ Δᵗⁱ/γ²`
///
/// All with slack `1e−9·Δ₀⁰`. Violated hypotheses are reported and no
/// checks are run.
pub fn verify_theorem(
    traj: &BilinearTrajectory,
    params: &ConvergenceParams,
    max_t: usize,
    max_i: usize,
) -> Result<VerificationReport, AnalysisError> {
    let max_t = max_t.min(traj.last_t());
    let mut report = precondition_report(
        format!("theorem t<={max_t} i<={max_i} eta={}", params.eta),
        params,
        traj,
    );
    if !report.precondition_violations.is_empty() {
        return Ok(report);
    }
    let ladder = DeltaLadder::new(traj, max_i + 2)?;
    let eta = params.eta;
    let d00 = ladder.get(0, 0);
    let slack = 1e-9 * d00;
    let rate = params.contraction();
    let g2 = params.gamma * params.gamma;
    for i in 0..=max_i {
        if max_t >= 1 {
            report.push(CheckRecord::equality(
                "first_step",
                Some(1),
                Some(i),
                ladder.get(1, i),
                ladder.get(0, i),
                slack,
            ));
        }
        if max_t >= 2 {
            let bound = (1.0 + eta) * (1.0 + eta) * ladder.get(0, i);
            report.push(CheckRecord::at_most(
                "second_step",
                Some(2),
                Some(i),
                ladder.get(2, i),
                bound,
                slack,
            ));
        }
        for t in 3..=max_t as isize {
            let bound = rate * ladder.get(t - 1, i) + 16.0 * eta * eta * eta * d00;
            report.push(CheckRecord::at_most(
                "h",
                Some(t as usize),
                Some(i),
                ladder.get(t, i),
                bound,
                slack,
            ));
        }
        for t in 2..=max_t as isize {
            let lhs = ladder.get(t, i) - ladder.get(t - 1, i);
            let next = |s: isize| ladder.get(s, i + 1);
            let rhs = 4.0 * eta * eta * next(t - 1) - 5.0 * eta * eta * next(t - 2)
                + eta * eta * eta * (next(t - 2) + next(t - 4));
            report.push(CheckRecord::at_most(
                "lemma3",
                Some(t as usize),
                Some(i),
                lhs,
                rhs,
                slack,
            ));
        }
        for t in 0..=max_t as isize {
            report.push(CheckRecord::at_most(
                "lemma4",
                Some(t as usize),
                Some(i),
                ladder.get(t, i + 1),
                ladder.get(t, i),
                slack,
            ));
            report.push(CheckRecord::at_least(
                "lemma5",
                Some(t as usize),
                Some(i),
                ladder.get(t, i + 2),
                ladder.get(t, i) / g2,
                slack,
            ));
        }
    }
    Ok(report)
}

/// `Δᵗ⁰ ≤ (1−η²/γ²)ᵗ⁻²(1+η)²Δ₀⁰ + 16ηγ²Δ₀⁰` for every `t ≥ 2`, plus a
/// `corollary_tail` record comparing the final value against `16ηγ²Δ₀⁰`.
pub fn verify_corollary(
    traj: &BilinearTrajectory,
    params: &ConvergenceParams,
) -> Result<VerificationReport, AnalysisError> {
    let mut report = precondition_report(
        format!("corollary T={} eta={}", traj.last_t(), params.eta),
        params,
        traj,
    );
    if !report.precondition_violations.is_empty() {
        return Ok(report);
    }
    let deltas: Vec<f64> = traj
        .xs()
        .iter()
        .zip(traj.ys())
        .map(|(x, y)| super::ladder::delta(&traj.a, x, y, 0))
        .collect::<Result<_, _>>()?;
    let (d00, eta) = (deltas[0], params.eta);
    let floor = 16.0 * eta * params.gamma * params.gamma * d00;
    let head = (1.0 + eta) * (1.0 + eta) * d00;
    let rate = params.contraction();
    let mut decay = 1.0;
    for (t, &d) in deltas.iter().enumerate().skip(2) {
        report.push(CheckRecord::at_most(
            "corollary",
            Some(t),
            Some(0),
            d,
            decay * head + floor,
            1e-9 * d00,
        ));
        decay *= rate;
    }
    if let Some(&last) = deltas.last() {
        report.push(CheckRecord::at_most(
            "corollary_tail",
            Some(deltas.len() - 1),
            Some(0),
            last,
            floor,
            0.01 * floor,
        ));
    }
    Ok(report)
}

/// Gradient descent on `xᵀy`: `d(t) = ‖x_t‖² + ‖y_t‖²` must satisfy
/// `d(t) = (1+η²)d(t−1)` and increase strictly. The trajectory must record
/// every iteration. A zero start is stationary and is reported as a violated
/// hypothesis.
pub fn verify_gd_divergence(traj: &Trajectory, eta: f64) -> Result<VerificationReport, AnalysisError> {
    let rows: Vec<_> = traj.rounds().collect();
    if rows.len() < 2 {
        return Err(AnalysisError::Invalid("trajectory needs at least two rows"));
    }
    let mut report = VerificationReport::new(format!("gd divergence eta={eta} T={}", rows.len() - 1));
    let d: Vec<f64> = rows
        .iter()
        .map(|r| vector::norm_sq(&r.gen) + vector::norm_sq(&r.disc))
        .collect();
    if d[0] == 0.0 {
        report
            .precondition_violations
            .push("zero initialization is stationary".into());
        return Ok(report);
    }
    for (k, w) in rows.windows(2).enumerate() {
        if w[1].iteration != w[0].iteration + 1 {
            return Err(AnalysisError::Invalid("trajectory must record every iteration"));
        }
        let (prev, cur) = (d[k], d[k + 1]);
        let t = w[1].iteration;
        report.push(CheckRecord::equality(
            "gd_growth",
            Some(t),
            None,
            cur,
            (1.0 + eta * eta) * prev,
            1e-12 * cur,
        ));
        report.push(CheckRecord::at_least("gd_increasing", Some(t), None, cur, prev, 0.0));
        // Strict: equality is a failure.
        if let Some(last) = report.checks.last_mut() {
            last.pass = cur > prev;
        }
    }
    Ok(report)
}
