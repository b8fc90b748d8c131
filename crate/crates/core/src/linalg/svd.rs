//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations, and
//! the quantities the convergence analysis derives from it.

use alloc::vec;
use alloc::vec::Vec;

use super::vector::{self, Vector};
use super::{LinalgError, Matrix};

/// Rotation threshold on the cosine between two working columns.
const ROTATION_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

/// Thin SVD: `a = left · diag(singular_values) · rightᵀ`.
///
/// For an `m × n` input with `k = min(m, n)`, `left` is `m × k` and `right` is
/// `n × k`; both have orthonormal columns, singular values are descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub left: Matrix,
    pub singular_values: Vec<f64>,
    pub right: Matrix,
}

impl Svd {
    /// Singular values below this are treated as zero (`max(m, n) · ε · σ_max`).
    pub fn cutoff(&self) -> f64 {
        let dim = self.left.rows().max(self.right.rows()) as f64;
        dim * f64::EPSILON * self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        let cutoff = self.cutoff();
        self.singular_values.iter().filter(|s| **s > cutoff).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let m = self.left.rows();
        let n = self.right.rows();
        let mut out = Matrix::zeros(m, n);
        for (j, s) in self.singular_values.iter().enumerate() {
            for r in 0..m {
                let lr = self.left[(r, j)] * s;
                for c in 0..n {
                    out[(r, c)] += lr * self.right[(c, j)];
                }
            }
        }
        out
    }
}

pub fn svd(a: &Matrix) -> Result<Svd, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd {
            left: t.right,
            singular_values: t.singular_values,
            right: t.left,
        });
    }
    let m = a.rows();
    let n = a.cols();

    // Column-major working copies.
    let mut u: Vec<Vector> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<Vector> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();

    let mut converged = n < 2;
    let mut worst = 0.0;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        worst = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = vector::norm_sq(&u[p]);
                let beta = vector::norm_sq(&u[q]);
                let gamma = vector::dot(&u[p], &u[q]);
                let denom = libm::sqrt(alpha * beta);
                if denom == 0.0 || gamma == 0.0 {
                    continue;
                }
                let cosine = libm::fabs(gamma) / denom;
                worst = worst.max(cosine);
                if cosine <= ROTATION_TOL {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut u, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            sweeps: MAX_SWEEPS,
            off_diagonal: worst,
        });
    }

    let mut order: Vec<(f64, usize)> = u.iter().map(|col| (vector::norm(col), 0)).collect();
    for (i, o) in order.iter_mut().enumerate() {
        o.1 = i;
    }
    order.sort_by(|x, y| y.0.total_cmp(&x.0));

    let sigma_max = order.first().map_or(0.0, |o| o.0);
    let cutoff = m.max(n) as f64 * f64::EPSILON * sigma_max;

    let mut left_cols: Vec<Option<Vector>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut right = Matrix::zeros(n, n);
    for (j, (s, idx)) in order.iter().enumerate() {
        singular_values.push(*s);
        for r in 0..n {
            right[(r, j)] = v[*idx][r];
        }
        if *s > cutoff {
            left_cols.push(Some(vector::scale(&u[*idx], 1.0 / s)));
        } else {
            left_cols.push(None);
        }
    }
    let left_cols = complete_orthonormal(m, left_cols);
    let mut left = Matrix::zeros(m, n);
    for (j, col) in left_cols.iter().enumerate() {
        for r in 0..m {
            left[(r, j)] = col[r];
        }
    }
    Ok(Svd {
        left,
        singular_values,
        right,
    })
}

fn rotate(cols: &mut [Vector], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column.
fn complete_orthonormal(m: usize, cols: Vec<Option<Vector>>) -> Vec<Vector> {
    let mut basis: Vec<Vector> = cols.iter().flatten().cloned().collect();
    let mut next_axis = 0;
    cols.into_iter()
        .map(|col| {
            if let Some(c) = col {
                return c;
            }
            loop {
                assert!(next_axis < m, "ran out of axes completing an orthonormal basis");
                let mut e = vec![0.0; m];
                e[next_axis] = 1.0;
                next_axis += 1;
                // Two Gram-Schmidt passes.
                for _ in 0..2 {
                    for b in &basis {
                        let proj = vector::dot(&e, b);
                        vector::axpy(&mut e, -proj, b);
                    }
                }
                let nrm = vector::norm(&e);
                if nrm > 0.5 {
                    let e = vector::scale(&e, 1.0 / nrm);
                    basis.push(e.clone());
                    return e;
                }
            }
        })
        .collect()
}

/// Moore–Penrose pseudoinverse with the `max(m, n) · ε · σ_max` rank cutoff.
pub fn pseudoinverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    let s = svd(a)?;
    let cutoff = s.cutoff();
    let mut out = Matrix::zeros(a.cols(), a.rows());
    for (j, sigma) in s.singular_values.iter().enumerate() {
        if *sigma <= cutoff {
            continue;
        }
        let inv = 1.0 / sigma;
        for r in 0..a.cols() {
            let vr = s.right[(r, j)] * inv;
            for c in 0..a.rows() {
                out[(r, c)] += vr * s.left[(c, j)];
            }
        }
    }
    Ok(out)
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(svd(a)?.singular_values.first().copied().unwrap_or(0.0))
}

/// Orthogonal projection of `v` onto the column space of `a` (`a a⁺ v`).
pub fn project_onto_range(a: &Matrix, v: &[f64]) -> Result<Vector, LinalgError> {
    if v.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "project_onto_range",
            left: (a.rows(), a.cols()),
            right: (v.len(), 1),
        });
    }
    let s = svd(a)?;
    let rank = s.rank();
    let mut out = vec![0.0; v.len()];
    for j in 0..rank {
        let col = s.left.column(j);
        let coef = vector::dot(&col, v);
        vector::axpy(&mut out, coef, &col);
    }
    Ok(out)
}

/// `√(xᵀAAᵀx + yᵀAᵀAy)`: distance of `(x, y)` from the equilibrium set of `xᵀAy`.
pub fn game_norm(a: &Matrix, x: &[f64], y: &[f64]) -> Result<f64, LinalgError> {
    let atx = a.tr_matvec(x)?;
    let ay = a.matvec(y)?;
    Ok(libm::sqrt(vector::norm_sq(&atx) + vector::norm_sq(&ay)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::{random_matrix, random_rank_matrix, TestRng};

    fn assert_orthonormal_columns(m: &Matrix, tol: f64) {
        let g = m.transpose().matmul(m).unwrap();
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(libm::fabs(g[(i, j)] - target) < tol, "gram[{i},{j}] = {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn identity_singular_values() {
        let s = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_absolute_values() {
        let s = svd(&Matrix::from_diag(&[3.0, -4.0])).unwrap();
        assert_eq!(s.singular_values, vec![4.0, 3.0]);
        assert!(s.reconstruct().sub(&Matrix::from_diag(&[3.0, -4.0])).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn random_6x4_reconstructs() {
        let mut rng = TestRng::new(11);
        let a = random_matrix(&mut rng, 6, 4);
        let s = svd(&a).unwrap();
        let resid = s.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(resid < 1e-10 * a.frobenius_norm(), "residual {resid}");
        assert_orthonormal_columns(&s.left, 1e-10);
        assert_orthonormal_columns(&s.right, 1e-10);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wide_and_rank_deficient_inputs() {
        let mut rng = TestRng::new(5);
        for (m, n, r) in [(3, 7, 2), (7, 3, 1), (5, 5, 0), (4, 6, 4)] {
            let a = random_rank_matrix(&mut rng, m, n, r);
            let s = svd(&a).unwrap();
            assert_eq!(s.left.rows(), m);
            assert_eq!(s.right.rows(), n);
            assert_eq!(s.rank(), r);
            let resid = s.reconstruct().sub(&a).unwrap().frobenius_norm();
            assert!(resid <= 1e-10 * a.frobenius_norm().max(1e-300));
            assert_orthonormal_columns(&s.left, 1e-10);
            assert_orthonormal_columns(&s.right, 1e-10);
        }
    }

    #[test]
    fn empty_and_zero_matrices() {
        let s = svd(&Matrix::zeros(3, 2)).unwrap();
        assert_eq!(s.singular_values, vec![0.0, 0.0]);
        assert_orthonormal_columns(&s.left, 1e-15);
        assert_eq!(spectral_norm(&Matrix::zeros(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn nonfinite_rejected() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let mut bad = a.clone();
        bad.as_mut_slice()[0] = f64::INFINITY;
        assert!(matches!(svd(&bad), Err(LinalgError::NonFinite)));
    }

    #[test]
    fn pseudoinverse_examples() {
        let p = pseudoinverse(&Matrix::from_diag(&[2.0, 0.0])).unwrap();
        assert_eq!(p.to_rows(), vec![vec![0.5, 0.0], vec![0.0, 0.0]]);

        let a = Matrix::from_rows(&[[4.0, 7.0], [2.0, 6.0]]).unwrap();
        let inv = Matrix::from_rows(&[[0.6, -0.7], [-0.2, 0.4]]).unwrap();
        assert!(pseudoinverse(&a).unwrap().sub(&inv).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn pseudoinverse_rank_two_4x4() {
        let mut rng = TestRng::new(99);
        let a = random_rank_matrix(&mut rng, 4, 4, 2);
        let x = pseudoinverse(&a).unwrap();
        let scale = a.frobenius_norm();
        let axa = a.matmul(&x).unwrap().matmul(&a).unwrap();
        let xax = x.matmul(&a).unwrap().matmul(&x).unwrap();
        let ax = a.matmul(&x).unwrap();
        let xa = x.matmul(&a).unwrap();
        assert!(axa.sub(&a).unwrap().max_abs() < 1e-9 * scale);
        assert!(xax.sub(&x).unwrap().max_abs() < 1e-9 * scale);
        assert!(ax.sub(&ax.transpose()).unwrap().max_abs() < 1e-9 * scale);
        assert!(xa.sub(&xa.transpose()).unwrap().max_abs() < 1e-9 * scale);
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&Matrix::identity(4)).unwrap(), 1.0);
        assert_eq!(spectral_norm(&Matrix::from_diag(&[3.0, -4.0])).unwrap(), 4.0);
        let u = [1.0, 2.0, 2.0];
        let v = [3.0, 4.0];
        let got = spectral_norm(&Matrix::outer(&u, &v)).unwrap();
        assert!(libm::fabs(got - 15.0) < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let v = [3.0, -2.0, 7.0];
        assert_eq!(project_onto_range(&Matrix::identity(3), &v).unwrap(), v.to_vec());
        let p = project_onto_range(&Matrix::from_diag(&[1.0, 0.0]), &[3.0, 5.0]).unwrap();
        assert_eq!(p, vec![3.0, 0.0]);
        assert!(matches!(
            project_onto_range(&Matrix::identity(2), &[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_idempotent() {
        let mut rng = TestRng::new(3);
        let a = random_rank_matrix(&mut rng, 5, 4, 2);
        let v: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let once = project_onto_range(&a, &v).unwrap();
        let twice = project_onto_range(&a, &once).unwrap();
        assert!(vector::distance(&once, &twice) < 1e-10);
    }

    #[test]
    fn game_norm_examples() {
        let g = game_norm(&Matrix::identity(2), &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(libm::fabs(g - libm::sqrt(2.0)) < 1e-15);
        // x in null(Aᵀ), y in null(A)
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(game_norm(&a, &[0.0, 5.0], &[0.0, -2.0]).unwrap(), 0.0);
        assert!(game_norm(&a, &[1.0], &[1.0, 1.0]).is_err());
    }
}
