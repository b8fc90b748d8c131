use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::{check_len, Diagnostics, Game, GameError, GaussianSampler};
use crate::linalg::{svd, Matrix, Vector};

/// Learning the covariance of `N(0, Σ)` with generator `G_V(z) = Vz` and
/// quadratic discriminator `D_W(x) = xᵀWx`:
///
/// `L(V, W) = ⟨W, Σ − VVᵀ⟩ − λ‖W‖²_F + λ‖V‖²_F`
///
/// Both players are `d×d` matrices flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGame {
    sigma: Matrix,
    factor: Matrix,
    reg: f64,
    clip: Option<f64>,
}

impl CovarianceGame {
    pub fn new(sigma: Matrix, reg: f64, clip: Option<f64>) -> Result<Self, GameError> {
        if !sigma.is_square() || sigma.rows() == 0 {
            return Err(GameError::Invalid(format!(
                "sigma must be square and nonempty, got {}x{}",
                sigma.rows(),
                sigma.cols()
            )));
        }
        let asym = sigma.asymmetry().unwrap_or(0.0);
        if asym > 1e-12 {
            return Err(GameError::Invalid(format!(
                "sigma is not symmetric (asymmetry {asym:e})"
            )));
        }
        let factor = psd_factor(&sigma)?;
        Self::check_knobs(reg, clip)?;
        Ok(CovarianceGame {
            sigma,
            factor,
            reg,
            clip,
        })
    }

    /// `Σ = UUᵀ` for a given factor `U` (e.g. a Cholesky factor).
    pub fn from_factor(u: Matrix, reg: f64, clip: Option<f64>) -> Result<Self, GameError> {
        if !u.is_square() || u.rows() == 0 {
            return Err(GameError::Invalid("factor must be square and nonempty".to_string()));
        }
        Self::check_knobs(reg, clip)?;
        let mut sigma = u.matmul(&u.transpose())?;
        symmetrize(&mut sigma);
        Ok(CovarianceGame {
            sigma,
            factor: u,
            reg,
            clip,
        })
    }

    fn check_knobs(reg: f64, clip: Option<f64>) -> Result<(), GameError> {
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(GameError::Invalid(format!(
                "regularization must be nonnegative, got {reg}"
            )));
        }
        if let Some(c) = clip {
            if !(c > 0.0 && c.is_finite()) {
                return Err(GameError::Invalid(format!("clip must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    /// The covariance `VVᵀ` reached at the regularized equilibrium `W = λI`:
    /// `Σ − 2λ²I`.
    pub fn regularized_target(&self) -> Matrix {
        let d = self.dim();
        self.sigma
            .sub(&Matrix::identity(d).scale(2.0 * self.reg * self.reg))
            .expect("same shape")
    }

    fn unflatten(&self, what: &'static str, p: &[f64]) -> Result<Matrix, GameError> {
        let d = self.dim();
        check_len(what, p, d * d)?;
        Ok(Matrix::new(d, d, p.to_vec())?)
    }

    /// `‖VVᵀ − Σ‖_F` for a flattened generator.
    pub fn covariance_error(&self, gen: &[f64]) -> Result<f64, GameError> {
        let v = self.unflatten("V", gen)?;
        Ok(v.matmul(&v.transpose())?.sub(&self.sigma)?.frobenius_norm())
    }

    /// Draws `B` generator noise vectors and returns `(1/B) Σ zzᵀ`.
    fn noise_second_moment(&self, batch: usize, noise: &mut GaussianSampler) -> Matrix {
        let d = self.dim();
        let mut z = alloc::vec![0.0; d];
        let mut acc = Matrix::zeros(d, d);
        for _ in 0..batch {
            noise.fill_standard(&mut z);
            add_outer(&mut acc, &z, 1.0);
        }
        acc.scale(1.0 / batch as f64)
    }
}

/// Eigen-factor `Σ = FFᵀ` of a symmetric PSD matrix, rejecting eigenvalues
/// below `−1e−12`.
fn psd_factor(sigma: &Matrix) -> Result<Matrix, GameError> {
    let d = sigma.rows();
    // shifting by ‖Σ‖_F makes the spectrum nonnegative, so singular values are
    // eigenvalues plus the shift and the left vectors are eigenvectors
    let shift = sigma.frobenius_norm();
    let shifted = sigma.add(&Matrix::identity(d).scale(shift))?;
    let dec = svd(&shifted)?;
    let mut factor = Matrix::zeros(d, d);
    for (j, s) in dec.singular_values.iter().enumerate() {
        let lambda = s - shift;
        if lambda < -1e-12 {
            return Err(GameError::Invalid(format!("sigma has negative eigenvalue {lambda:e}")));
        }
        let r = libm::sqrt(lambda.max(0.0));
        for i in 0..d {
            factor[(i, j)] = dec.left[(i, j)] * r;
        }
    }
    Ok(factor)
}

fn symmetrize(m: &mut Matrix) {
    let d = m.rows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn add_outer(acc: &mut Matrix, z: &[f64], s: f64) {
    let d = z.len();
    for i in 0..d {
        for j in 0..d {
            acc[(i, j)] += s * z[i] * z[j];
        }
    }
}

/// `(∂L/∂V, ∂L/∂W) = (−(W + Wᵀ)V + 2λV, Σ − VVᵀ − 2λW)`
pub fn covariance_game_gradients(g: &CovarianceGame, v: &Matrix, w: &Matrix) -> Result<(Matrix, Matrix), GameError> {
    let (vf, wf) = (v.as_slice(), w.as_slice());
    let d = g.dim();
    Ok((
        Matrix::new(d, d, g.gen_gradient(vf, wf)?)?,
        Matrix::new(d, d, g.disc_gradient(vf, wf)?)?,
    ))
}

/// Minibatch estimates without regularization:
/// `est_V = −(W + Wᵀ)V·mean(zzᵀ)`, `est_W = mean(xxᵀ) − V·mean(zzᵀ)·Vᵀ`.
pub fn covariance_stochastic_gradients(
    x_batch: &[Vector],
    z_batch: &[Vector],
    v: &Matrix,
    w: &Matrix,
) -> Result<(Matrix, Matrix), GameError> {
    if x_batch.is_empty() || z_batch.is_empty() {
        return Err(GameError::EmptyBatch);
    }
    let d = v.rows();
    let mut xx = Matrix::zeros(d, d);
    for x in x_batch {
        check_len("x", x, d)?;
        add_outer(&mut xx, x, 1.0 / x_batch.len() as f64);
    }
    let mut zz = Matrix::zeros(d, d);
    for z in z_batch {
        check_len("z", z, d)?;
        add_outer(&mut zz, z, 1.0 / z_batch.len() as f64);
    }
    let vzz = v.matmul(&zz)?;
    let est_w = xx.sub(&vzz.matmul(&v.transpose())?)?;
    let est_v = w.add(&w.transpose())?.matmul(&vzz)?.scale(-1.0);
    Ok((est_v, est_w))
}

impl Game for CovarianceGame {
    fn name(&self) -> &'static str {
        "covariance"
    }

    fn gen_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    fn disc_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    fn loss(&self, gen: &[f64], disc: &[f64]) -> Result<f64, GameError> {
        let v = self.unflatten("V", gen)?;
        let w = self.unflatten("W", disc)?;
        let gap = self.sigma.sub(&v.matmul(&v.transpose())?)?;
        let inner: f64 = w.as_slice().iter().zip(gap.as_slice()).map(|(a, b)| a * b).sum();
        let wn = w.frobenius_norm();
        let vn = v.frobenius_norm();
        Ok(inner - self.reg * wn * wn + self.reg * vn * vn)
    }

    fn gen_gradient(&self, gen: &[f64], disc: &[f64]) -> Result<Vector, GameError> {
        let v = self.unflatten("V", gen)?;
        let w = self.unflatten("W", disc)?;
        let g = w
            .add(&w.transpose())?
            .matmul(&v)?
            .scale(-1.0)
            .add(&v.scale(2.0 * self.reg))?;
        Ok(g.into_vec())
    }

    fn disc_gradient(&self, gen: &[f64], disc: &[f64]) -> Result<Vector, GameError> {
        let v = self.unflatten("V", gen)?;
        let w = self.unflatten("W", disc)?;
        let g = self
            .sigma
            .sub(&v.matmul(&v.transpose())?)?
            .sub(&w.scale(2.0 * self.reg))?;
        Ok(g.into_vec())
    }

    /// Data batch `x = Fz'` first, then the generator noise batch.
    fn stochastic_disc_gradient(
        &self,
        gen: &[f64],
        disc: &[f64],
        batch: usize,
        noise: &mut GaussianSampler,
    ) -> Result<Vector, GameError> {
        if batch == 0 {
            return Err(GameError::EmptyBatch);
        }
        let v = self.unflatten("V", gen)?;
        let w = self.unflatten("W", disc)?;
        let d = self.dim();
        let mut zp = alloc::vec![0.0; d];
        let xs: Vec<Vector> = (0..batch)
            .map(|_| {
                noise.fill_standard(&mut zp);
                self.factor.matvec(&zp).expect("square factor")
            })
            .collect();
        let zz = self.noise_second_moment(batch, noise);
        let mut xx = Matrix::zeros(d, d);
        for x in &xs {
            add_outer(&mut xx, x, 1.0 / batch as f64);
        }
        let g = xx
            .sub(&v.matmul(&zz)?.matmul(&v.transpose())?)?
            .sub(&w.scale(2.0 * self.reg))?;
        Ok(g.into_vec())
    }

    fn stochastic_gen_gradient(
        &self,
        gen: &[f64],
        disc: &[f64],
        batch: usize,
        noise: &mut GaussianSampler,
    ) -> Result<Vector, GameError> {
        if batch == 0 {
            return Err(GameError::EmptyBatch);
        }
        let v = self.unflatten("V", gen)?;
        let w = self.unflatten("W", disc)?;
        let zz = self.noise_second_moment(batch, noise);
        let g = w
            .add(&w.transpose())?
            .matmul(&v)?
            .matmul(&zz)?
            .scale(-1.0)
            .add(&v.scale(2.0 * self.reg))?;
        Ok(g.into_vec())
    }

    fn disc_clip(&self) -> Option<f64> {
        self.clip
    }

    fn diagnostics(&self, gen: &[f64], disc: &[f64]) -> Result<Diagnostics, GameError> {
        Ok(Diagnostics {
            loss: self.loss(gen, disc)?,
            distance: Some(self.covariance_error(gen)?),
            ..Default::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::fd;
    use crate::linalg::testutil::{random_matrix, TestRng};
    use alloc::vec;

    #[test]
    fn equilibrium_fixed_point() {
        let g = CovarianceGame::new(Matrix::identity(2), 0.0, None).unwrap();
        let (gv, gw) = covariance_game_gradients(&g, &Matrix::identity(2), &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(gv.max_abs(), 0.0);
        assert_eq!(gw.max_abs(), 0.0);
    }

    #[test]
    fn scalar_example() {
        // σ² = 4, V = 1, W = 0.5: ∂L/∂W = 3, ∂L/∂V = −1 (the generator descends,
        // so V moves up by η, the same move as ascending on +1)
        let g = CovarianceGame::new(Matrix::from_diag(&[4.0]), 0.0, None).unwrap();
        let (gv, gw) = covariance_game_gradients(&g, &Matrix::from_diag(&[1.0]), &Matrix::from_diag(&[0.5])).unwrap();
        assert_eq!(gw.as_slice(), &[3.0]);
        assert_eq!(gv.as_slice(), &[-1.0]);
    }

    #[test]
    fn finite_differences() {
        let mut rng = TestRng::new(33);
        for reg in [0.0, 0.3] {
            let u = random_matrix(&mut rng, 3, 3);
            let g = CovarianceGame::from_factor(u, reg, None).unwrap();
            for _ in 0..20 {
                let (v, w) = (rng.vector(9), rng.vector(9));
                let gv = g.gen_gradient(&v, &w).unwrap();
                let gw = g.disc_gradient(&v, &w).unwrap();
                fd::assert_close(&gv, &fd::gradient(|p| g.loss(p, &w).unwrap(), &v, 1e-5), 1e-6);
                fd::assert_close(&gw, &fd::gradient(|p| g.loss(&v, p).unwrap(), &w, 1e-5), 1e-6);
            }
        }
    }

    #[test]
    fn regularized_equilibrium() {
        let u = Matrix::from_rows(&[[1.0, 0.0], [0.5, 1.0]]).unwrap();
        let g = CovarianceGame::from_factor(u, 0.3, None).unwrap();
        let target = g.regularized_target();
        let v = psd_factor(&target).unwrap();
        let w = Matrix::identity(2).scale(0.3);
        let (gv, gw) = covariance_game_gradients(&g, &v, &w).unwrap();
        assert!(gv.max_abs() < 1e-12 && gw.max_abs() < 1e-12);
    }

    #[test]
    fn stochastic_examples() {
        let (v, w) = (Matrix::identity(2), Matrix::zeros(2, 2));
        let (_, est_w) = covariance_stochastic_gradients(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]], &v, &w).unwrap();
        assert_eq!(est_w.to_rows(), vec![vec![1.0, 0.0], vec![0.0, -1.0]]);

        let xs = vec![vec![0.3, -1.2], vec![2.0, 0.1]];
        let w = Matrix::from_rows(&[[0.4, -2.0], [1.0, 0.7]]).unwrap();
        let (_, est_w) = covariance_stochastic_gradients(&xs, &xs, &v, &w).unwrap();
        assert!(est_w.max_abs() < 1e-15);

        assert_eq!(
            covariance_stochastic_gradients(&[], &[vec![0.0, 1.0]], &v, &w),
            Err(GameError::EmptyBatch)
        );
    }

    #[test]
    fn stochastic_oracle_is_unbiased() {
        let g = CovarianceGame::new(Matrix::identity(2), 0.0, None).unwrap();
        let v = [1.2, 0.3, -0.4, 0.8];
        let w = [0.5, -0.1, 0.2, 0.3];
        let exact = g.disc_gradient(&v, &w).unwrap();
        let mut s = GaussianSampler::standard(4, 2);
        let est = g.stochastic_disc_gradient(&v, &w, 10_000, &mut s).unwrap();
        for (e, x) in est.iter().zip(&exact) {
            assert!((e - x).abs() < 0.1, "{est:?} vs {exact:?}");
        }
        let exact = g.gen_gradient(&v, &w).unwrap();
        let est = g.stochastic_gen_gradient(&v, &w, 10_000, &mut s).unwrap();
        for (e, x) in est.iter().zip(&exact) {
            assert!((e - x).abs() < 0.1, "{est:?} vs {exact:?}");
        }
    }

    #[test]
    fn validation() {
        assert!(CovarianceGame::new(Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap(), 0.0, None).is_err());
        assert!(CovarianceGame::new(Matrix::from_diag(&[1.0, -0.5]), 0.0, None).is_err());
        assert!(CovarianceGame::new(Matrix::from_diag(&[1.0, 0.0]), 0.0, None).is_ok());
        assert!(CovarianceGame::new(Matrix::identity(2), -0.1, None).is_err());
        let sigma = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        let g = CovarianceGame::new(sigma.clone(), 0.0, Some(1.0)).unwrap();
        let f = &g.factor;
        assert!(f.matmul(&f.transpose()).unwrap().sub(&sigma).unwrap().max_abs() < 1e-12);
    }
}
