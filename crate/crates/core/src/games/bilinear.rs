use alloc::string::ToString;

use super::{check_len, Diagnostics, Game, GameError};
use crate::linalg::{pseudoinverse, vector, Matrix, Vector};

/// `f(x, y) = xᵀAy + bᵀx + cᵀy + d`, x minimizing and y maximizing.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearGame {
    a: Matrix,
    b: Vector,
    c: Vector,
    d: f64,
    /// `(Aᵀ)⁺c` and `A⁺b`: the equilibrium is `(−b₃, −c₃)` when it exists.
    shift_x: Vector,
    shift_y: Vector,
}

impl BilinearGame {
    pub fn new(a: Matrix, b: Vector, c: Vector, d: f64) -> Result<Self, GameError> {
        check_len("b", &b, a.rows())?;
        check_len("c", &c, a.cols())?;
        if !vector::all_finite(&b) || !vector::all_finite(&c) || !d.is_finite() {
            return Err(GameError::Invalid("non-finite linear terms".to_string()));
        }
        let pinv = pseudoinverse(&a)?;
        let shift_x = pinv.tr_matvec(&c)?;
        let shift_y = pinv.matvec(&b)?;
        Ok(BilinearGame {
            a,
            b,
            c,
            d,
            shift_x,
            shift_y,
        })
    }

    pub fn homogeneous(a: Matrix) -> Self {
        let (m, n) = (a.rows(), a.cols());
        BilinearGame {
            a,
            b: alloc::vec![0.0; m],
            c: alloc::vec![0.0; n],
            d: 0.0,
            shift_x: alloc::vec![0.0; m],
            shift_y: alloc::vec![0.0; n],
        }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// `b₃ = (Aᵀ)⁺c`
    pub fn b3(&self) -> &[f64] {
        &self.shift_x
    }

    /// `c₃ = A⁺b`
    pub fn c3(&self) -> &[f64] {
        &self.shift_y
    }

    pub fn is_homogeneous(&self) -> bool {
        self.b.iter().chain(&self.c).all(|v| *v == 0.0)
    }

    fn centered(&self, x: &[f64], y: &[f64]) -> (Vector, Vector) {
        (vector::add(x, &self.shift_x), vector::add(y, &self.shift_y))
    }
}

/// `(∇ₓ, ∇ᵧ) = (Ay + b, Aᵀx + c)`
pub fn bilinear_gradients(g: &BilinearGame, x: &[f64], y: &[f64]) -> Result<(Vector, Vector), GameError> {
    Ok((g.gen_gradient(x, y)?, g.disc_gradient(x, y)?))
}

impl Game for BilinearGame {
    fn name(&self) -> &'static str {
        "bilinear"
    }

    fn gen_dim(&self) -> usize {
        self.a.rows()
    }

    fn disc_dim(&self) -> usize {
        self.a.cols()
    }

    fn loss(&self, x: &[f64], y: &[f64]) -> Result<f64, GameError> {
        check_len("x", x, self.a.rows())?;
        let ay = self.a.matvec(y)?;
        Ok(vector::dot(x, &ay) + vector::dot(&self.b, x) + vector::dot(&self.c, y) + self.d)
    }

    fn gen_gradient(&self, x: &[f64], y: &[f64]) -> Result<Vector, GameError> {
        check_len("x", x, self.a.rows())?;
        let mut g = self.a.matvec(y)?;
        vector::axpy(&mut g, 1.0, &self.b);
        Ok(g)
    }

    fn disc_gradient(&self, x: &[f64], y: &[f64]) -> Result<Vector, GameError> {
        check_len("y", y, self.a.cols())?;
        let mut g = self.a.tr_matvec(x)?;
        vector::axpy(&mut g, 1.0, &self.c);
        Ok(g)
    }

    fn diagnostics(&self, x: &[f64], y: &[f64]) -> Result<Diagnostics, GameError> {
        let (cx, cy) = self.centered(x, y);
        let delta0 = vector::norm_sq(&self.a.tr_matvec(&cx)?) + vector::norm_sq(&self.a.matvec(&cy)?);
        Ok(Diagnostics {
            loss: self.loss(x, y)?,
            delta0: Some(delta0),
            distance: Some(libm::sqrt(delta0)),
            ..Default::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::fd;
    use crate::linalg::testutil::{random_matrix, TestRng};

    #[test]
    fn examples() {
        let g = BilinearGame::homogeneous(Matrix::identity(2));
        let (gx, gy) = bilinear_gradients(&g, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(gx, alloc::vec![3.0, 4.0]);
        assert_eq!(gy, alloc::vec![1.0, 2.0]);

        let g = BilinearGame::new(Matrix::identity(2), alloc::vec![1.0, -1.0], alloc::vec![0.5, 2.0], 0.0).unwrap();
        let (gx, gy) = bilinear_gradients(&g, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(gx, alloc::vec![1.0, -1.0]);
        assert_eq!(gy, alloc::vec![0.5, 2.0]);
    }

    #[test]
    fn finite_differences() {
        let mut rng = TestRng::new(5);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 3);
            let g = BilinearGame::new(a, rng.vector(4), rng.vector(3), 0.7).unwrap();
            let (x, y) = (rng.vector(4), rng.vector(3));
            let (gx, gy) = bilinear_gradients(&g, &x, &y).unwrap();
            fd::assert_close(&gx, &fd::gradient(|p| g.loss(p, &y).unwrap(), &x, 1e-5), 1e-6);
            fd::assert_close(&gy, &fd::gradient(|p| g.loss(&x, p).unwrap(), &y, 1e-5), 1e-6);
        }
    }

    #[test]
    fn equilibrium_has_zero_gradient_and_distance() {
        let mut rng = TestRng::new(9);
        let a = random_matrix(&mut rng, 3, 3);
        let g = BilinearGame::new(a, rng.vector(3), rng.vector(3), 0.0).unwrap();
        let x = vector::scale(&g.shift_x, -1.0);
        let y = vector::scale(&g.shift_y, -1.0);
        let (gx, gy) = bilinear_gradients(&g, &x, &y).unwrap();
        assert!(vector::norm_inf(&gx) < 1e-12 && vector::norm_inf(&gy) < 1e-12);
        assert!(g.diagnostics(&x, &y).unwrap().distance.unwrap() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        assert!(BilinearGame::new(Matrix::identity(2), alloc::vec![0.0], alloc::vec![0.0, 0.0], 0.0).is_err());
        let g = BilinearGame::homogeneous(Matrix::zeros(2, 3));
        assert!(g.gen_gradient(&[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(g.disc_gradient(&[0.0], &[0.0, 0.0, 0.0]).is_err());
    }
}
