use alloc::vec::Vec;

use super::DynamicsError;
use crate::games::BilinearGame;
use crate::linalg::{project_onto_range, pseudoinverse, vector, Matrix, Vector};

/// Exact OMD on `xᵀAy + bᵀx + cᵀy`:
///
/// `x_{t+1} = x_t − 2η(Ay_t + b) + η(Ay_{t−1} + b)`
/// `y_{t+1} = y_t + 2η(Aᵀx_t + c) − η(Aᵀx_{t−1} + c)`
///
/// The state keeps the window `(z_t, z_{t−1}, z_{t−2})` for both players.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearOmdState {
    game: BilinearGame,
    eta: f64,
    x: [Vector; 3],
    y: [Vector; 3],
    t: usize,
}

impl BilinearOmdState {
    pub fn game(&self) -> &BilinearGame {
        &self.game
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Index of the current iterate.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x[0]
    }

    pub fn y(&self) -> &[f64] {
        &self.y[0]
    }

    /// `x_{t−lag}` for `lag ≤ 2`.
    pub fn x_lag(&self, lag: usize) -> &[f64] {
        &self.x[lag]
    }

    pub fn y_lag(&self, lag: usize) -> &[f64] {
        &self.y[lag]
    }
}

fn range_residual(a: &Matrix, v: &[f64]) -> Result<f64, DynamicsError> {
    let p = project_onto_range(a, v)?;
    Ok(vector::distance(&p, v))
}

/// Homogeneous start: `x₋₁ = 2x₀`, `y₋₁ = 2y₀`,
/// `x₋₂ = 4x₀ + (1/η)(Aᵀ)⁺y₀`, `y₋₂ = 4y₀ − (1/η)A⁺x₀`, so that the first step
/// returns `(x₀, y₀)` and the recursion also holds at `t = 0`.
///
/// `x₀` must lie in the range of `A` and `y₀` in the range of `Aᵀ`.
pub fn omd_bilinear_init(a: &Matrix, x0: &[f64], y0: &[f64], eta: f64) -> Result<BilinearOmdState, DynamicsError> {
    omd_general_init(&BilinearGame::homogeneous(a.clone()), x0, y0, eta)
}

/// General start. The shifted pair `α_t = x_t + ηt·b₂ + b₃`,
/// `β_t = y_t − ηt·c₂ + c₃` follows the homogeneous recursion; it receives the
/// homogeneous start from `(α₀, β₀)` and the history is mapped back.
pub fn omd_general_init(
    game: &BilinearGame,
    x0: &[f64],
    y0: &[f64],
    eta: f64,
) -> Result<BilinearOmdState, DynamicsError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(DynamicsError::Config(alloc::format!(
            "step size must be positive, got {eta}"
        )));
    }
    let a = game.a();
    if x0.len() != a.rows() {
        return Err(DynamicsError::Shape {
            what: "x0",
            expected: a.rows(),
            found: x0.len(),
        });
    }
    if y0.len() != a.cols() {
        return Err(DynamicsError::Shape {
            what: "y0",
            expected: a.cols(),
            found: y0.len(),
        });
    }
    let at = a.transpose();
    let rx = range_residual(a, x0)?;
    if rx > 1e-9 * vector::norm(x0).max(1.0) {
        return Err(DynamicsError::NotInRange {
            which: "x0",
            residual: rx,
        });
    }
    let ry = range_residual(&at, y0)?;
    if ry > 1e-9 * vector::norm(y0).max(1.0) {
        return Err(DynamicsError::NotInRange {
            which: "y0",
            residual: ry,
        });
    }

    let (b3, c3) = (game.b3(), game.c3());
    // b₂ = b − Ac₃, c₂ = c − Aᵀb₃
    let b2 = vector::sub(game.b(), &a.matvec(c3)?);
    let c2 = vector::sub(game.c(), &at.matvec(b3)?);
    let alpha0 = vector::add(x0, b3);
    let beta0 = vector::add(y0, c3);

    let pinv = pseudoinverse(a)?;
    let mut alpha2 = vector::scale(&alpha0, 4.0);
    vector::axpy(&mut alpha2, 1.0 / eta, &pinv.tr_matvec(&beta0)?);
    let mut beta2 = vector::scale(&beta0, 4.0);
    vector::axpy(&mut beta2, -1.0 / eta, &pinv.matvec(&alpha0)?);
    let alpha1 = vector::scale(&alpha0, 2.0);
    let beta1 = vector::scale(&beta0, 2.0);

    // x_t = α_t − ηt·b₂ − b₃, y_t = β_t + ηt·c₂ − c₃
    let back_x = |alpha: &[f64], t: f64| {
        let mut x = vector::sub(alpha, b3);
        vector::axpy(&mut x, -eta * t, &b2);
        x
    };
    let back_y = |beta: &[f64], t: f64| {
        let mut y = vector::sub(beta, c3);
        vector::axpy(&mut y, eta * t, &c2);
        y
    };
    Ok(BilinearOmdState {
        game: game.clone(),
        eta,
        x: [x0.to_vec(), back_x(&alpha1, -1.0), back_x(&alpha2, -2.0)],
        y: [y0.to_vec(), back_y(&beta1, -1.0), back_y(&beta2, -2.0)],
        t: 0,
    })
}

/// Advances the window by one step.
pub fn omd_bilinear_step(state: &mut BilinearOmdState) -> Result<(), DynamicsError> {
    let eta = state.eta;
    let a = state.game.a();
    let (ay0, ay1) = (a.matvec(&state.y[0])?, a.matvec(&state.y[1])?);
    let (ax0, ax1) = (a.tr_matvec(&state.x[0])?, a.tr_matvec(&state.x[1])?);
    let mut x = state.x[0].clone();
    let mut y = state.y[0].clone();
    vector::axpy(&mut x, -2.0 * eta, &ay0);
    vector::axpy(&mut x, eta, &ay1);
    vector::axpy(&mut x, -eta, state.game.b());
    vector::axpy(&mut y, 2.0 * eta, &ax0);
    vector::axpy(&mut y, -eta, &ax1);
    vector::axpy(&mut y, eta, state.game.c());
    state.x.rotate_right(1);
    state.y.rotate_right(1);
    state.x[0] = x;
    state.y[0] = y;
    state.t += 1;
    Ok(())
}

/// Iterates `x_t, y_t` for `t = −2 ..= steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearTrajectory {
    pub a: Matrix,
    pub eta: f64,
    xs: Vec<Vector>,
    ys: Vec<Vector>,
}

impl BilinearTrajectory {
    /// Largest available index.
    pub fn last_t(&self) -> usize {
        self.xs.len() - 3
    }

    /// `x_t` for `t ≥ −2`.
    pub fn x(&self, t: isize) -> &[f64] {
        &self.xs[(t + 2) as usize]
    }

    pub fn y(&self, t: isize) -> &[f64] {
        &self.ys[(t + 2) as usize]
    }

    /// Iterates from `t = 0` on.
    pub fn xs(&self) -> &[Vector] {
        &self.xs[2..]
    }

    pub fn ys(&self) -> &[Vector] {
        &self.ys[2..]
    }
}

/// Runs `steps` steps from a freshly initialized state.
pub fn simulate_bilinear_omd(mut state: BilinearOmdState, steps: usize) -> Result<BilinearTrajectory, DynamicsError> {
    debug_assert_eq!(state.t, 0);
    let mut xs = Vec::with_capacity(steps + 3);
    let mut ys = Vec::with_capacity(steps + 3);
    for lag in [2, 1, 0] {
        xs.push(state.x[lag].clone());
        ys.push(state.y[lag].clone());
    }
    for _ in 0..steps {
        omd_bilinear_step(&mut state)?;
        xs.push(state.x[0].clone());
        ys.push(state.y[0].clone());
    }
    Ok(BilinearTrajectory {
        a: state.game.a().clone(),
        eta: state.eta,
        xs,
        ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;
    use crate::linalg::testutil::{random_matrix, random_rank_matrix, TestRng};
    use alloc::vec;

    #[test]
    fn init_examples() {
        let s = omd_bilinear_init(&Matrix::identity(2), &[1.0, 0.0], &[0.0, 1.0], 0.1).unwrap();
        assert_eq!(s.x_lag(1), &[2.0, 0.0]);
        let x2 = s.x_lag(2);
        assert!((x2[0] - 4.0).abs() < 1e-12 && (x2[1] - 10.0).abs() < 1e-12);
        let y2 = s.y_lag(2);
        // 4y₀ − 10x₀
        assert!((y2[0] + 10.0).abs() < 1e-12 && (y2[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn first_step_is_identity() {
        let mut rng = TestRng::new(2);
        for _ in 0..10 {
            let a = random_rank_matrix(&mut rng, 5, 4, 2);
            let x0 = project_onto_range(&a, &rng.vector(5)).unwrap();
            let y0 = project_onto_range(&a.transpose(), &rng.vector(4)).unwrap();
            let mut s = omd_bilinear_init(&a, &x0, &y0, 0.05).unwrap();
            omd_bilinear_step(&mut s).unwrap();
            assert!(vector::distance(s.x(), &x0) < 1e-12);
            assert!(vector::distance(s.y(), &y0) < 1e-12);
        }
    }

    #[test]
    fn scalar_example() {
        let mut s = omd_bilinear_init(&Matrix::identity(1), &[1.0], &[1.0], 0.1).unwrap();
        omd_bilinear_step(&mut s).unwrap();
        assert_eq!((s.x()[0], s.y()[0]), (1.0, 1.0));
        omd_bilinear_step(&mut s).unwrap();
        assert!((s.x()[0] - 0.9).abs() < 1e-15 && (s.y()[0] - 1.1).abs() < 1e-15);
        let traj = simulate_bilinear_omd(
            omd_bilinear_init(&Matrix::identity(1), &[1.0], &[1.0], 0.1).unwrap(),
            10_000,
        )
        .unwrap();
        assert_eq!(traj.last_t(), 10_000);
        assert!(traj.x(10_000)[0].abs() < 1e-3 && traj.y(10_000)[0].abs() < 1e-3);
    }

    #[test]
    fn rejects_out_of_range_start() {
        let a = Matrix::from_diag(&[1.0, 0.0]);
        let err = omd_bilinear_init(&a, &[1.0, 0.5], &[0.0, 0.0], 0.1).unwrap_err();
        match err {
            DynamicsError::NotInRange { which, residual } => {
                assert_eq!(which, "x0");
                assert!((residual - 0.5).abs() < 1e-12);
            }
            e => panic!("{e:?}"),
        }
        assert!(omd_bilinear_init(&a, &[1.0, 0.0], &[0.0, 2.0], 0.1).is_err());
        assert!(omd_bilinear_init(&a, &[1.0, 0.0], &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn equilibrium_is_frozen() {
        let a = Matrix::from_diag(&[1.0, 0.0]);
        let traj = simulate_bilinear_omd(omd_bilinear_init(&a, &[0.0, 0.0], &[0.0, 0.0], 0.1).unwrap(), 50).unwrap();
        assert!(traj.xs().iter().all(|x| vector::norm(x) == 0.0));
    }

    #[test]
    fn iterates_stay_in_range() {
        let mut rng = TestRng::new(8);
        let a = random_rank_matrix(&mut rng, 5, 4, 2);
        let a = a.scale(0.9 / spectral_norm(&a).unwrap());
        let x0 = project_onto_range(&a, &rng.vector(5)).unwrap();
        let y0 = project_onto_range(&a.transpose(), &rng.vector(4)).unwrap();
        let traj = simulate_bilinear_omd(omd_bilinear_init(&a, &x0, &y0, 0.05).unwrap(), 10_000).unwrap();
        for t in (0..=10_000).step_by(500) {
            assert!(range_residual(&a, traj.x(t)).unwrap() < 1e-9);
            assert!(range_residual(&a.transpose(), traj.y(t)).unwrap() < 1e-9);
        }
    }

    #[test]
    fn general_recursion_holds_from_start() {
        let mut rng = TestRng::new(12);
        let a = random_matrix(&mut rng, 3, 3);
        let game = BilinearGame::new(a.clone(), rng.vector(3), rng.vector(3), 0.0).unwrap();
        let x0 = rng.vector(3);
        let y0 = rng.vector(3);
        let eta = 0.03;
        let s = omd_general_init(&game, &x0, &y0, eta).unwrap();
        let traj = simulate_bilinear_omd(s, 5).unwrap();
        // the general recursion, checked from t = 0 using the stored history
        for t in 0..5isize {
            let mut x = traj.x(t).to_vec();
            vector::axpy(
                &mut x,
                -2.0 * eta,
                &vector::add(&a.matvec(traj.y(t)).unwrap(), game.b()),
            );
            vector::axpy(&mut x, eta, &vector::add(&a.matvec(traj.y(t - 1)).unwrap(), game.b()));
            assert!(vector::distance(&x, traj.x(t + 1)) < 1e-10);
        }
        let _ = vec![0];
    }
}
