mod common;

use common::{scaled_to, Rng};
use dynlab_core::analysis::{
    delta, general_decompose, kl_categorical, kl_gaussian_mean, transform_iterates, verify_claim1, verify_corollary,
    verify_lemma1_range, verify_theorem, ConvergenceParams, DeltaLadder,
};
use dynlab_core::dynamics::{omd_bilinear_init, omd_general_init, simulate_bilinear_omd, BilinearTrajectory};
use dynlab_core::games::BilinearGame;
use dynlab_core::linalg::{game_norm, project_onto_range, vector, Matrix};
use proptest::prelude::*;

/// Random `A` up to 8×6 with `‖A‖ ≤ 1`, a range-space start and a valid step.
fn instance(rng: &mut Rng) -> (Matrix, BilinearTrajectory, ConvergenceParams) {
    let m = 1 + rng.below(8);
    let n = 1 + rng.below(6);
    let r = 1 + rng.below(m.min(n));
    let a = scaled_to(&rng.rank_matrix(m, n, r), 0.5 + 0.5 * (rng.below(1000) as f64 / 1000.0));
    let bound = ConvergenceParams::new(&a, 1.0).unwrap().eta_bound();
    let eta = (0.9 * bound).min(0.1);
    let params = ConvergenceParams::new(&a, eta).unwrap();
    let (x, y) = rng.range_start(&a);
    let traj = simulate_bilinear_omd(omd_bilinear_init(&a, &x, &y, eta).unwrap(), 200).unwrap();
    (a, traj, params)
}

#[test]
fn lemma1_identity_on_50_instances() {
    let mut rng = Rng::new(200);
    for k in 0..50 {
        let (_, traj, _) = instance(&mut rng);
        let r = verify_lemma1_range(&traj, 40, 3).unwrap();
        assert_eq!(r.checks.len(), 39 * 4);
        assert!(r.passed(), "instance {k}: {:?}", r.failures().next());
    }
}

#[test]
fn theorem_and_lemmas_on_50_instances() {
    let mut rng = Rng::new(201);
    for k in 0..50 {
        let (_, traj, params) = instance(&mut rng);
        assert!(params.violations().is_empty());
        let r = verify_theorem(&traj, &params, 200, 3).unwrap();
        for name in ["first_step", "second_step", "h", "lemma3", "lemma4", "lemma5"] {
            assert!(r.count(name) > 0, "{name} not checked");
        }
        assert!(r.passed(), "instance {k}: {:?}", r.failures().next());
        let c = verify_corollary(&traj, &params).unwrap();
        assert!(
            c.failures().all(|f| f.name == "corollary_tail"),
            "instance {k}: {:?}",
            c.failures().next()
        );
    }
}

#[test]
fn ladder_values_are_nonnegative_and_level0_is_game_norm() {
    let mut rng = Rng::new(202);
    for _ in 0..20 {
        let (a, traj, _) = instance(&mut rng);
        let ladder = DeltaLadder::new(&traj, 4).unwrap();
        for t in 0..=traj.last_t() as isize {
            for i in 0..=4 {
                assert!(ladder.get(t, i) >= 0.0);
            }
            let g = game_norm(&a, traj.x(t), traj.y(t)).unwrap();
            assert!((ladder.get(t, 0) - g * g).abs() <= 1e-12 * (g * g).max(1.0));
        }
    }
}

#[test]
fn general_game_shifted_iterates_follow_homogeneous_recursion() {
    let mut rng = Rng::new(203);
    for _ in 0..20 {
        let m = 2 + rng.below(5);
        let n = 2 + rng.below(5);
        let r = 1 + rng.below(m.min(n));
        let a = scaled_to(&rng.rank_matrix(m, n, r), 0.9);
        let (b, c) = (rng.vector(m), rng.vector(n));
        let dec = general_decompose(&a, &b, &c).unwrap();
        assert!(dec.residuals(&a).unwrap().max() < 1e-9);
        let (xa, yb) = rng.range_start(&a);
        let x0 = vector::sub(&xa, &dec.b3);
        let y0 = vector::sub(&yb, &dec.c3);
        let game = BilinearGame::new(a.clone(), b, c, 0.0).unwrap();
        let traj = simulate_bilinear_omd(omd_general_init(&game, &x0, &y0, 0.05).unwrap(), 300).unwrap();
        let tr = transform_iterates(&traj, &dec, 0.05).unwrap();
        let scale = vector::norm(&x0).max(vector::norm(&y0)).max(1.0);
        for r in tr.homogeneous_residuals(&a, 0.05).unwrap() {
            assert!(r < 1e-10 * scale * 100.0, "{r}");
        }
    }
}

fn small_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
        prop::collection::vec(-2.0f64..2.0, m * n).prop_map(move |d| Matrix::new(m, n, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn claim1_holds(a in small_matrix(), seed in 0u64..10_000, i in 0usize..4) {
        let mut rng = Rng::new(seed);
        let (u, v) = (rng.vector(a.rows()), rng.vector(a.cols()));
        let r = verify_claim1(&a, &u, &v, i).unwrap();
        prop_assert!(r.passed(), "{:?}", r.failures().next());
    }

    #[test]
    fn delta_level_zero_matches_game_norm(a in small_matrix(), seed in 0u64..10_000) {
        let mut rng = Rng::new(seed);
        let (x, y) = (rng.vector(a.rows()), rng.vector(a.cols()));
        let g = game_norm(&a, &x, &y).unwrap();
        prop_assert!((delta(&a, &x, &y, 0).unwrap().sqrt() - g).abs() <= 1e-12 * g.max(1.0));
    }

    #[test]
    fn decomposition_invariants(a in small_matrix(), seed in 0u64..10_000) {
        let mut rng = Rng::new(seed);
        let (b, c) = (rng.vector(a.rows()), rng.vector(a.cols()));
        let d = general_decompose(&a, &b, &c).unwrap();
        prop_assert!(d.residuals(&a).unwrap().max() < 1e-9 * a.max_abs().max(1.0) * 10.0);
        prop_assert!(vector::distance(&vector::add(&d.b1, &d.b2), &b) < 1e-12 * 10.0);
        prop_assert!(vector::distance(&project_onto_range(&a, &d.b1).unwrap(), &d.b1) < 1e-9);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal(raw in prop::collection::vec(0.01f64..1.0, 8), other in prop::collection::vec(0.01f64..1.0, 8)) {
        let norm = |v: &[f64]| -> Vec<f64> {
            v.chunks(4).flat_map(|c| { let s: f64 = c.iter().sum(); c.iter().map(move |x| x / s) }).collect()
        };
        let (p, q) = (norm(&raw), norm(&other));
        prop_assert!(kl_categorical(&p, &q, 4).unwrap() >= -1e-15);
        prop_assert!(kl_categorical(&p, &p, 4).unwrap().abs() < 1e-15);
        prop_assert!(kl_gaussian_mean(&raw, &other).unwrap() >= 0.0);
    }
}
