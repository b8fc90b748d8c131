mod common;

use common::Rng;
use dynlab_core::dynamics::{omd_bilinear_init, omd_bilinear_step, run_dynamics, RunConfig, Schedule};
use dynlab_core::games::{clip_weights, AnyGame, CovarianceGame, Game, GaussianSampler, MeanGame, PwmGame};
use dynlab_core::linalg::{project_onto_range, vector, Matrix};
use dynlab_core::optim::{OptimizerConfig, OptimizerKind, PredictorKind};
use proptest::prelude::*;

fn pwm() -> PwmGame {
    PwmGame::new(vec![vec![0.6, 0.2, 0.1, 0.1], vec![0.1, 0.7, 0.1, 0.1]], Some(1.0)).unwrap()
}

fn games() -> Vec<(AnyGame, Vec<f64>, Vec<f64>)> {
    let mean = MeanGame::new(vec![3.0, 4.0], Some(10.0), None).unwrap();
    let cov = CovarianceGame::from_factor(
        Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.0]]).unwrap(),
        0.1,
        Some(1.0),
    )
    .unwrap();
    vec![
        (AnyGame::Mean(mean), vec![0.0, 0.0], vec![0.5, -0.5]),
        (AnyGame::Covariance(cov), vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 4]),
        (AnyGame::Pwm(pwm()), vec![0.0; 8], vec![0.0; 8]),
    ]
}

#[test]
fn stochastic_trajectories_are_finite_increasing_and_reproducible() {
    for (game, g0, d0) in games() {
        for k in [1, 5] {
            let mut cfg = RunConfig::symmetric(OptimizerConfig::omd(0.05), 60);
            cfg.schedule = Schedule::new(k).unwrap();
            cfg.batch_size = 16;
            cfg.seed = 9;
            cfg.record_every = 7;
            let t = run_dynamics(&game, g0.clone(), d0.clone(), &cfg).unwrap();
            assert!(!t.is_diverged(), "{}", game.name());
            let its: Vec<usize> = t.rounds().map(|r| r.iteration).collect();
            assert!(its.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(*its.last().unwrap(), 60);
            assert!(t
                .rows
                .iter()
                .all(|r| vector::all_finite(&r.gen) && vector::all_finite(&r.disc)));
            let again = run_dynamics(&game, g0.clone(), d0.clone(), &cfg).unwrap();
            assert_eq!(t, again);
        }
    }
}

#[test]
fn clipped_discriminators_stay_in_the_box() {
    for (game, g0, d0) in games() {
        let clip = game.disc_clip().unwrap();
        let mut cfg = RunConfig::symmetric(OptimizerConfig::gd(0.5), 40);
        cfg.schedule = Schedule::new(3).unwrap();
        cfg.batch_size = 8;
        cfg.record_substeps = true;
        let t = run_dynamics(&game, g0, d0, &cfg).unwrap();
        assert!(t.rows.iter().all(|r| r.disc.iter().all(|w| w.abs() <= clip)));
    }
}

#[test]
fn omd_bilinear_iterates_stay_in_range() {
    let mut rng = Rng::new(300);
    for _ in 0..5 {
        let a = rng.rank_matrix(5, 4, 2).scale(0.3);
        let (x, y) = rng.range_start(&a);
        let mut s = omd_bilinear_init(&a, &x, &y, 0.05).unwrap();
        for _ in 0..10_000 {
            omd_bilinear_step(&mut s).unwrap();
        }
        let px = project_onto_range(&a, s.x()).unwrap();
        let py = project_onto_range(&a.transpose(), s.y()).unwrap();
        assert!(vector::distance(&px, s.x()) < 1e-9);
        assert!(vector::distance(&py, s.y()) < 1e-9);
    }
}

fn optimizer() -> impl Strategy<Value = OptimizerConfig> {
    let kinds = prop_oneof![
        Just(OptimizerKind::Gd),
        Just(OptimizerKind::Omd {
            predictor: PredictorKind::LastGradient
        }),
        Just(OptimizerKind::Omd {
            predictor: PredictorKind::RunningAverage
        }),
        Just(OptimizerKind::Omd {
            predictor: PredictorKind::Discounted { lambda: 0.5 }
        }),
        Just(OptimizerKind::Momentum),
        Just(OptimizerKind::Nesterov),
        Just(OptimizerKind::Adagrad),
        Just(OptimizerKind::Adam),
        Just(OptimizerKind::OptimisticAdam),
    ];
    (kinds, 0.001f64..0.2).prop_map(|(k, lr)| OptimizerConfig::new(k, lr))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clip_is_an_idempotent_projection(w in prop::collection::vec(-50.0f64..50.0, 1..10), c in 0.1f64..20.0, shift in prop::collection::vec(-5.0f64..5.0, 10)) {
        let once = clip_weights(&w, c);
        prop_assert_eq!(clip_weights(&once, c), once.clone());
        prop_assert!(once.iter().all(|x| x.abs() <= c));
        let other: Vec<f64> = w.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let co = clip_weights(&other, c);
        prop_assert!(vector::norm_inf(&vector::sub(&once, &co)) <= vector::norm_inf(&vector::sub(&w, &other)) + 1e-12);
    }

    #[test]
    fn sampler_streams_depend_only_on_the_seed(seed in any::<u64>()) {
        let mut a = GaussianSampler::standard(seed, 3);
        let mut b = GaussianSampler::standard(seed, 3);
        for _ in 0..20 {
            prop_assert_eq!(a.sample(), b.sample());
        }
    }

    #[test]
    fn runs_are_deterministic_for_every_optimizer(gen in optimizer(), disc in optimizer(), seed in any::<u64>(), k in 1usize..4) {
        let game = MeanGame::new(vec![1.0, -2.0], Some(5.0), Some(0.1)).unwrap();
        let mut cfg = RunConfig::new(gen, disc, 25);
        cfg.schedule = Schedule::new(k).unwrap();
        cfg.batch_size = 4;
        cfg.seed = seed;
        let a = run_dynamics(&game, vec![0.3, 0.1], vec![0.0, 0.2], &cfg).unwrap();
        let b = run_dynamics(&game, vec![0.3, 0.1], vec![0.0, 0.2], &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
