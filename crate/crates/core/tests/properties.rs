use moblo::gmoba::{gmoba_step, solve_from};
use moblo::l2o::softmax;
use moblo::metrics::{gd, purity, sp};
use moblo::rng::{seeded, standard_normal_vector};
use moblo::{
    generate_instance, min_norm_simplex, recommend_steps, ExactOracle, ProblemDims, SolverConfig, SolverState, Vector,
};
use proptest::prelude::*;

fn point_set(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lower_solution_is_lipschitz(seed in 0u64..500, n in 2usize..8, a in 0u64..1000, b in 0u64..1000) {
        let inst = generate_instance(ProblemDims::square(n, 2).unwrap(), 0.1, seed).unwrap();
        // The cross block is the identity, so y*(x) is (1/μ)-Lipschitz.
        let x1 = standard_normal_vector(n, &mut seeded(a));
        let x2 = standard_normal_vector(n, &mut seeded(b + 1000));
        let dy = (inst.lower_solution(&x1).unwrap() - inst.lower_solution(&x2).unwrap()).norm();
        prop_assert!(dy <= (1.0 / inst.mu()) * (&x1 - &x2).norm() * (1.0 + 1e-9));
    }

    #[test]
    fn lower_step_contracts(seed in 0u64..500, n in 2usize..8, start in 0u64..1000) {
        let inst = generate_instance(ProblemDims::square(n, 2).unwrap(), 0.1, seed).unwrap();
        let c = inst.compute_constants();
        let beta = recommend_steps(&c).beta_max;
        let cfg = SolverConfig { beta, ..SolverConfig::default() };
        let mut rng = seeded(start);
        let x = standard_normal_vector(n, &mut rng);
        let y = standard_normal_vector(n, &mut rng);
        let state = SolverState::new(&inst, x.clone(), y.clone(), None).unwrap();
        let next = gmoba_step(&inst, &state, &cfg).unwrap();
        let y_star = inst.lower_solution(&x).unwrap();
        let before = (&y - &y_star).norm();
        let after = (&next.y - &y_star).norm();
        prop_assert!(after <= (1.0 - beta * c.mu) * before * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn min_norm_is_no_longer_than_any_direction(raw in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..5)) {
        let ds: Vec<Vector> = raw.iter().map(|r| Vector::from_vec(r.clone())).collect();
        let lambda = min_norm_simplex(&ds).unwrap();
        let d = lambda.combine(&ds).norm();
        for di in &ds {
            prop_assert!(d <= di.norm() + 1e-9);
        }
    }

    #[test]
    fn softmax_lands_on_simplex(z in prop::collection::vec(-700.0f64..700.0, 1..6)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }

    #[test]
    fn purity_grows_with_tolerance(obtained in point_set(20), reference in point_set(30), t in 0.0f64..2.0) {
        let p1 = purity(&obtained, &reference, t).unwrap();
        let p2 = purity(&obtained, &reference, t + 0.5).unwrap();
        prop_assert!((0.0..=1.0).contains(&p1) && p1 <= p2);
    }

    #[test]
    fn gd_vanishes_on_subsets(reference in point_set(30), take in 1usize..30) {
        let obtained: Vec<Vec<f64>> = reference.iter().take(take).cloned().collect();
        prop_assert!(gd(&obtained, &reference).unwrap() == 0.0);
        let shifted: Vec<Vec<f64>> = obtained.iter().map(|p| vec![p[0] + 1.0, p[1]]).collect();
        prop_assert!(gd(&shifted, &reference).unwrap() >= 0.0);
    }

    #[test]
    fn spacing_ignores_order(mut pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 2..15)) {
        let a = sp(&pts).unwrap();
        pts.reverse();
        prop_assert!((a - sp(&pts).unwrap()).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // With a small upper step the squared step lengths are summable, so late
    // steps become negligible.
    #[test]
    fn steps_are_summable(seed in 0u64..100, start in 0u64..100) {
        let n = 3;
        let inst = generate_instance(ProblemDims::square(n, 2).unwrap(), 0.1, seed).unwrap();
        let cfg = SolverConfig {
            alpha: 0.001,
            max_iters: 20_000,
            tol_obj_change: 1e-10,
            tol_dp: None,
            record_history: true,
            ..SolverConfig::default()
        };
        let x0 = standard_normal_vector(n, &mut seeded(start));
        let rec = solve_from(&inst, SolverState::new(&inst, x0, Vector::zeros(n), None).unwrap(), &cfg, None).unwrap();
        let h = rec.history.unwrap();
        prop_assert!(h.iter().all(|it| it.step_norm.is_finite()));
        let tail: f64 = h.iter().rev().take(10).map(|it| it.step_norm).sum::<f64>() / 10.0;
        prop_assert!(tail < 1e-5, "tail step average {tail:e}");
    }
}
