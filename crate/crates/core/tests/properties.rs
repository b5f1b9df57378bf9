use decopt::framework::{
    run, run_ideal_per_agent, Algorithm, AlgorithmConfig, InnerSolver, InnerStop, Problem, RhoPolicy,
    ScheduleParams,
};
use decopt::simulator::{simulate, CostModel, ExecutionMode};
use decopt::objectives::{partition, random_quadratics, synthesize_dataset, GlobalObjective, PartitionScheme};
use decopt::topology::{build_graph, laplacian, spectrum, validate, GraphKind};
use decopt::BlockVector;
use ndarray::Array1;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kind_strategy() -> impl Strategy<Value = GraphKind> {
    prop_oneof![
        Just(GraphKind::Cycle),
        Just(GraphKind::Path),
        Just(GraphKind::Complete),
        Just(GraphKind::Barbell),
    ]
}

fn valid_n(kind: GraphKind, n: usize) -> usize {
    match kind {
        GraphKind::Barbell => (n & !1).max(4),
        GraphKind::Cycle => n.max(3),
        _ => n,
    }
}

fn quadratic_problem(seed: u64, kind: GraphKind, n: usize, d: usize) -> Problem {
    let f = GlobalObjective::new(random_quadratics(seed, n, d, 0.05, 1.5).unwrap()).unwrap();
    let w = laplacian(&build_graph(kind, n).unwrap()).unwrap();
    Problem::new(f, w).unwrap().with_reference(1e-12).unwrap()
}

fn logistic_problem(seed: u64, kind: GraphKind, n: usize) -> Problem {
    let data = synthesize_dataset(seed, 12 * n, 4, 0.4).unwrap();
    let f = GlobalObjective::new(partition(&data, n, PartitionScheme::ByLabel, 0.02).unwrap()).unwrap();
    let w = laplacian(&build_graph(kind, n).unwrap()).unwrap();
    Problem::new(f, w).unwrap().with_reference(1e-10).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacians_satisfy_mixing_assumptions(kind in kind_strategy(), n in 2usize..=64) {
        let n = valid_n(kind, n);
        let w = laplacian(&build_graph(kind, n).unwrap()).unwrap();
        let report = validate(&w);
        prop_assert!(report.all_passed(), "{kind:?} n={n}\n{report}");
    }

    #[test]
    fn spectrum_is_permutation_invariant(kind in kind_strategy(), n in 4usize..=24, seed in any::<u64>()) {
        let n = valid_n(kind, n);
        let g = build_graph(kind, n).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = spectrum(&laplacian(&g).unwrap()).unwrap();
        let b = spectrum(&laplacian(&g.permuted(&perm).unwrap()).unwrap()).unwrap();
        prop_assert!((a.lambda_max - b.lambda_max).abs() <= 1e-10);
        prop_assert!((a.lambda_min_plus - b.lambda_min_plus).abs() <= 1e-10);
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn local_losses_are_strongly_convex_and_smooth(seed in any::<u64>(), logistic in any::<bool>()) {
        let locals = if logistic {
            let data = synthesize_dataset(seed, 30, 5, 0.5).unwrap();
            partition(&data, 1, PartitionScheme::Contiguous, 0.1).unwrap()
        } else {
            random_quadratics(seed, 1, 5, 0.2, 3.0).unwrap()
        };
        let f = &locals[0];
        let (mu, l) = (f.strong_convexity(), f.smoothness());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x = Array1::from_shape_fn(5, |_| rng.random_range(-3.0..3.0));
            let y = Array1::from_shape_fn(5, |_| rng.random_range(-3.0..3.0));
            let diff = &y - &x;
            let gx = f.grad(x.view()).unwrap();
            let gy = f.grad(y.view()).unwrap();
            let lower = f.value(x.view()).unwrap() + gx.dot(&diff) + 0.5 * mu * diff.dot(&diff);
            prop_assert!(f.value(y.view()).unwrap() >= lower - 1e-9);
            let gd = &gy - &gx;
            prop_assert!(gd.dot(&gd).sqrt() <= l * diff.dot(&diff).sqrt() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn global_gradient_matches_finite_differences(seed in any::<u64>()) {
        let data = synthesize_dataset(seed, 24, 3, 0.5).unwrap();
        let mut locals = partition(&data, 2, PartitionScheme::RoundRobin, 0.05).unwrap();
        locals.extend(random_quadratics(seed, 2, 3, 0.1, 2.0).unwrap());
        let f = GlobalObjective::new(locals).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = BlockVector::from_array(ndarray::Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0)));
        let g = f.grad(&x).unwrap();
        let h = 1e-6;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                let (mut p, mut m) = (x.clone(), x.clone());
                p.data_mut()[[i, j]] += h;
                m.data_mut()[[i, j]] -= h;
                let fd = (f.value(&p).unwrap() - f.value(&m).unwrap()) / (2.0 * h);
                num += (fd - g.data()[[i, j]]).abs();
                den += g.data()[[i, j]].abs();
            }
        }
        prop_assert!(num <= 1e-5 * den.max(1e-8));
    }

    #[test]
    fn kappa_rho_is_strictly_decreasing(kind in kind_strategy(), n in 4usize..=20, mu in 1e-3f64..0.5) {
        let n = valid_n(kind, n);
        let spec = spectrum(&laplacian(&build_graph(kind, n).unwrap()).unwrap()).unwrap();
        let at = |rho: f64| ScheduleParams::compute(&spec, 1.0, mu, rho, 1.0).unwrap().kappa_rho;
        let k0 = at(0.0);
        prop_assert!((k0 - spec.kappa / mu).abs() <= 1e-9 * k0);
        let top = 1e6 / spec.lambda_max;
        let mut last = k0;
        for i in 0..20 {
            let rho = top * 10f64.powf(-12.0 + 12.0 * i as f64 / 19.0);
            let k = at(rho);
            prop_assert!(k < last, "rho={rho}: {k} >= {last}");
            last = k;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn duals_stay_in_the_image_of_the_metric(
        seed in any::<u64>(),
        kind in kind_strategy(),
        n in 4usize..=10,
        alg in prop_oneof![Just(Algorithm::Al), Just(Algorithm::AccAl), Just(Algorithm::Ideal), Just(Algorithm::Mideal)],
        logistic in any::<bool>(),
    ) {
        let n = valid_n(kind, n);
        let problem = if logistic { logistic_problem(seed, kind, n) } else { quadratic_problem(seed, kind, n, 3) };
        let mut cfg = AlgorithmConfig::new(alg);
        cfg.stop = InnerStop::Fixed(10);
        cfg.max_outer = 25;
        if matches!(alg, Algorithm::Al | Algorithm::AccAl) {
            cfg.inner = InnerSolver::Exact { tol: 1e-10 };
        }
        let trace = run(&problem, cfg).unwrap();
        for r in &trace.records {
            prop_assert!(r.dual_drift <= 1e-8, "k={}: drift {}", r.k, r.dual_drift);
        }
    }

    #[test]
    fn zero_rho_collapses_to_dual_methods(seed in any::<u64>(), n in 4usize..=8, sgd in any::<bool>()) {
        let problem = logistic_problem(seed, GraphKind::Cycle, n);
        for (primal, dual) in [(Algorithm::Ideal, Algorithm::Ssda), (Algorithm::Mideal, Algorithm::Msda)] {
            let mut cfg = AlgorithmConfig::new(primal);
            cfg.inner = if sgd { InnerSolver::Sgd } else { InnerSolver::Agd { beta: None } };
            cfg.stop = InnerStop::Fixed(5);
            cfg.max_outer = 10;
            cfg.seed = seed;
            cfg.rho = RhoPolicy::Explicit(0.0);
            let a = run(&problem, cfg.clone()).unwrap();
            cfg.algorithm = dual;
            let b = run(&problem, cfg).unwrap();
            prop_assert_eq!(&a.records, &b.records);
            prop_assert_eq!(&a.x, &b.x);
            prop_assert_eq!(&a.lambda, &b.lambda);
        }
    }

    #[test]
    fn per_agent_execution_matches_matrix_form(
        seed in any::<u64>(),
        kind in kind_strategy(),
        n in 3usize..=9,
        gd in any::<bool>(),
        rho_zero in any::<bool>(),
    ) {
        let n = valid_n(kind, n);
        let problem = quadratic_problem(seed, kind, n, 2);
        let mut cfg = AlgorithmConfig::new(Algorithm::Ideal);
        cfg.inner = if gd { InnerSolver::Gd { step: None } } else { InnerSolver::Agd { beta: None } };
        if rho_zero {
            cfg.rho = RhoPolicy::Explicit(0.0);
        }
        cfg.stop = InnerStop::Fixed(8);
        cfg.max_outer = 15;
        let a = run(&problem, cfg.clone()).unwrap();
        let b = run_ideal_per_agent(&problem, cfg).unwrap();
        prop_assert_eq!(&a.records, &b.records);
        prop_assert_eq!(&a.x, &b.x);
        prop_assert_eq!(&a.lambda, &b.lambda);
    }

    #[test]
    fn simulated_time_is_gradients_plus_weighted_rounds(
        seed in any::<u64>(),
        tau in 0.0f64..50.0,
        alg in prop_oneof![Just(Algorithm::Ideal), Just(Algorithm::Mideal), Just(Algorithm::Extra), Just(Algorithm::Dgd), Just(Algorithm::Msda)],
    ) {
        let problem = quadratic_problem(seed, GraphKind::Cycle, 6, 2);
        let mut cfg = AlgorithmConfig::new(alg);
        cfg.stop = InnerStop::Fixed(4);
        cfg.max_outer = 12;
        let trace = simulate(&problem, &cfg, CostModel::new(tau).unwrap(), ExecutionMode::Matrix).unwrap();
        let mut last = -1.0;
        for s in &trace.samples {
            prop_assert_eq!(s.time, s.grad_rounds as f64 + tau * s.mixing_rounds as f64);
            prop_assert!(s.time >= last);
            last = s.time;
        }
    }
}

#[test]
fn cycle_condition_number_grows_and_complete_is_one() {
    let mut last = 0.0;
    for n in 3..=40 {
        let k = spectrum(&laplacian(&build_graph(GraphKind::Cycle, n).unwrap()).unwrap()).unwrap().kappa;
        assert!(k >= last, "n={n}");
        last = k;
        let c = spectrum(&laplacian(&build_graph(GraphKind::Complete, n).unwrap()).unwrap()).unwrap().kappa;
        assert!((c - 1.0).abs() <= 1e-9);
    }
}
