use mvrisk::harness::{run_experiment_with, SeedSchedule};
use mvrisk::market::build_ensemble;
use mvrisk::moments::empirical_moments;
use mvrisk::replica::epsilon_quenched;
use mvrisk::{run_experiment, ConstraintSpec, ExperimentConfig};

fn small(n: usize, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        n,
        p: 2 * n,
        trials,
        r_grid: vec![1.0, 1.3, 1.6],
        ..ExperimentConfig::desk()
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn summary_does_not_depend_on_worker_count() {
    let cfg = small(40, 12);
    let one = in_pool(1, || run_experiment(&cfg).unwrap());
    let four = in_pool(4, || run_experiment(&cfg).unwrap());
    assert_eq!(one.points, four.points);
    assert_eq!(one.trials, four.trials);
}

#[test]
fn repeated_schedule_has_zero_spread() {
    let cfg = small(30, 2);
    let s = run_experiment_with(&cfg, SeedSchedule::Repeated).unwrap();
    for p in &s.points {
        assert_eq!(p.eps.stderr, 0.0);
        assert_eq!(p.sharpe.stderr, 0.0);
    }
}

#[test]
fn empirical_moment_theory_self_averages() {
    // Mean |ε(empirical moments) − ε(true moments)| should fall like N^{-1/2}.
    let cfg = ExperimentConfig::desk();
    let truth = cfg.true_moments().unwrap();
    let c = ConstraintSpec::new(cfg.rho, 1.3, cfg.r0).unwrap();
    let alpha = cfg.alpha();
    let eps_true = epsilon_quenched(&truth, alpha, &c).unwrap();
    let spread = |n: usize| {
        let trials = 200;
        (0..trials)
            .map(|s| {
                let ens = build_ensemble(&cfg.pareto_r, &cfg.pareto_h, n, cfg.r0, 1000 + s).unwrap();
                let e = epsilon_quenched(&empirical_moments(&ens), alpha, &c).unwrap();
                (e - eps_true).abs() / eps_true
            })
            .sum::<f64>()
            / trials as f64
    };
    let (small, large) = (spread(400), spread(6400));
    let ratio = small / large;
    assert!(ratio > 2.8 && ratio < 5.5, "expected about 4, got {ratio}");
    assert!(small < 0.1);
}

#[test]
fn kappa_concentrates_as_the_market_grows() {
    let mut spreads = Vec::new();
    for n in [100, 250, 500] {
        let s = run_experiment(&small(n, 24)).unwrap();
        let k = s.points[1].kappa;
        let target = s.alpha / (s.alpha - 1.0);
        assert!((k.mean - target).abs() / target < 0.05, "N={n}: mean κ {}", k.mean);
        spreads.push(k.sd);
    }
    assert!(spreads[0] > spreads[1] && spreads[1] > spreads[2], "{spreads:?}");
}
