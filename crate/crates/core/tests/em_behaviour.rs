mod common;

use driven_pp::em::{e_step, empirical_delays, m_step, run_em, smart_start, EmConfig, Init, Termination};
use driven_pp::eval::RecoveryConfig;
use driven_pp::model::{DriverParams, KernelSupport, ModelParams};

fn max_change(a: &ModelParams, b: &ModelParams) -> f64 {
    let mut worst = (a.mu - b.mu).abs() / a.mu.abs().max(1.0);
    for (id, p) in &a.per_driver {
        let q = b.per_driver[id];
        for (x, y) in [(p.alpha, q.alpha), (p.m, q.m), (p.sigma, q.sigma)] {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    worst
}

#[test]
fn converged_fit_is_a_fixed_point() {
    let bench = RecoveryConfig::two_kernel_benchmark(vec![2000.0], vec![0.6], 1);
    let (_, drivers, events) = common::benchmark_data(&bench, 2000.0, 0.6, 7);
    let config = EmConfig { n_iterations: 3000, ..EmConfig::default() };
    let report = run_em(&events, &drivers, bench.support, &config).unwrap();
    assert_eq!(report.termination, Termination::Completed);
    let resp = e_step(&report.params, &events, &drivers).unwrap();
    let next = m_step(&report.params, &resp, &events, &drivers, &config).unwrap();
    let change = max_change(&report.params, &next);
    assert!(change <= 1e-10, "fixed point moved by {change}");
}

#[test]
fn public_steps_reproduce_run_em() {
    let (truth, drivers, events) = common::headline(3);
    let config = EmConfig { n_iterations: 3, ..EmConfig::default() };
    let report = run_em(&events, &drivers, truth.support, &config).unwrap();
    let mut p = smart_start(&events, &drivers, truth.support).unwrap();
    for _ in 0..3 {
        let resp = e_step(&p, &events, &drivers).unwrap();
        p = m_step(&p, &resp, &events, &drivers, &config).unwrap();
    }
    assert_eq!(p, report.params);
}

#[test]
fn headline_fit_is_monotone_and_on_simplex() {
    let (truth, drivers, events) = common::headline(0);
    let report = run_em(&events, &drivers, truth.support, &EmConfig::default()).unwrap();
    assert_eq!(report.termination, Termination::Completed);
    assert_eq!(report.iterations_run, 50);
    assert_eq!(report.nll_history.len(), 51);
    assert!(report.diagnostics.monotonicity_violations.is_empty(), "{:?}", report.diagnostics);
    assert!(report.diagnostics.simplex_deviation.iter().all(|&d| d <= 1e-12));
}

#[test]
fn fits_are_bitwise_deterministic() {
    let (truth, drivers, events) = common::headline(11);
    let a = run_em(&events, &drivers, truth.support, &EmConfig::default()).unwrap();
    let b = run_em(&events, &drivers, truth.support, &EmConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn delays_concentrate_near_the_true_mean() {
    let (truth, drivers, events) = common::headline(1);
    for d in &drivers {
        let delays = empirical_delays(&events, d, truth.support);
        let near = delays.iter().filter(|&&x| (x - 0.4).abs() <= 0.1).count() as f64;
        let far = delays.iter().filter(|&&x| (x - 0.7).abs() <= 0.1).count() as f64;
        // Same window width; the kernel excess sits around m = 0.4.
        assert!(near > 1.5 * far, "{}: {near} vs {far}", d.id());
    }
}

#[test]
fn null_data_exits_or_stays_near_zero() {
    let mut bench = RecoveryConfig::two_kernel_benchmark(vec![10_000.0], vec![0.6], 1);
    for d in &mut bench.drivers {
        d.params.alpha = 0.0;
    }
    for seed in 0..5 {
        let (_, drivers, events) = common::benchmark_data(&bench, 10_000.0, 0.6, seed);
        let r = run_em(&events, &drivers, bench.support, &EmConfig::default()).unwrap();
        match r.termination {
            Termination::AlphaZeroMleExit | Termination::DivergedFallback => {
                assert_eq!(r.params.mu, events.len() as f64 / 10_000.0);
            }
            Termination::Completed => {
                assert!(r.params.per_driver.values().all(|p| p.alpha <= 0.05), "{:?}", r.params);
            }
        }
    }
}

#[test]
fn zero_alpha_start_exits_immediately() {
    let (truth, drivers, events) = common::headline(2);
    let mut start = truth.clone();
    for p in start.per_driver.values_mut() {
        p.alpha = 0.0;
    }
    let config = EmConfig { init: Init::Explicit(start), ..EmConfig::default() };
    let r = run_em(&events, &drivers, truth.support, &config).unwrap();
    assert_eq!(r.termination, Termination::AlphaZeroMleExit);
    assert_eq!(r.iterations_run, 0);
    assert_eq!(r.params.mu, events.mle_rate());
    assert_eq!(r.nll_history.len(), 1);
}

#[test]
fn far_away_start_triggers_divergence_fallback() {
    let (truth, drivers, events) = common::headline(4);
    // A kernel mean far beyond b with a tiny spread barely sees any event.
    let start = ModelParams::baseline(0.8, truth.support)
        .unwrap()
        .with_driver("sharp", DriverParams::new(0.8, 2.3, 0.01).unwrap())
        .with_driver("wide", DriverParams::new(0.8, 0.4, 0.2).unwrap());
    let config = EmConfig { init: Init::Explicit(start), ..EmConfig::default() };
    let r = run_em(&events, &drivers, truth.support, &config).unwrap();
    assert_eq!(r.termination, Termination::DivergedFallback);
    assert!(r.params.all_alpha_zero());
    assert_eq!(r.params.mu, events.mle_rate());
    assert!(r.diagnostics.divergence_iteration.is_some());
}

#[test]
fn explicit_start_must_match_drivers_and_support() {
    let (truth, drivers, events) = common::headline(5);
    let other = KernelSupport::new(0.0, 0.8).unwrap();
    let bad_support = EmConfig { init: Init::Explicit(truth.clone()), ..EmConfig::default() };
    assert!(run_em(&events, &drivers, other, &bad_support).is_err());
    let mut missing = truth.clone();
    missing.per_driver.remove("wide");
    let bad_ids = EmConfig { init: Init::Explicit(missing), ..EmConfig::default() };
    assert!(run_em(&events, &drivers, truth.support, &bad_ids).is_err());
}
