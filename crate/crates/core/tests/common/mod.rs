#![allow(dead_code)]

pub mod quad;

use driven_pp::eval::RecoveryConfig;
use driven_pp::model::{Driver, EventSequence, ModelParams};
use driven_pp::simulate::{gen_drivers, thinning_simulate, DriverGenSpec};

/// Drivers and events of the two-kernel benchmark for one seed.
pub fn benchmark_data(
    bench: &RecoveryConfig,
    duration: f64,
    keep: f64,
    seed: u64,
) -> (ModelParams, Vec<Driver>, EventSequence) {
    let truth = bench.truth().unwrap();
    let specs: Vec<(String, DriverGenSpec)> = bench
        .drivers
        .iter()
        .map(|d| (d.id.clone(), DriverGenSpec::new(d.isi, keep, duration).unwrap()))
        .collect();
    let drivers = gen_drivers(&specs, seed).unwrap();
    let events = thinning_simulate(&truth, &drivers, duration, seed).unwrap();
    (truth, drivers, events)
}

pub fn headline(seed: u64) -> (ModelParams, Vec<Driver>, EventSequence) {
    let bench = RecoveryConfig::two_kernel_benchmark(vec![10_000.0], vec![0.6], 1);
    benchmark_data(&bench, 10_000.0, 0.6, seed)
}

/// Survival function of the Kolmogorov distribution,
/// `2 Σ_{k≥1} (−1)^{k−1} exp(−2k²x²)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    // Below 0.2 the series converges slowly and the value is 1 to double
    // precision.
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS statistic of `sample` against the exponential law of rate
/// `rate`.
pub fn ks_statistic_exponential(sample: &[f64], rate: f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - (-rate * v).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS p-value with the small-sample correction
/// `(√n + 0.12 + 0.11/√n)·D`.
pub fn ks_pvalue_exponential(sample: &[f64], rate: f64) -> f64 {
    let d = ks_statistic_exponential(sample, rate);
    let sn = (sample.len() as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Inter-event gaps of the events that fall outside every `[t_i + a, t_i + b]`
/// after collapsing the covered time away.
pub fn baseline_gaps(events: &EventSequence, drivers: &[Driver], a: f64, b: f64) -> Vec<f64> {
    let mut windows: Vec<(f64, f64)> =
        drivers.iter().flat_map(|d| d.times().iter().map(move |&t| (t + a, t + b))).collect();
    windows.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in windows {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    // Map each uncovered event to its position on the baseline-only clock.
    let mut clock = Vec::new();
    let mut removed = 0.0;
    let mut k = 0;
    for &t in events.times() {
        while k < merged.len() && merged[k].1 < t {
            removed += merged[k].1 - merged[k].0;
            k += 1;
        }
        if k < merged.len() && merged[k].0 <= t {
            continue;
        }
        clock.push(t - removed);
    }
    clock.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Central finite difference of `f` at `x` with step `h·max(1, |x|)`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let step = h * x.abs().max(1.0);
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// A seeded random model with 1–3 drivers and events simulated from it, drawn
/// from the same ranges as the property suite.
pub fn random_instance(seed: u64, clean: bool) -> (ModelParams, Vec<Driver>, EventSequence) {
    use driven_pp::model::{boundary_clean, DriverParams, KernelSupport};
    use driven_pp::simulate::gen_driver;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let duration = rng.random_range(20.0..120.0);
    let mu = rng.random_range(0.2..2.0);
    let a = rng.random_range(0.0..1.0);
    let support = KernelSupport::new(a, a + rng.random_range(0.05..3.0)).unwrap();
    let mut params = ModelParams::baseline(mu, support).unwrap();
    let mut drivers = Vec::new();
    for i in 0..rng.random_range(1..4) {
        let id = format!("d{i}");
        let alpha = rng.random_range(0.05..2.05);
        let m = support.a() + (2.0 * rng.random_range(0.0..1.0) - 0.5) * support.width();
        let sigma = rng.random_range(0.02..1.0);
        params = params.with_driver(id.clone(), DriverParams::new(alpha, m, sigma).unwrap());
        let spec = DriverGenSpec::new(rng.random_range(0.5..4.0), 0.7, duration).unwrap();
        drivers.push(gen_driver(&id, &spec, seed.wrapping_add(i as u64)).unwrap());
    }
    if clean {
        drivers = boundary_clean(&drivers, duration, support);
    }
    let events = thinning_simulate(&params, &drivers, duration, seed).unwrap();
    (params, drivers, events)
}
