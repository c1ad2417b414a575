//! Simulate the two-kernel benchmark once and recover its parameters with EM.
//!
//! ```bash
//! cargo run --release --example fit_synthetic -- [T] [keep_fraction] [seed]
//! ```

use std::time::Instant;

use driven_pp::em::{run_em, EmConfig};
use driven_pp::eval::{relative_linf, RecoveryConfig};
use driven_pp::simulate::{gen_drivers, thinning_simulate, DriverGenSpec};

fn main() -> driven_pp::Result<()> {
    let mut args = std::env::args().skip(1);
    let duration: f64 = args.next().map_or(10_000.0, |s| s.parse().expect("T"));
    let keep: f64 = args.next().map_or(0.6, |s| s.parse().expect("keep_fraction"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let bench = RecoveryConfig::two_kernel_benchmark(vec![duration], vec![keep], 1);
    let truth = bench.truth()?;
    let specs = bench
        .drivers
        .iter()
        .map(|d| Ok((d.id.clone(), DriverGenSpec::new(d.isi, keep, duration)?)))
        .collect::<driven_pp::Result<Vec<_>>>()?;
    let drivers = gen_drivers(&specs, seed)?;
    let events = thinning_simulate(&truth, &drivers, duration, seed)?;
    println!("simulated {} events on [0, {duration}]", events.len());

    let clock = Instant::now();
    let report = run_em(&events, &drivers, truth.support, &EmConfig::default())?;
    let elapsed = clock.elapsed().as_secs_f64();
    println!(
        "EM: {} iterations, {}, {elapsed:.2} s",
        report.iterations_run,
        report.termination.as_str()
    );
    println!(
        "nll: {:.4} -> {:.4}",
        report.nll_history[0],
        report.nll_history.last().copied().unwrap_or(f64::NAN)
    );
    println!("mu: true {:.4}, fitted {:.4}", truth.mu, report.params.mu);
    for d in &bench.drivers {
        let p = report.params.driver(&d.id)?;
        println!(
            "{:>6}: alpha {:.4} (true {}), m {:.4} (true {}), sigma {:.4} (true {}), rel linf {:.4}",
            d.id,
            p.alpha,
            d.params.alpha,
            p.m,
            d.params.m,
            p.sigma,
            d.params.sigma,
            relative_linf(&truth, &report.params, &d.id, 1e-3)?
        );
    }
    Ok(())
}
