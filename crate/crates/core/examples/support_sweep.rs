//! Refit the same synthetic data with growing kernel supports `[0, b]`.
//!
//! Once `b` exceeds the inter-stimulus interval, every kernel window covers
//! the next stimuli too and the fitted kernels flatten out. Each cell shows
//! `alpha / peak of alpha·kernel`.
//!
//! ```bash
//! cargo run --release --example support_sweep -- [n_seeds]
//! ```

use driven_pp::em::{run_em, EmConfig, Init};
use driven_pp::eval::RecoveryConfig;
use driven_pp::model::{KernelSupport, TruncGauss};
use driven_pp::simulate::{gen_drivers, thinning_simulate, DriverGenSpec};

fn main() -> driven_pp::Result<()> {
    let n_seeds: u64 = std::env::args().nth(1).map_or(5, |s| s.parse().expect("n_seeds"));
    let b_values = [0.5, 0.8, 2.0, 8.0];
    let (duration, keep) = (10_000.0, 0.6);
    let bench = RecoveryConfig::two_kernel_benchmark(vec![duration], vec![keep], 1);
    let truth = bench.truth()?;
    // Wide supports cover the whole horizon, where the smart start is undefined.
    let config = EmConfig { init: Init::SmartStartOrCovered, ..EmConfig::default() };

    print!("seed");
    for b in b_values {
        for d in &bench.drivers {
            print!("  {:>15}", format!("{}@b={b}", d.id));
        }
    }
    println!();
    for seed in 0..n_seeds {
        let specs = bench
            .drivers
            .iter()
            .map(|d| Ok((d.id.clone(), DriverGenSpec::new(d.isi, keep, duration)?)))
            .collect::<driven_pp::Result<Vec<_>>>()?;
        let drivers = gen_drivers(&specs, seed)?;
        let events = thinning_simulate(&truth, &drivers, duration, seed)?;
        print!("{seed:>4}");
        for b in b_values {
            let support = KernelSupport::new(0.0, b)?;
            let report = run_em(&events, &drivers, support, &config)?;
            for d in &bench.drivers {
                let p = report.params.driver(&d.id)?;
                let peak = p.alpha * TruncGauss::from_params(p, support)?.peak();
                print!("  {:>15}", format!("{:.3}/{:.3}", p.alpha, peak));
            }
        }
        println!();
    }
    Ok(())
}
