//! Recovery error of the two-kernel benchmark over a grid of durations and
//! stimulus densities, fitted in parallel.
//!
//! ```bash
//! cargo run --release --example recovery_grid -- [n_seeds]
//! ```

use driven_pp::eval::{aggregate, recovery_experiment, runtime_by_duration, RecoveryConfig};

fn main() -> driven_pp::Result<()> {
    let n_seeds: usize = std::env::args().nth(1).map_or(10, |s| s.parse().expect("n_seeds"));
    let config = RecoveryConfig::two_kernel_benchmark(
        vec![1000.0, 3000.0, 10_000.0],
        vec![0.2, 0.6, 1.0],
        n_seeds,
    );
    let cells = recovery_experiment(&config)?;

    println!("{:>8} {:>5} {:>6} {:>10} {:>10}", "T", "keep", "kernel", "mean", "std");
    for row in aggregate(&cells) {
        println!(
            "{:>8} {:>5} {:>6} {:>10.4} {:>10.4}",
            row.duration, row.keep_fraction, row.driver_id, row.mean, row.std
        );
    }
    for row in runtime_by_duration(&cells) {
        println!("T={}: {} fits, {:.3} s per fit", row.duration, row.n_fits, row.mean_s);
    }
    Ok(())
}
