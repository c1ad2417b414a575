//! Drive EM by hand: smart start, then explicit E- and M-steps, printing the
//! negative log-likelihood and the parameters after each iteration.
//!
//! ```bash
//! cargo run --release --example em_steps -- [iterations]
//! ```

use driven_pp::em::{e_step, m_step, smart_start, EmConfig};
use driven_pp::eval::RecoveryConfig;
use driven_pp::model::nll;
use driven_pp::simulate::{gen_drivers, thinning_simulate, DriverGenSpec};

fn main() -> driven_pp::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(10, |s| s.parse().expect("iterations"));
    let duration = 2000.0;
    let bench = RecoveryConfig::two_kernel_benchmark(vec![duration], vec![0.6], 1);
    let truth = bench.truth()?;
    let specs = bench
        .drivers
        .iter()
        .map(|d| Ok((d.id.clone(), DriverGenSpec::new(d.isi, 0.6, duration)?)))
        .collect::<driven_pp::Result<Vec<_>>>()?;
    let drivers = gen_drivers(&specs, 3)?;
    let events = thinning_simulate(&truth, &drivers, duration, 3)?;

    let config = EmConfig::default();
    let mut params = smart_start(&events, &drivers, bench.support)?;
    for k in 0..=n {
        let line: Vec<String> = params
            .per_driver
            .iter()
            .map(|(id, d)| format!("{id}: a={:.3} m={:.3} s={:.3}", d.alpha, d.m, d.sigma))
            .collect();
        println!("{k:>3} nll={:.4} mu={:.3} {}", nll(&params, &events, &drivers)?, params.mu, line.join("  "));
        if k < n {
            let resp = e_step(&params, &events, &drivers)?;
            params = m_step(&params, &resp, &events, &drivers, &config)?;
        }
    }
    println!("truth: nll={:.4}", nll(&truth, &events, &drivers)?);
    Ok(())
}
