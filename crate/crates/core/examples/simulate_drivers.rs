//! Generate stimulus streams on a jittered grid and simulate the driven
//! process by thinning; reports how tight the piecewise majorant is.
//!
//! ```bash
//! cargo run --example simulate_drivers -- [T] [seed]
//! ```

use driven_pp::model::{intensity_integral, DriverParams, KernelSupport, ModelParams};
use driven_pp::simulate::{gen_drivers, thinning_simulate_with_stats, DriverGenSpec};

fn main() -> driven_pp::Result<()> {
    let mut args = std::env::args().skip(1);
    let duration: f64 = args.next().map_or(600.0, |s| s.parse().expect("T"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let support = KernelSupport::new(0.03, 0.8)?;
    let params = ModelParams::baseline(0.5, support)?
        .with_driver("auditory", DriverParams::new(1.2, 0.1, 0.03)?)
        .with_driver("visual", DriverParams::new(0.6, 0.5, 0.15)?);
    let specs = vec![
        ("auditory".to_string(), DriverGenSpec::new(2.0, 0.5, duration)?),
        ("visual".to_string(), DriverGenSpec::new(3.0, 0.8, duration)?),
    ];
    let drivers = gen_drivers(&specs, seed)?;
    for (d, (_, spec)) in drivers.iter().zip(&specs) {
        println!("{}: {} of {} grid slots kept", d.id(), d.len(), spec.grid_size());
    }

    let (events, stats) = thinning_simulate_with_stats(&params, &drivers, duration, seed)?;
    let expected = intensity_integral(&params, &drivers, duration)?;
    println!("events: {} (expected {expected:.1})", events.len());
    println!(
        "thinning: {} candidates, {} accepted, acceptance {:.3} (ideal {:.3})",
        stats.candidates,
        stats.accepted,
        stats.accepted as f64 / stats.candidates as f64,
        expected / stats.majorant_integral
    );
    Ok(())
}
