//! Evaluate a truncated Gaussian kernel and the intensity it induces around
//! a few stimuli, printed as a table you can plot.
//!
//! ```bash
//! cargo run --example kernel_intensity
//! ```

use driven_pp::model::{
    intensity_at, intensity_integral, Driver, DriverParams, KernelSupport, ModelParams, TruncGauss,
};

fn main() -> driven_pp::Result<()> {
    let support = KernelSupport::new(0.03, 0.8)?;
    let evoked = DriverParams::new(0.8, 0.4, 0.05)?;
    let induced = DriverParams::new(0.8, 0.4, 0.2)?;
    let params = ModelParams::baseline(0.8, support)?
        .with_driver("evoked", evoked)
        .with_driver("induced", induced);
    let drivers = [Driver::new("evoked", vec![1.0, 3.0])?, Driver::new("induced", vec![2.0, 3.2])?];

    for (name, p) in [("evoked", &evoked), ("induced", &induced)] {
        let k = TruncGauss::from_params(p, support)?;
        println!("{name}: log C = {:.6}, peak {:.4}", k.log_c(), k.peak());
    }

    println!("t,lambda");
    for i in 0..=500 {
        let t = i as f64 * 0.01;
        println!("{t:.2},{:.6}", intensity_at(t, &params, &drivers)?);
    }
    println!("integral over [0, 5]: {:.6}", intensity_integral(&params, &drivers, 5.0)?);
    Ok(())
}
