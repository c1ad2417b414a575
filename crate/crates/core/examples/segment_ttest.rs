//! Model-free check of stimulus locking: compare event rates inside the
//! kernel windows with rates on baseline tiles, for a driven and a silent
//! stimulus channel.
//!
//! ```bash
//! cargo run --example segment_ttest
//! ```

use driven_pp::eval::segment_ttest;
use driven_pp::model::{DriverParams, KernelSupport, ModelParams};
use driven_pp::simulate::{gen_drivers, thinning_simulate, DriverGenSpec};

fn main() -> driven_pp::Result<()> {
    let duration = 3000.0;
    let support = KernelSupport::new(0.03, 0.8)?;
    let params = ModelParams::baseline(0.8, support)?
        .with_driver("driven", DriverParams::new(0.5, 0.3, 0.1)?)
        .with_driver("silent", DriverParams::new(0.0, 0.3, 0.1)?);
    let specs = vec![
        ("driven".to_string(), DriverGenSpec::new(2.0, 0.6, duration)?),
        ("silent".to_string(), DriverGenSpec::new(2.5, 0.6, duration)?),
    ];
    let drivers = gen_drivers(&specs, 11)?;
    let events = thinning_simulate(&params, &drivers, duration, 11)?;

    println!("driver,t,p,df,n_support,n_baseline");
    for d in &drivers {
        let r = segment_ttest(&events, d, support)?;
        println!(
            "{},{:.3},{:.3e},{:.1},{},{}",
            d.id(),
            r.t_statistic,
            r.p_value,
            r.df,
            r.n_support,
            r.n_baseline
        );
    }
    Ok(())
}
