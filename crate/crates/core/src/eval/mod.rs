//! Recovery metrics, the recovery experiment grid and the segment t-test.

mod experiment;
mod ttest;

pub use experiment::{
    aggregate, recovery_experiment, runtime_by_duration, write_aggregate_csv, write_recovery_csv,
    write_runtime_csv, AggregateRow, DriverTruth, RecoveryCell, RecoveryConfig, RuntimeRow,
};
pub use ttest::{segment_ttest, tiled_baseline_segments, welch_ttest, TTestResult};

use crate::error::{Error, Result};
use crate::model::{ModelParams, TruncGauss};

/// Default grid resolution of the ℓ∞ metrics, seconds.
pub const DEFAULT_GRID_STEP: f64 = 1e-3;

/// `t ↦ μ + α κ(t)` for one driver, i.e. the intensity after a lone stimulus
/// at time zero.
fn single_driver_curve(params: &ModelParams, driver_id: &str) -> Result<impl Fn(f64) -> f64> {
    let p = *params.driver(driver_id)?;
    let k = TruncGauss::from_params(&p, params.support)?;
    let mu = params.mu;
    Ok(move |t: f64| mu + p.alpha * k.density(t))
}

fn grid(step: f64, end: f64) -> Result<impl Iterator<Item = f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("grid_step must be > 0, got {step}")));
    }
    let n = ((end + step) / step).ceil() as usize;
    Ok((0..=n).map(move |k| k as f64 * step))
}

fn same_support(a: &ModelParams, b: &ModelParams) -> Result<()> {
    if a.support != b.support {
        return Err(Error::invalid("true and estimated parameters use different supports"));
    }
    Ok(())
}

/// `max_t |λ*(t) − λ̂(t)|` of the single-driver curves on a uniform grid over
/// `[0, b + step]`.
pub fn linf_distance(
    true_params: &ModelParams,
    est_params: &ModelParams,
    driver_id: &str,
    grid_step: f64,
) -> Result<f64> {
    same_support(true_params, est_params)?;
    let truth = single_driver_curve(true_params, driver_id)?;
    let est = single_driver_curve(est_params, driver_id)?;
    Ok(grid(grid_step, true_params.support.b())?
        .map(|t| (truth(t) - est(t)).abs())
        .fold(0.0, f64::max))
}

/// [`linf_distance`] divided by the maximum of the true curve.
pub fn relative_linf(
    true_params: &ModelParams,
    est_params: &ModelParams,
    driver_id: &str,
    grid_step: f64,
) -> Result<f64> {
    let truth = single_driver_curve(true_params, driver_id)?;
    let peak = grid(grid_step, true_params.support.b())?.map(truth).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::invalid(format!(
            "true intensity of driver '{driver_id}' is identically zero"
        )));
    }
    Ok(linf_distance(true_params, est_params, driver_id, grid_step)? / peak)
}
