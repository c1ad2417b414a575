use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Driver, DriverParams, EventSequence, KernelSupport, ModelParams};

/// Delays `t − t*(t)` to the most recent driver event that fall in `[a, b]`.
///
/// Events preceding every driver event are skipped.
pub fn empirical_delays(events: &EventSequence, driver: &Driver, support: KernelSupport) -> Vec<f64> {
    let times = driver.times();
    events
        .times()
        .iter()
        .filter_map(|&t| {
            let idx = times.partition_point(|&ti| ti <= t);
            let delay = t - times.get(idx.checked_sub(1)?)?;
            support.contains(delay).then_some(delay)
        })
        .collect()
}

/// Sort-and-sweep merge of closed intervals.
pub(crate) fn merge_intervals(intervals: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    for &(s, e) in intervals {
        if !(s.is_finite() && e.is_finite()) || e < s {
            return Err(Error::invalid(format!("bad interval [{s}, {e}]")));
        }
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (s, e) in sorted {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    Ok(merged)
}

/// Lebesgue measure of a union of closed intervals.
pub fn interval_union_measure(intervals: &[(f64, f64)]) -> Result<f64> {
    Ok(merge_intervals(intervals)?.iter().map(|(s, e)| e - s).sum())
}

pub(crate) fn shifted_supports(driver: &Driver, support: KernelSupport) -> Vec<(f64, f64)> {
    driver.times().iter().map(|&t| (t + support.a(), t + support.b())).collect()
}

/// Number of `times` inside a merged (sorted, disjoint) interval list.
pub(crate) fn count_inside(times: &[f64], merged: &[(f64, f64)]) -> usize {
    times
        .iter()
        .filter(|&&t| {
            let k = merged.partition_point(|iv| iv.1 < t);
            merged.get(k).is_some_and(|iv| iv.0 <= t)
        })
        .count()
}

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-2;

/// Smart-start initial parameters, with initial σ floored at the default ε.
pub fn smart_start(
    events: &EventSequence,
    drivers: &[Driver],
    support: KernelSupport,
) -> Result<ModelParams> {
    smart_start_with_floor(events, drivers, support, DEFAULT_SIGMA_FLOOR)
}

/// Smart-start initialisation.
///
/// - `μ⁽⁰⁾`: rate of the events lying outside every shifted support
///   `[t' + a, t' + b]`, over the measure left uncovered.
/// - `α_p⁽⁰⁾`: excess rate of delays on driver `p`'s supports over `μ⁽⁰⁾`,
///   clamped at zero.
/// - `m_p⁽⁰⁾`, `σ_p⁽⁰⁾`: mean and standard deviation of the empirical delays.
///
/// A driver with no delay in `[a, b]` starts at `α = 0`, `m = (a + b)/2`,
/// `σ = (b − a)/4`.
pub fn smart_start_with_floor(
    events: &EventSequence,
    drivers: &[Driver],
    support: KernelSupport,
    sigma_floor: f64,
) -> Result<ModelParams> {
    let all: Vec<(f64, f64)> = drivers.iter().flat_map(|d| shifted_supports(d, support)).collect();
    let union = merge_intervals(&all)?;
    let covered: f64 = union.iter().map(|(s, e)| e - s).sum();
    let uncovered = events.duration() - covered;
    if uncovered <= 0.0 {
        return Err(Error::Initialization(format!(
            "kernel supports cover the whole horizon (measure {covered} >= T = {}); \
             use a smaller b or an explicit initialisation",
            events.duration()
        )));
    }
    let inside = count_inside(events.times(), &union);
    let mu = (events.len() - inside) as f64 / uncovered;

    let alpha = |d: &Driver, n_delays: usize| -> Result<f64> {
        let measure = interval_union_measure(&shifted_supports(d, support))?;
        Ok((n_delays as f64 / measure - mu).max(0.0))
    };
    moment_params(events, drivers, support, sigma_floor, mu, alpha)
}

/// `(α, m, σ)` from the empirical delay moments of each driver.
fn moment_params(
    events: &EventSequence,
    drivers: &[Driver],
    support: KernelSupport,
    sigma_floor: f64,
    mu: f64,
    alpha: impl Fn(&Driver, usize) -> Result<f64>,
) -> Result<ModelParams> {
    let mut per_driver = BTreeMap::new();
    for d in drivers {
        let delays = empirical_delays(events, d, support);
        let params = if delays.is_empty() {
            DriverParams { alpha: 0.0, m: 0.5 * (support.a() + support.b()), sigma: 0.25 * support.width() }
        } else {
            let n = delays.len() as f64;
            let m = delays.iter().sum::<f64>() / n;
            let var = delays.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            DriverParams { alpha: alpha(d, delays.len())?, m, sigma: var.sqrt().max(sigma_floor) }
        };
        if per_driver.insert(d.id().to_string(), params).is_some() {
            return Err(Error::validation(format!("duplicate driver id '{}'", d.id())));
        }
    }
    ModelParams::new(mu, per_driver, support)
}

/// Start used when the shifted supports leave no baseline-only time.
///
/// Half of the events go to the baseline, `μ⁽⁰⁾ = #events / 2T`, and the
/// other half is spread evenly over all driver events,
/// `α_p⁽⁰⁾ = #events / (2 Σ_p n_p)`. Kernel moments are as in the smart start.
pub fn covered_horizon_start(
    events: &EventSequence,
    drivers: &[Driver],
    support: KernelSupport,
    sigma_floor: f64,
) -> Result<ModelParams> {
    let mu = 0.5 * events.mle_rate();
    let n_driver: usize = drivers.iter().map(Driver::len).sum();
    let alpha = 0.5 * events.len() as f64 / n_driver.max(1) as f64;
    moment_params(events, drivers, support, sigma_floor, mu, |_, _| Ok(alpha))
}
