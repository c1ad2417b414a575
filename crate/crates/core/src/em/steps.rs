use crate::error::{Error, Result};
use crate::model::{
    checked_log, Driver, DriverParams, EventSequence, KernelSupport, ModelParams, TruncGauss,
};

use super::EmConfig;

/// Every `(event, delay)` pair whose delay falls in `[a, b]`, per driver.
///
/// Delays do not depend on the parameters, so the table is built once per fit.
#[derive(Debug, Clone)]
pub(crate) struct DelayTable {
    pub n_events: usize,
    pub pairs: Vec<Vec<(usize, f64)>>,
}

impl DelayTable {
    pub fn new(events: &EventSequence, drivers: &[Driver], support: KernelSupport) -> Self {
        let pairs = drivers
            .iter()
            .map(|d| {
                let times = d.times();
                let mut out = Vec::new();
                for (j, &t) in events.times().iter().enumerate() {
                    for i in d.active_range(t, support) {
                        out.push((j, t - times[i]));
                    }
                }
                out
            })
            .collect();
        Self { n_events: events.len(), pairs }
    }
}

/// Posterior assignment of every event to the baseline or to a driver.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    driver_ids: Vec<String>,
    baseline: Vec<f64>,
    per_driver: Vec<Vec<f64>>,
    /// `α_p κ_p(d) / λ(t)` for every pair of the delay table.
    pair_weights: Vec<Vec<f64>>,
    /// Negative log-likelihood of the parameters the responsibilities came from.
    nll: f64,
}

impl Responsibilities {
    /// `P_k(t)` per event.
    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    /// `P_p(t)` per event for the driver `id`.
    pub fn driver(&self, id: &str) -> Option<&[f64]> {
        let p = self.driver_ids.iter().position(|d| d == id)?;
        Some(&self.per_driver[p])
    }

    pub fn driver_ids(&self) -> &[String] {
        &self.driver_ids
    }

    pub fn nll(&self) -> f64 {
        self.nll
    }

    /// `max_t |P_k(t) + Σ_p P_p(t) − 1|`.
    pub fn simplex_deviation(&self) -> f64 {
        (0..self.baseline.len())
            .map(|j| {
                let total = self.per_driver.iter().fold(self.baseline[j], |acc, p| acc + p[j]);
                (total - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn e_step_table(
    mu: f64,
    params: &[DriverParams],
    drivers: &[Driver],
    events: &EventSequence,
    support: KernelSupport,
    table: &DelayTable,
) -> Result<Responsibilities> {
    let n = table.n_events;
    let kernels = params
        .iter()
        .map(|p| TruncGauss::from_params(p, support))
        .collect::<Result<Vec<_>>>()?;

    let mut kernel_values: Vec<Vec<f64>> = Vec::with_capacity(drivers.len());
    let mut kernel_sums: Vec<Vec<f64>> = Vec::with_capacity(drivers.len());
    for (pairs, k) in table.pairs.iter().zip(&kernels) {
        let mut sums = vec![0.0; n];
        let values: Vec<f64> = pairs
            .iter()
            .map(|&(j, d)| {
                let v = k.density(d);
                sums[j] += v;
                v
            })
            .collect();
        kernel_values.push(values);
        kernel_sums.push(sums);
    }

    let mut lambda = vec![mu; n];
    for (p, sums) in kernel_sums.iter().enumerate() {
        let alpha = params[p].alpha;
        for (l, s) in lambda.iter_mut().zip(sums) {
            *l += alpha * s;
        }
    }
    let mut log_sum = 0.0;
    for (l, &t) in lambda.iter().zip(events.times()) {
        log_sum += checked_log(*l, t)?;
    }

    let baseline = lambda.iter().map(|l| mu / l).collect();
    let per_driver = kernel_sums
        .iter()
        .zip(params)
        .map(|(sums, p)| sums.iter().zip(&lambda).map(|(s, l)| p.alpha * s / l).collect())
        .collect();
    let pair_weights = table
        .pairs
        .iter()
        .zip(&kernel_values)
        .zip(params)
        .map(|((pairs, values), p)| {
            pairs.iter().zip(values).map(|(&(j, _), v)| p.alpha * v / lambda[j]).collect()
        })
        .collect();

    let integral = params
        .iter()
        .zip(drivers)
        .fold(mu * events.duration(), |acc, (p, d)| acc + p.alpha * d.len() as f64);
    Ok(Responsibilities {
        driver_ids: drivers.iter().map(|d| d.id().to_string()).collect(),
        baseline,
        per_driver,
        pair_weights,
        nll: integral - log_sum,
    })
}

/// Jacobi M-step: every update reads iteration-n values only.
pub(crate) fn m_step_table(
    params: &[DriverParams],
    resp: &Responsibilities,
    drivers: &[Driver],
    events: &EventSequence,
    support: KernelSupport,
    table: &DelayTable,
    sigma_floor: f64,
) -> Result<(f64, Vec<DriverParams>)> {
    let mu = resp.baseline.iter().sum::<f64>() / events.duration();
    let mut next = Vec::with_capacity(params.len());
    for (p, current) in params.iter().enumerate() {
        let weights = &resp.pair_weights[p];
        let pairs = &table.pairs[p];
        let mass: f64 = resp.per_driver[p].iter().sum();
        let n_p = drivers[p].len();
        if !(mass > 0.0) || n_p == 0 {
            next.push(DriverParams { alpha: 0.0, ..*current });
            continue;
        }
        let k = TruncGauss::from_params(current, support)?;
        let alpha = (mass / n_p as f64).max(0.0);

        let mut first = 0.0;
        let mut second = 0.0;
        for (&(_, d), &w) in pairs.iter().zip(weights) {
            let u = d - current.m;
            first += w * d;
            second += w * u * u;
        }
        let sigma2 = current.sigma * current.sigma;
        let m = first / mass - sigma2 * k.ratio_m();
        let ratio_sigma = k.ratio_sigma();
        let sigma = if ratio_sigma > 0.0 && ratio_sigma.is_finite() {
            (second / mass / ratio_sigma).cbrt().max(sigma_floor)
        } else {
            current.sigma.max(sigma_floor)
        };
        if !(m.is_finite() && sigma.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite kernel update for driver '{}' (m = {m}, sigma = {sigma})",
                drivers[p].id()
            )));
        }
        next.push(DriverParams { alpha, m, sigma });
    }
    Ok((mu, next))
}

/// Event-to-source responsibilities under `params`.
pub fn e_step(
    params: &ModelParams,
    events: &EventSequence,
    drivers: &[Driver],
) -> Result<Responsibilities> {
    params.validate()?;
    let aligned = params.aligned(drivers)?;
    let table = DelayTable::new(events, drivers, params.support);
    e_step_table(params.mu, &aligned, drivers, events, params.support, &table)
}

/// Closed-form baseline/weight updates and fixed-point kernel updates.
///
/// `resp` must come from [`e_step`] with the same `params`, events and drivers.
pub fn m_step(
    params: &ModelParams,
    resp: &Responsibilities,
    events: &EventSequence,
    drivers: &[Driver],
    config: &EmConfig,
) -> Result<ModelParams> {
    config.validate()?;
    let aligned = params.aligned(drivers)?;
    let table = DelayTable::new(events, drivers, params.support);
    let shape_ok = resp.baseline.len() == events.len()
        && resp.driver_ids.len() == drivers.len()
        && resp.driver_ids.iter().zip(drivers).all(|(id, d)| id == d.id())
        && resp.pair_weights.iter().zip(&table.pairs).all(|(w, p)| w.len() == p.len());
    if !shape_ok {
        return Err(Error::invalid("responsibilities do not match the events and drivers"));
    }
    let (mu, next) = m_step_table(
        &aligned,
        resp,
        drivers,
        events,
        params.support,
        &table,
        config.sigma_floor,
    )?;
    let per_driver = drivers.iter().map(|d| d.id().to_string()).zip(next).collect();
    ModelParams::new(mu, per_driver, params.support)
}
