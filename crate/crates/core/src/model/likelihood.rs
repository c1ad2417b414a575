use std::collections::BTreeMap;

use super::{Driver, EventSequence, KernelSupport, ModelParams, TruncGauss};
use crate::error::{ensure_finite, Error, Result};

/// λ values below this are treated as a zero-likelihood event.
pub(crate) const INTENSITY_FLOOR: f64 = 1e-300;

/// Parameters resolved against a driver list, with kernels pre-built.
pub(crate) struct Evaluator<'a> {
    pub mu: f64,
    pub support: KernelSupport,
    pub terms: Vec<(&'a Driver, f64, TruncGauss)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(params: &ModelParams, drivers: &'a [Driver]) -> Result<Self> {
        params.validate()?;
        let terms = drivers
            .iter()
            .map(|d| {
                let p = params.driver(d.id())?;
                Ok((d, p.alpha, TruncGauss::from_params(p, params.support)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mu: params.mu, support: params.support, terms })
    }

    /// `Σ_i κ_p(t − t_i)` for one driver.
    #[inline]
    pub fn kernel_sum(&self, t: f64, driver: &Driver, kernel: &TruncGauss) -> f64 {
        let times = driver.times();
        driver.active_range(t, self.support).map(|i| kernel.density(t - times[i])).sum()
    }

    pub fn intensity(&self, t: f64) -> f64 {
        self.terms.iter().fold(self.mu, |acc, (d, alpha, k)| {
            if *alpha == 0.0 {
                acc
            } else {
                acc + alpha * self.kernel_sum(t, d, k)
            }
        })
    }

    /// Kernel mass of one driver falling inside `[0, T]`.
    pub fn kernel_mass(&self, driver: &Driver, kernel: &TruncGauss, duration: f64) -> f64 {
        let times = driver.times();
        let clean = times.partition_point(|&t| t + self.support.b() <= duration);
        let truncated: f64 = times[clean..].iter().map(|&t| kernel.cdf(duration - t)).sum();
        clean as f64 + truncated
    }

    pub fn integral(&self, duration: f64) -> f64 {
        self.terms.iter().fold(self.mu * duration, |acc, (d, alpha, k)| {
            acc + alpha * self.kernel_mass(d, k, duration)
        })
    }
}

pub(crate) fn checked_log(lambda: f64, time: f64) -> Result<f64> {
    if lambda < INTENSITY_FLOOR || lambda.is_nan() {
        Err(Error::ZeroIntensity { time })
    } else {
        Ok(lambda.ln())
    }
}

/// Intensity `λ(t)` of the driven process.
pub fn intensity_at(t: f64, params: &ModelParams, drivers: &[Driver]) -> Result<f64> {
    ensure_finite("t", t)?;
    Ok(Evaluator::new(params, drivers)?.intensity(t))
}

/// `∫_0^T λ(t) dt`.
///
/// For boundary-clean drivers (every event satisfies `t_i + b ≤ T`) this is
/// the closed form `μT + Σ_p α_p n_p`. Events whose kernel window overruns
/// `T` contribute only the kernel mass that lies inside the horizon.
pub fn intensity_integral(params: &ModelParams, drivers: &[Driver], duration: f64) -> Result<f64> {
    ensure_finite("T", duration)?;
    Ok(Evaluator::new(params, drivers)?.integral(duration))
}

/// Negative log-likelihood `∫λ − Σ_{t∈𝒜} log λ(t)`.
pub fn nll(params: &ModelParams, events: &EventSequence, drivers: &[Driver]) -> Result<f64> {
    let ev = Evaluator::new(params, drivers)?;
    let mut log_sum = 0.0;
    for &t in events.times() {
        log_sum += checked_log(ev.intensity(t), t)?;
    }
    Ok(ev.integral(events.duration()) - log_sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriverGradient {
    pub alpha: f64,
    pub m: f64,
    pub sigma: f64,
}

/// Gradient of [`nll`] over `(μ, {α_p, m_p, σ_p})`.
#[derive(Debug, Clone, PartialEq)]
pub struct NllGradient {
    pub mu: f64,
    pub per_driver: BTreeMap<String, DriverGradient>,
}

/// Analytic gradient of the negative log-likelihood.
pub fn nll_gradient(
    params: &ModelParams,
    events: &EventSequence,
    drivers: &[Driver],
) -> Result<NllGradient> {
    let ev = Evaluator::new(params, drivers)?;
    let duration = events.duration();
    let n = ev.terms.len();

    // Data terms: Σ_t (∂λ/∂θ)(t) / λ(t).
    let mut inv_lambda_sum = 0.0;
    let mut d_alpha = vec![0.0; n];
    let mut d_m = vec![0.0; n];
    let mut d_sigma = vec![0.0; n];
    let ratios: Vec<(f64, f64)> =
        ev.terms.iter().map(|(_, _, k)| (k.ratio_m(), k.ratio_sigma())).collect();
    let mut sums = vec![(0.0, 0.0, 0.0); n];
    for &t in events.times() {
        let mut lambda = ev.mu;
        for (p, (d, alpha, k)) in ev.terms.iter().enumerate() {
            let (rm, rs) = ratios[p];
            let (m, s) = (k.m(), k.sigma());
            let times = d.times();
            let mut acc = (0.0, 0.0, 0.0);
            for i in d.active_range(t, ev.support) {
                let x = t - times[i];
                let kv = k.density(x);
                let u = x - m;
                acc.0 += kv;
                acc.1 += (u / (s * s) - rm) * kv;
                acc.2 += (u * u / (s * s * s) - rs) * kv;
            }
            sums[p] = acc;
            lambda += alpha * acc.0;
        }
        checked_log(lambda, t)?;
        let inv = 1.0 / lambda;
        inv_lambda_sum += inv;
        for (p, (_, alpha, _)) in ev.terms.iter().enumerate() {
            d_alpha[p] += sums[p].0 * inv;
            d_m[p] += alpha * sums[p].1 * inv;
            d_sigma[p] += alpha * sums[p].2 * inv;
        }
    }

    let mut per_driver = BTreeMap::new();
    for (p, (d, alpha, k)) in ev.terms.iter().enumerate() {
        let mass = ev.kernel_mass(d, k, duration);
        let (mut mass_m, mut mass_s) = (0.0, 0.0);
        for &ti in d.times() {
            if ti + ev.support.b() > duration {
                let (gm, gs) = k.cdf_gradient(duration - ti);
                mass_m += gm;
                mass_s += gs;
            }
        }
        per_driver.insert(
            d.id().to_string(),
            DriverGradient {
                alpha: mass - d_alpha[p],
                m: alpha * mass_m - d_m[p],
                sigma: alpha * mass_s - d_sigma[p],
            },
        );
    }
    Ok(NllGradient { mu: duration - inv_lambda_sum, per_driver })
}
