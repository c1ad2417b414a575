//! Domain types of the driven point-process model together with the
//! truncated-Gaussian kernel, the intensity function and the likelihood.
//!
//! The intensity of the modelled process given a set of drivers is
//!
//! ```text
//! λ(t) = μ + Σ_p Σ_{i: t_i ≤ t} α_p κ_p(t − t_i)
//! ```
//!
//! where every κ_p is a Gaussian density of mean `m_p` and standard deviation
//! `σ_p` truncated to the shared latency window `[a, b]`.

mod kernel;
mod likelihood;

use std::collections::BTreeMap;

use crate::error::{ensure_finite, Error, Result};

pub use kernel::{kernel_eval, trunc_gauss_constants, TruncGauss, TruncGaussConstants};
pub(crate) use likelihood::{checked_log, Evaluator};
pub use likelihood::{
    intensity_at, intensity_integral, nll, nll_gradient, DriverGradient, NllGradient,
};

fn check_timestamps(what: &str, events: &[f64]) -> Result<()> {
    for (i, &t) in events.iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::validation(format!("{what}: non-finite timestamp at index {i}")));
        }
        if t < 0.0 {
            return Err(Error::validation(format!("{what}: negative timestamp {t} at index {i}")));
        }
        if i > 0 && events[i - 1] >= t {
            return Err(Error::validation(format!(
                "{what}: timestamps not strictly increasing at index {i} ({} >= {t})",
                events[i - 1]
            )));
        }
    }
    Ok(())
}

/// Observed activations of the modelled process on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    events: Vec<f64>,
    duration: f64,
}

impl EventSequence {
    pub fn new(events: Vec<f64>, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::validation(format!("duration must be finite and > 0, got {duration}")));
        }
        check_timestamps("events", &events)?;
        if let Some(&last) = events.last() {
            if last > duration {
                return Err(Error::validation(format!(
                    "event {last} lies beyond the duration {duration}"
                )));
            }
        }
        Ok(Self { events, duration })
    }

    pub fn times(&self) -> &[f64] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Maximum-likelihood baseline of a driver-free model, `#events / T`.
    pub fn mle_rate(&self) -> f64 {
        self.events.len() as f64 / self.duration
    }
}

/// A known stimulus stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Driver {
    id: String,
    events: Vec<f64>,
}

impl Driver {
    pub fn new(id: impl Into<String>, events: Vec<f64>) -> Result<Self> {
        let id = id.into();
        check_timestamps(&format!("driver '{id}'"), &events)?;
        Ok(Self { id, events })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn times(&self) -> &[f64] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Indices `lo..hi` of the driver events `t_i` with `t − t_i ∈ [a, b]`.
    pub(crate) fn active_range(&self, t: f64, support: KernelSupport) -> std::ops::Range<usize> {
        let lo = self.events.partition_point(|&ti| ti < t - support.b());
        let hi = self.events.partition_point(|&ti| ti <= t - support.a());
        lo..hi.max(lo)
    }
}

/// Drop driver events whose kernel window `[t + a, t + b]` would overrun the
/// horizon `T`, so that every kernel integrates to one inside `[0, T]`.
pub fn boundary_clean(drivers: &[Driver], duration: f64, support: KernelSupport) -> Vec<Driver> {
    drivers
        .iter()
        .map(|d| {
            let keep = d.events.partition_point(|&t| t + support.b() <= duration);
            let dropped = d.events.len() - keep;
            if dropped > 0 {
                log::warn!(
                    "driver '{}': dropped {dropped} event(s) later than T - b = {}",
                    d.id,
                    duration - support.b()
                );
            }
            Driver { id: d.id.clone(), events: d.events[..keep].to_vec() }
        })
        .collect()
}

/// Shared latency window `[a, b]` of every kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSupport {
    a: f64,
    b: f64,
}

impl KernelSupport {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        ensure_finite("a", a)?;
        ensure_finite("b", b)?;
        if a < 0.0 || b <= a {
            return Err(Error::invalid(format!("kernel support needs 0 <= a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }
}

/// Per-driver kernel parameters `(α, m, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverParams {
    pub alpha: f64,
    pub m: f64,
    pub sigma: f64,
}

impl DriverParams {
    pub fn new(alpha: f64, m: f64, sigma: f64) -> Result<Self> {
        let p = Self { alpha, m, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("alpha", self.alpha)?;
        ensure_finite("m", self.m)?;
        ensure_finite("sigma", self.sigma)?;
        if self.alpha < 0.0 {
            return Err(Error::invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.sigma <= 0.0 {
            return Err(Error::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Full parameter set `(μ, {α_p, m_p, σ_p})` plus the kernel support.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub per_driver: BTreeMap<String, DriverParams>,
    pub support: KernelSupport,
}

impl ModelParams {
    pub fn new(
        mu: f64,
        per_driver: BTreeMap<String, DriverParams>,
        support: KernelSupport,
    ) -> Result<Self> {
        let p = Self { mu, per_driver, support };
        p.validate()?;
        Ok(p)
    }

    /// Baseline-only parameters.
    pub fn baseline(mu: f64, support: KernelSupport) -> Result<Self> {
        Self::new(mu, BTreeMap::new(), support)
    }

    pub fn with_driver(mut self, id: impl Into<String>, params: DriverParams) -> Self {
        self.per_driver.insert(id.into(), params);
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mu", self.mu)?;
        if self.mu < 0.0 {
            return Err(Error::invalid(format!("mu must be >= 0, got {}", self.mu)));
        }
        for (id, p) in &self.per_driver {
            p.validate().map_err(|e| Error::invalid(format!("driver '{id}': {e}")))?;
        }
        Ok(())
    }

    pub fn driver(&self, id: &str) -> Result<&DriverParams> {
        self.per_driver
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no parameters for driver '{id}'")))
    }

    /// Parameters aligned with `drivers`, failing on any missing id.
    pub(crate) fn aligned(&self, drivers: &[Driver]) -> Result<Vec<DriverParams>> {
        drivers.iter().map(|d| self.driver(d.id()).copied()).collect()
    }

    pub fn all_alpha_zero(&self) -> bool {
        self.per_driver.values().all(|p| p.alpha == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_sequence_rejects_unsorted_and_out_of_range() {
        assert!(EventSequence::new(vec![0.5, 0.2], 1.0).is_err());
        assert!(EventSequence::new(vec![0.5, 0.5], 1.0).is_err());
        assert!(EventSequence::new(vec![0.5, 1.5], 1.0).is_err());
        assert!(EventSequence::new(vec![f64::NAN], 1.0).is_err());
        assert!(EventSequence::new(vec![], 0.0).is_err());
        assert!(EventSequence::new(vec![0.0, 1.0], 1.0).is_ok());
    }

    #[test]
    fn support_needs_ordered_bounds() {
        assert!(KernelSupport::new(0.03, 0.8).is_ok());
        assert!(KernelSupport::new(0.8, 0.8).is_err());
        assert!(KernelSupport::new(-0.1, 0.8).is_err());
        assert!(KernelSupport::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn active_range_is_inclusive_on_both_ends() {
        let s = KernelSupport::new(0.1, 0.5).unwrap();
        let d = Driver::new("d", vec![0.0, 0.2, 0.4, 1.0]).unwrap();
        // delays at t = 0.5: 0.5, 0.3, 0.1, -0.5.
        assert_eq!(d.active_range(0.5, s), 0..3);
        assert_eq!(d.active_range(0.05, s), 0..0);
        assert_eq!(d.active_range(10.0, s), 4..4);
    }

    #[test]
    fn boundary_clean_drops_late_events() {
        let s = KernelSupport::new(0.03, 0.8).unwrap();
        let d = Driver::new("d", vec![1.0, 9.1, 9.2, 9.5]).unwrap();
        let cleaned = boundary_clean(&[d], 10.0, s);
        assert_eq!(cleaned[0].times(), &[1.0, 9.1, 9.2]);
    }

    #[test]
    fn missing_driver_params_is_reported() {
        let s = KernelSupport::new(0.03, 0.8).unwrap();
        let p = ModelParams::baseline(1.0, s).unwrap();
        let d = Driver::new("x", vec![1.0]).unwrap();
        assert!(matches!(p.aligned(&[d]), Err(Error::InvalidArgument(_))));
    }
}
