//! EM inference of the driven model.
//!
//! [`run_em`] alternates [`e_step`] and [`m_step`] for a fixed number of
//! iterations starting from [`smart_start`] or explicit parameters. Two exits
//! short-circuit the loop:
//!
//! - every α is zero: the model reduces to its baseline, whose MLE is
//!   `#events / T`;
//! - some kernel mean wanders further than `divergence_margin · (b − a)`
//!   outside `[a, b]`: the drivers are deemed unrelated, all α are set to
//!   zero and the baseline falls back to its MLE.

mod init;
mod steps;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{boundary_clean, nll, Driver, DriverParams, EventSequence, KernelSupport, ModelParams};

pub use init::{
    covered_horizon_start, empirical_delays, interval_union_measure, smart_start,
    smart_start_with_floor, DEFAULT_SIGMA_FLOOR,
};
pub(crate) use init::{merge_intervals, shifted_supports};
pub use steps::{e_step, m_step, Responsibilities};
use steps::{e_step_table, m_step_table, DelayTable};

/// Relative per-step tolerance of the NLL monotonicity check.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    SmartStart,
    /// Smart start, or [`covered_horizon_start`] when the shifted supports
    /// cover the whole horizon.
    SmartStartOrCovered,
    Explicit(ModelParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Number `N` of EM iterations.
    pub n_iterations: usize,
    /// Lower bound `ε` on every σ, seconds.
    pub sigma_floor: f64,
    /// Allowed excursion of a kernel mean beyond `[a, b]`, in support widths.
    pub divergence_margin: f64,
    pub init: Init,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            n_iterations: 50,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            divergence_margin: 1.0,
            init: Init::SmartStart,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::invalid("n_iterations must be >= 1"));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(Error::invalid(format!("sigma_floor must be > 0, got {}", self.sigma_floor)));
        }
        if !(self.divergence_margin > 0.0 && self.divergence_margin.is_finite()) {
            return Err(Error::invalid(format!(
                "divergence_margin must be > 0, got {}",
                self.divergence_margin
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Completed,
    AlphaZeroMleExit,
    DivergedFallback,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::AlphaZeroMleExit => "alpha_zero_mle_exit",
            Termination::DivergedFallback => "diverged_fallback",
        }
    }
}

impl std::str::FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "completed" => Ok(Termination::Completed),
            "alpha_zero_mle_exit" => Ok(Termination::AlphaZeroMleExit),
            "diverged_fallback" => Ok(Termination::DivergedFallback),
            other => Err(Error::validation(format!("unknown termination '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitDiagnostics {
    /// `max_t |P_k(t) + Σ_p P_p(t) − 1|` for each E-step.
    pub simplex_deviation: Vec<f64>,
    /// Indices `k` of `nll_history` with `nll[k] > nll[k−1] + tol·|nll[k−1]|`.
    pub monotonicity_violations: Vec<usize>,
    /// Iteration whose M-step triggered the divergence fallback.
    pub divergence_iteration: Option<usize>,
    /// Driver events dropped by the boundary policy.
    pub dropped_driver_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: ModelParams,
    /// NLL of the iterate entering each E-step, then of the returned params.
    pub nll_history: Vec<f64>,
    pub termination: Termination,
    /// Number of completed M-steps.
    pub iterations_run: usize,
    pub diagnostics: FitDiagnostics,
}

fn assemble(
    mu: f64,
    drivers: &[Driver],
    params: &[DriverParams],
    support: KernelSupport,
) -> Result<ModelParams> {
    let per_driver = drivers.iter().map(|d| d.id().to_string()).zip(params.iter().copied()).collect();
    ModelParams::new(mu, per_driver, support)
}

/// Fit the model to `events` with EM.
///
/// Drivers are boundary-cleaned first. The fit is a deterministic function of
/// its inputs.
pub fn run_em(
    events: &EventSequence,
    drivers: &[Driver],
    support: KernelSupport,
    config: &EmConfig,
) -> Result<FitReport> {
    config.validate()?;
    let mut seen = BTreeSet::new();
    for d in drivers {
        if !seen.insert(d.id()) {
            return Err(Error::validation(format!("duplicate driver id '{}'", d.id())));
        }
    }
    let duration = events.duration();
    let before: usize = drivers.iter().map(Driver::len).sum();
    let drivers = boundary_clean(drivers, duration, support);
    let dropped = before - drivers.iter().map(Driver::len).sum::<usize>();

    let start = match &config.init {
        Init::SmartStart => smart_start_with_floor(events, &drivers, support, config.sigma_floor)?,
        Init::SmartStartOrCovered => {
            match smart_start_with_floor(events, &drivers, support, config.sigma_floor) {
                Err(Error::Initialization(msg)) => {
                    log::warn!("{msg}; using the covered-horizon start");
                    covered_horizon_start(events, &drivers, support, config.sigma_floor)?
                }
                other => other?,
            }
        }
        Init::Explicit(p) => {
            if p.support != support {
                return Err(Error::invalid("explicit initial parameters use a different support"));
            }
            let ids: BTreeSet<&str> = p.per_driver.keys().map(String::as_str).collect();
            if ids != seen {
                return Err(Error::invalid(
                    "explicit initial parameters must cover exactly the fitted drivers",
                ));
            }
            p.validate()?;
            p.clone()
        }
    };
    let mut mu = start.mu;
    let mut params = start.aligned(&drivers)?;

    let table = DelayTable::new(events, &drivers, support);
    let (lo, hi) = (
        support.a() - config.divergence_margin * support.width(),
        support.b() + config.divergence_margin * support.width(),
    );

    let mut diagnostics = FitDiagnostics::default();
    let mut history = Vec::with_capacity(config.n_iterations + 1);
    let mut termination = Termination::Completed;
    let mut iterations_run = 0;
    for it in 0..config.n_iterations {
        if params.iter().all(|p| p.alpha == 0.0) {
            mu = events.mle_rate();
            termination = Termination::AlphaZeroMleExit;
            break;
        }
        let resp = e_step_table(mu, &params, &drivers, events, support, &table)?;
        history.push(resp.nll());
        diagnostics.simplex_deviation.push(resp.simplex_deviation());

        let (next_mu, next) =
            m_step_table(&params, &resp, &drivers, events, support, &table, config.sigma_floor)?;
        iterations_run += 1;
        if next.iter().any(|p| p.m < lo || p.m > hi) {
            log::info!("kernel mean left [{lo}, {hi}] at iteration {it}; falling back to baseline MLE");
            for p in params.iter_mut() {
                p.alpha = 0.0;
            }
            mu = events.mle_rate();
            termination = Termination::DivergedFallback;
            diagnostics.divergence_iteration = Some(it);
            break;
        }
        mu = next_mu;
        params = next;
    }
    // The iteration budget may run out on an all-zero α iterate.
    if termination == Termination::Completed && params.iter().all(|p| p.alpha == 0.0) {
        mu = events.mle_rate();
        termination = Termination::AlphaZeroMleExit;
    }

    let fitted = assemble(mu, &drivers, &params, support)?;
    let final_nll = match nll(&fitted, events, &drivers) {
        Ok(v) => v,
        Err(Error::ZeroIntensity { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    history.push(final_nll);

    let checked = if termination == Termination::DivergedFallback {
        history.len() - 1
    } else {
        history.len()
    };
    diagnostics.monotonicity_violations = (1..checked)
        .filter(|&k| history[k] > history[k - 1] + MONOTONICITY_TOLERANCE * history[k - 1].abs())
        .collect();
    if !diagnostics.monotonicity_violations.is_empty() {
        log::warn!(
            "negative log-likelihood increased at steps {:?}",
            diagnostics.monotonicity_violations
        );
    }
    diagnostics.dropped_driver_events = dropped;

    Ok(FitReport { params: fitted, nll_history: history, termination, iterations_run, diagnostics })
}
