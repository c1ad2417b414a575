use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::relative_linf;
use crate::em::{run_em, EmConfig, Termination};
use crate::error::{Error, Result};
use crate::ingest::fmt_float;
use crate::model::{DriverParams, KernelSupport, ModelParams};
use crate::simulate::{gen_drivers, thinning_simulate, DriverGenSpec};

/// Generating parameters and stimulus spacing of one driver.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverTruth {
    pub id: String,
    pub isi: f64,
    pub params: DriverParams,
}

/// Grid of `(T, P/S, seed)` cells sharing one set of true parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub durations: Vec<f64>,
    pub keep_fractions: Vec<f64>,
    pub n_seeds: usize,
    pub seed_offset: u64,
    pub mu: f64,
    pub support: KernelSupport,
    pub drivers: Vec<DriverTruth>,
    pub em: EmConfig,
    pub grid_step: f64,
}

impl RecoveryConfig {
    /// Two drivers on `[0.03, 0.8]` with `μ = α = 0.8` and `m = 0.4`: a
    /// "wide" kernel (σ = 0.2, ISI 1 s) and a "sharp" one (σ = 0.05, ISI 1.4 s).
    pub fn two_kernel_benchmark(durations: Vec<f64>, keep_fractions: Vec<f64>, n_seeds: usize) -> Self {
        let support = KernelSupport::new(0.03, 0.8).expect("valid support");
        Self {
            durations,
            keep_fractions,
            n_seeds,
            seed_offset: 0,
            mu: 0.8,
            support,
            drivers: vec![
                DriverTruth { id: "wide".into(), isi: 1.0, params: DriverParams { alpha: 0.8, m: 0.4, sigma: 0.2 } },
                DriverTruth { id: "sharp".into(), isi: 1.4, params: DriverParams { alpha: 0.8, m: 0.4, sigma: 0.05 } },
            ],
            em: EmConfig::default(),
            grid_step: super::DEFAULT_GRID_STEP,
        }
    }

    pub fn truth(&self) -> Result<ModelParams> {
        let per_driver = self.drivers.iter().map(|d| (d.id.clone(), d.params)).collect();
        ModelParams::new(self.mu, per_driver, self.support)
    }

    pub fn validate(&self) -> Result<()> {
        if self.durations.is_empty() || self.keep_fractions.is_empty() || self.n_seeds == 0 {
            return Err(Error::invalid("experiment grid must be non-empty"));
        }
        if self.drivers.is_empty() {
            return Err(Error::invalid("experiment needs at least one driver"));
        }
        self.truth()?;
        self.em.validate()?;
        for &t in &self.durations {
            for &k in &self.keep_fractions {
                for d in &self.drivers {
                    DriverGenSpec::new(d.isi, k, t)?;
                }
            }
        }
        Ok(())
    }
}

/// Outcome for one driver of one `(T, P/S, seed)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCell {
    pub duration: f64,
    pub keep_fraction: f64,
    pub seed: u64,
    pub driver_id: String,
    /// `None` when the cell failed; see `error`.
    pub rel_linf: Option<f64>,
    pub runtime_s: f64,
    pub termination: Option<Termination>,
    pub fitted_mu: Option<f64>,
    pub fitted: Option<DriverParams>,
    pub error: Option<String>,
}

struct CellOutcome {
    runtime_s: f64,
    termination: Termination,
    fitted: ModelParams,
    scores: Vec<f64>,
}

fn fit_cell(
    config: &RecoveryConfig,
    truth: &ModelParams,
    duration: f64,
    keep: f64,
    seed: u64,
) -> Result<CellOutcome> {
    let specs: Vec<(String, DriverGenSpec)> = config
        .drivers
        .iter()
        .map(|d| Ok((d.id.clone(), DriverGenSpec::new(d.isi, keep, duration)?)))
        .collect::<Result<_>>()?;
    let drivers = gen_drivers(&specs, seed)?;
    let events = thinning_simulate(truth, &drivers, duration, seed)?;
    let clock = Instant::now();
    let report = run_em(&events, &drivers, config.support, &config.em)?;
    let runtime_s = clock.elapsed().as_secs_f64();
    let scores = config
        .drivers
        .iter()
        .map(|d| relative_linf(truth, &report.params, &d.id, config.grid_step))
        .collect::<Result<_>>()?;
    Ok(CellOutcome { runtime_s, termination: report.termination, fitted: report.params, scores })
}

/// Simulate, fit and score every cell of the grid.
///
/// Cells run in parallel on the current rayon pool. Each cell draws its
/// randomness from its own seed, so the table does not depend on scheduling
/// (apart from the measured runtimes). Per-cell failures are recorded in the
/// rows rather than aborting the grid.
pub fn recovery_experiment(config: &RecoveryConfig) -> Result<Vec<RecoveryCell>> {
    config.validate()?;
    let truth = config.truth()?;
    let mut jobs = Vec::new();
    for &t in &config.durations {
        for &k in &config.keep_fractions {
            for s in 0..config.n_seeds as u64 {
                jobs.push((t, k, config.seed_offset + s));
            }
        }
    }
    let rows: Vec<Vec<RecoveryCell>> = jobs
        .par_iter()
        .map(|&(duration, keep, seed)| {
            let outcome = fit_cell(config, &truth, duration, keep, seed);
            if let Err(e) = &outcome {
                log::warn!("cell T={duration} keep={keep} seed={seed} failed: {e}");
            }
            config
                .drivers
                .iter()
                .enumerate()
                .map(|(p, d)| {
                    let base = RecoveryCell {
                        duration,
                        keep_fraction: keep,
                        seed,
                        driver_id: d.id.clone(),
                        rel_linf: None,
                        runtime_s: 0.0,
                        termination: None,
                        fitted_mu: None,
                        fitted: None,
                        error: None,
                    };
                    match &outcome {
                        Ok(o) => RecoveryCell {
                            rel_linf: Some(o.scores[p]),
                            runtime_s: o.runtime_s,
                            termination: Some(o.termination),
                            fitted_mu: Some(o.fitted.mu),
                            fitted: o.fitted.per_driver.get(&d.id).copied(),
                            ..base
                        },
                        Err(e) => RecoveryCell { error: Some(e.to_string()), ..base },
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Mean and standard deviation of the relative ℓ∞ error per `(T, P/S, driver)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub duration: f64,
    pub keep_fraction: f64,
    pub driver_id: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_runtime_s: f64,
}

fn mean_std(xs: &[f64], ddof: usize) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() <= ddof {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - ddof as f64);
    (mean, var.sqrt())
}

pub fn aggregate(cells: &[RecoveryCell]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, f64, String)> = Vec::new();
    for c in cells {
        let key = (c.duration, c.keep_fraction, c.driver_id.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(duration, keep_fraction, driver_id)| {
            let group: Vec<&RecoveryCell> = cells
                .iter()
                .filter(|c| {
                    c.duration == duration && c.keep_fraction == keep_fraction && c.driver_id == driver_id
                })
                .collect();
            let ok: Vec<f64> = group.iter().filter_map(|c| c.rel_linf).collect();
            let runtimes: Vec<f64> =
                group.iter().filter(|c| c.rel_linf.is_some()).map(|c| c.runtime_s).collect();
            let (mean, std) = mean_std(&ok, 0);
            AggregateRow {
                duration,
                keep_fraction,
                n_ok: ok.len(),
                n_failed: group.len() - ok.len(),
                driver_id,
                mean,
                std,
                mean_runtime_s: mean_std(&runtimes, 0).0,
            }
        })
        .collect()
}

/// Mean EM runtime per duration with a normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub duration: f64,
    pub n_fits: usize,
    pub mean_s: f64,
    pub ci95_low_s: f64,
    pub ci95_high_s: f64,
}

pub fn runtime_by_duration(cells: &[RecoveryCell]) -> Vec<RuntimeRow> {
    let mut durations: Vec<f64> = Vec::new();
    for c in cells {
        if !durations.contains(&c.duration) {
            durations.push(c.duration);
        }
    }
    durations
        .into_iter()
        .map(|duration| {
            // One runtime per fit; driver rows of a fit share it.
            let mut fits: Vec<(f64, u64, f64)> = Vec::new();
            for c in cells.iter().filter(|c| c.duration == duration && c.rel_linf.is_some()) {
                if !fits.iter().any(|f| f.0 == c.keep_fraction && f.1 == c.seed) {
                    fits.push((c.keep_fraction, c.seed, c.runtime_s));
                }
            }
            let times: Vec<f64> = fits.iter().map(|f| f.2).collect();
            let (mean, sd) = mean_std(&times, 1);
            let half = if sd.is_nan() { 0.0 } else { 1.96 * sd / (times.len() as f64).sqrt() };
            RuntimeRow {
                duration,
                n_fits: times.len(),
                mean_s: mean,
                ci95_low_s: mean - half,
                ci95_high_s: mean + half,
            }
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// `T,keep_fraction,seed,driver_id,rel_linf,runtime_s`; failed cells leave
/// `rel_linf` empty.
pub fn write_recovery_csv<W: Write>(cells: &[RecoveryCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "keep_fraction", "seed", "driver_id", "rel_linf", "runtime_s"])
        .map_err(csv_err)?;
    for c in cells {
        w.write_record([
            fmt_float(c.duration),
            fmt_float(c.keep_fraction),
            c.seed.to_string(),
            c.driver_id.clone(),
            opt(c.rel_linf),
            fmt_float(c.runtime_s),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "T", "keep_fraction", "driver_id", "mean_rel_linf", "std_rel_linf", "n_ok", "n_failed",
        "mean_runtime_s",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fmt_float(r.duration),
            fmt_float(r.keep_fraction),
            r.driver_id.clone(),
            fmt_float(r.mean),
            fmt_float(r.std),
            r.n_ok.to_string(),
            r.n_failed.to_string(),
            fmt_float(r.mean_runtime_s),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runtime_csv<W: Write>(rows: &[RuntimeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "n_fits", "mean_runtime_s", "ci95_low_s", "ci95_high_s"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fmt_float(r.duration),
            r.n_fits.to_string(),
            fmt_float(r.mean_s),
            fmt_float(r.ci95_low_s),
            fmt_float(r.ci95_high_s),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv writer: {other:?}")),
    }
}
