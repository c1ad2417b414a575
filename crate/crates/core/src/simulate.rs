//! Synthetic drivers and thinning simulation of the driven process.
//!
//! # Random streams
//!
//! Every random draw comes from a ChaCha8 generator seeded with the caller's
//! `seed` and a fixed stream number:
//!
//! | stream | consumer |
//! |--------|----------|
//! | `0` ([`SIMULATION_STREAM`]) | thinning of the modelled process |
//! | `1 + p` ([`driver_stream`]) | generation of the `p`-th driver |
//!
//! A `(seed, stream)` pair fully determines its output, so experiment cells
//! can run in any order or in parallel.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{ensure_finite, Error, Result};
use crate::model::Evaluator;
use crate::model::{boundary_clean, Driver, EventSequence, ModelParams};

pub const SIMULATION_STREAM: u64 = 0;

pub fn driver_stream(index: usize) -> u64 {
    1 + index as u64
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Equidistant-then-subsampled stimulus protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverGenSpec {
    /// Inter-stimulus interval, seconds.
    pub isi: f64,
    /// Fraction `P/S` of grid points kept.
    pub keep_fraction: f64,
    /// Horizon `T`, seconds.
    pub duration: f64,
}

impl DriverGenSpec {
    pub fn new(isi: f64, keep_fraction: f64, duration: f64) -> Result<Self> {
        let s = Self { isi, keep_fraction, duration };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("isi", self.isi)?;
        ensure_finite("keep_fraction", self.keep_fraction)?;
        ensure_finite("T", self.duration)?;
        if self.isi <= 0.0 {
            return Err(Error::invalid(format!("isi must be > 0, got {}", self.isi)));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "keep_fraction must lie in (0, 1], got {}",
                self.keep_fraction
            )));
        }
        if self.duration < self.isi {
            return Err(Error::invalid(format!(
                "T = {} must be at least the isi {}",
                self.duration, self.isi
            )));
        }
        Ok(())
    }

    /// Size `S = ⌊T / isi⌋` of the candidate grid.
    pub fn grid_size(&self) -> usize {
        (self.duration / self.isi).floor() as usize
    }

    /// Number `P = ⌊keep · S⌋` of kept stimuli.
    pub fn kept(&self) -> usize {
        (self.keep_fraction * self.grid_size() as f64).floor() as usize
    }
}

/// Draw a driver from `rng`: `P` of the `S` grid points `k · isi`,
/// `k = 0..S`, sampled uniformly without replacement.
pub fn gen_driver_with<R: Rng + ?Sized>(
    id: &str,
    spec: &DriverGenSpec,
    rng: &mut R,
) -> Result<Driver> {
    spec.validate()?;
    let (s, p) = (spec.grid_size(), spec.kept());
    if p == 0 {
        return Err(Error::invalid(format!(
            "keep_fraction {} of {s} grid points keeps no stimulus",
            spec.keep_fraction
        )));
    }
    let mut picked = index::sample(rng, s, p).into_vec();
    picked.sort_unstable();
    Driver::new(id, picked.into_iter().map(|k| k as f64 * spec.isi).collect())
}

/// Deterministic driver for `seed`, drawn from the first driver stream.
pub fn gen_driver(id: &str, spec: &DriverGenSpec, seed: u64) -> Result<Driver> {
    gen_driver_with(id, spec, &mut stream_rng(seed, driver_stream(0)))
}

/// Several drivers for one seed; the `p`-th uses [`driver_stream`]`(p)`.
pub fn gen_drivers(specs: &[(String, DriverGenSpec)], seed: u64) -> Result<Vec<Driver>> {
    specs
        .iter()
        .enumerate()
        .map(|(p, (id, spec))| gen_driver_with(id, spec, &mut stream_rng(seed, driver_stream(p))))
        .collect()
}

/// Bookkeeping of one thinning run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThinningStats {
    pub candidates: usize,
    pub accepted: usize,
    /// `∫_0^T` of the piecewise-constant majorant.
    pub majorant_integral: f64,
}

/// Piecewise-constant upper bound of λ on `[0, T]`: `(start, end, rate)`.
///
/// Breakpoints sit at every `t_i + a` and `t_i + b`; on each piece the rate is
/// `μ + Σ_p (#active events of p) · α_p · max κ_p`.
fn majorant(ev: &Evaluator<'_>, duration: f64) -> Result<Vec<(f64, f64, f64)>> {
    let (a, b) = (ev.support.a(), ev.support.b());
    let heights: Vec<f64> = ev.terms.iter().map(|(_, alpha, k)| alpha * k.peak()).collect();
    // (time, driver, +1 opens / -1 closes)
    let mut marks: Vec<(f64, usize, i64)> = Vec::new();
    for (p, (d, alpha, _)) in ev.terms.iter().enumerate() {
        if *alpha == 0.0 {
            continue;
        }
        for &t in d.times() {
            marks.push((t + a, p, 1));
            marks.push((t + b, p, -1));
        }
    }
    marks.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut active = vec![0i64; ev.terms.len()];
    let rate = |active: &[i64]| -> f64 {
        active.iter().zip(&heights).fold(ev.mu, |acc, (&n, &h)| acc + n as f64 * h)
    };
    let mut pieces = Vec::new();
    let mut cursor = 0.0;
    let mut i = 0;
    while cursor < duration {
        let next = marks.get(i).map_or(duration, |m| m.0.min(duration));
        if next > cursor {
            let r = rate(&active);
            if !r.is_finite() {
                return Err(Error::Numerical(format!("non-finite majorant {r} at t = {cursor}")));
            }
            pieces.push((cursor, next, r));
            cursor = next;
        }
        // Apply every mark at this time before opening the next piece.
        while i < marks.len() && marks[i].0 <= cursor {
            active[marks[i].1] += marks[i].2;
            i += 1;
        }
        if i >= marks.len() && next >= duration {
            break;
        }
    }
    Ok(pieces)
}

/// Lewis thinning of the driven process on `[0, T]`, returning run statistics.
///
/// Drivers are boundary-cleaned first (events later than `T − b` dropped).
pub fn thinning_simulate_with_stats(
    params: &ModelParams,
    drivers: &[Driver],
    duration: f64,
    seed: u64,
) -> Result<(EventSequence, ThinningStats)> {
    ensure_finite("T", duration)?;
    if duration <= 0.0 {
        return Err(Error::invalid(format!("T must be > 0, got {duration}")));
    }
    let drivers = boundary_clean(drivers, duration, params.support);
    let ev = Evaluator::new(params, &drivers)?;
    let pieces = majorant(&ev, duration)?;
    let mut rng = stream_rng(seed, SIMULATION_STREAM);

    let mut stats = ThinningStats::default();
    let mut events: Vec<f64> = Vec::new();
    for &(start, end, rate) in &pieces {
        stats.majorant_integral += rate * (end - start);
        if rate <= 0.0 {
            continue;
        }
        let mut t = start;
        loop {
            let gap: f64 = rng.sample(Exp1);
            t += gap / rate;
            if t >= end {
                break;
            }
            stats.candidates += 1;
            let lambda = ev.intensity(t);
            debug_assert!(lambda <= rate * (1.0 + 1e-12), "majorant violated at {t}");
            let u: f64 = rng.random();
            if u * rate < lambda {
                // A tie with the previous event is dropped; the next candidate
                // is drawn from the continuing stream.
                if events.last().is_some_and(|&last| t <= last) {
                    continue;
                }
                events.push(t);
                stats.accepted += 1;
            }
        }
    }
    Ok((EventSequence::new(events, duration)?, stats))
}

/// Lewis thinning of the driven process on `[0, T]`.
pub fn thinning_simulate(
    params: &ModelParams,
    drivers: &[Driver],
    duration: f64,
    seed: u64,
) -> Result<EventSequence> {
    thinning_simulate_with_stats(params, drivers, duration, seed).map(|(ev, _)| ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{intensity_integral, DriverParams, KernelSupport};

    fn support() -> KernelSupport {
        KernelSupport::new(0.03, 0.8).unwrap()
    }

    #[test]
    fn protocol_counts() {
        let spec = DriverGenSpec::new(1.0, 0.6, 10000.0).unwrap();
        assert_eq!((spec.grid_size(), spec.kept()), (10000, 6000));
        let d = gen_driver("wide", &spec, 3).unwrap();
        assert_eq!(d.len(), 6000);
        assert!(d.times().iter().all(|&t| t.fract() == 0.0 && (0.0..10000.0).contains(&t)));

        let sharp = DriverGenSpec::new(1.4, 0.6, 10000.0).unwrap();
        assert_eq!((sharp.grid_size(), sharp.kept()), (7142, 4285));
    }

    #[test]
    fn full_keep_returns_whole_grid() {
        let spec = DriverGenSpec::new(0.5, 1.0, 10.0).unwrap();
        let d = gen_driver("d", &spec, 0).unwrap();
        let grid: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        assert_eq!(d.times(), grid.as_slice());
    }

    #[test]
    fn driver_generation_is_seeded() {
        let spec = DriverGenSpec::new(1.0, 0.3, 500.0).unwrap();
        let x = gen_driver("d", &spec, 11).unwrap();
        assert_eq!(x, gen_driver("d", &spec, 11).unwrap());
        assert_ne!(x, gen_driver("d", &spec, 12).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(DriverGenSpec::new(0.0, 0.5, 10.0).is_err());
        assert!(DriverGenSpec::new(1.0, 0.0, 10.0).is_err());
        assert!(DriverGenSpec::new(1.0, 1.5, 10.0).is_err());
        assert!(DriverGenSpec::new(2.0, 0.5, 1.0).is_err());
        // S = 3, P = floor(0.1 * 3) = 0.
        let spec = DriverGenSpec::new(1.0, 0.1, 3.0).unwrap();
        assert!(matches!(gen_driver("d", &spec, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_intensity_gives_no_events() {
        let p = ModelParams::baseline(0.0, support())
            .unwrap()
            .with_driver("d", DriverParams::new(0.0, 0.4, 0.2).unwrap());
        let d = vec![Driver::new("d", vec![1.0, 2.0]).unwrap()];
        assert!(thinning_simulate(&p, &d, 100.0, 1).unwrap().is_empty());
    }

    #[test]
    fn homogeneous_count_is_poisson() {
        let p = ModelParams::baseline(0.8, support()).unwrap();
        let ev = thinning_simulate(&p, &[], 10000.0, 5).unwrap();
        assert!((ev.len() as f64 - 8000.0).abs() < 4.0 * 8000f64.sqrt());
    }

    #[test]
    fn majorant_bounds_intensity_and_integrates_consistently() {
        let p = ModelParams::baseline(0.4, support())
            .unwrap()
            .with_driver("d", DriverParams::new(1.3, 0.5, 0.07).unwrap())
            .with_driver("e", DriverParams::new(0.6, 0.0, 0.3).unwrap());
        let drivers = vec![
            Driver::new("d", vec![0.0, 0.3, 0.35, 2.0, 5.0]).unwrap(),
            Driver::new("e", vec![0.2, 3.0]).unwrap(),
        ];
        let ev = Evaluator::new(&p, &drivers).unwrap();
        let pieces = majorant(&ev, 8.0).unwrap();
        assert_eq!(pieces.first().unwrap().0, 0.0);
        assert_eq!(pieces.last().unwrap().1, 8.0);
        for w in pieces.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        for &(s, e, r) in &pieces {
            for k in 1..50 {
                let t = s + (e - s) * k as f64 / 50.0;
                assert!(ev.intensity(t) <= r * (1.0 + 1e-12));
            }
        }
        let total: f64 = pieces.iter().map(|&(s, e, r)| r * (e - s)).sum();
        assert!(total >= intensity_integral(&p, &drivers, 8.0).unwrap());
    }

    #[test]
    fn simulation_is_deterministic_and_sorted() {
        let p = ModelParams::baseline(0.8, support())
            .unwrap()
            .with_driver("d", DriverParams::new(0.8, 0.4, 0.05).unwrap());
        let d = vec![gen_driver("d", &DriverGenSpec::new(1.4, 0.6, 2000.0).unwrap(), 2).unwrap()];
        let x = thinning_simulate(&p, &d, 2000.0, 9).unwrap();
        assert_eq!(x, thinning_simulate(&p, &d, 2000.0, 9).unwrap());
        assert_ne!(x, thinning_simulate(&p, &d, 2000.0, 10).unwrap());
        assert!(x.times().windows(2).all(|w| w[0] < w[1]));
        assert!(x.times().iter().all(|&t| (0.0..=2000.0).contains(&t)));
    }
}
