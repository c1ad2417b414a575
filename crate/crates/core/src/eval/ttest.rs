use statrs::function::beta::beta_reg;

use crate::em::{merge_intervals, shifted_supports};
use crate::error::{Error, Result};
use crate::model::{Driver, EventSequence, KernelSupport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    pub n_support: usize,
    pub n_baseline: usize,
}

/// Two-sided Student tail `P(|T_df| > |t|)` via the regularised incomplete
/// beta function, accurate far into the tail.
fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(0.5 * df, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_ttest(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid("each group needs at least two observations"));
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (nx, mx, vx) = stats(x);
    let (ny, my, vy) = stats(y);
    let (sx, sy) = (vx / nx, vy / ny);
    let se2 = sx + sy;
    let diff = mx - my;
    let (t, df) = if se2 > 0.0 {
        (diff / se2.sqrt(), se2 * se2 / (sx * sx / (nx - 1.0) + sy * sy / (ny - 1.0)))
    } else if diff == 0.0 {
        (0.0, nx + ny - 2.0)
    } else {
        (diff.signum() * f64::INFINITY, nx + ny - 2.0)
    };
    Ok(TTestResult {
        t_statistic: t,
        p_value: two_sided_p(t, df),
        df,
        n_support: x.len(),
        n_baseline: y.len(),
    })
}

/// Tile `[0, T] ∖ ∪[t_i + a, t_i + b]` with segments of length `b − a`,
/// discarding the remainder of every gap.
pub fn tiled_baseline_segments(
    driver: &Driver,
    support: KernelSupport,
    duration: f64,
) -> Result<Vec<(f64, f64)>> {
    let width = support.width();
    let union = merge_intervals(&shifted_supports(driver, support))?;
    let mut segments = Vec::new();
    let mut gap_start = 0.0;
    let mut tile = |start: f64, end: f64| {
        let n = ((end - start) / width).floor() as usize;
        for k in 0..n {
            let s = start + k as f64 * width;
            segments.push((s, s + width));
        }
    };
    for &(s, e) in &union {
        if s >= duration {
            break;
        }
        if s > gap_start {
            tile(gap_start, s);
        }
        gap_start = gap_start.max(e);
    }
    if duration > gap_start {
        tile(gap_start, duration);
    }
    Ok(segments)
}

fn count_in(times: &[f64], lo: f64, hi: f64, closed_right: bool) -> usize {
    let start = times.partition_point(|&t| t < lo);
    let end = if closed_right {
        times.partition_point(|&t| t <= hi)
    } else {
        times.partition_point(|&t| t < hi)
    };
    end.saturating_sub(start)
}

/// Compare per-segment event rates on the kernel windows `[t_i + a, t_i + b]`
/// against rates on baseline segments of equal length.
///
/// Only windows that end by `T` are used.
pub fn segment_ttest(
    events: &EventSequence,
    driver: &Driver,
    support: KernelSupport,
) -> Result<TTestResult> {
    let duration = events.duration();
    let width = support.width();
    let times = events.times();
    let on_support: Vec<f64> = driver
        .times()
        .iter()
        .filter(|&&t| t + support.b() <= duration)
        .map(|&t| count_in(times, t + support.a(), t + support.b(), true) as f64 / width)
        .collect();
    let baseline: Vec<f64> = tiled_baseline_segments(driver, support, duration)?
        .into_iter()
        .map(|(s, e)| count_in(times, s, e, false) as f64 / width)
        .collect();
    if on_support.len() < 2 || baseline.len() < 2 {
        return Err(Error::invalid(format!(
            "segment t-test needs >= 2 segments per group, got {} on-support and {} baseline",
            on_support.len(),
            baseline.len()
        )));
    }
    welch_ttest(&on_support, &baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn welch_matches_hand_computation() {
        // x: mean 2, var 1; y: mean 4, var 4.
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let r = welch_ttest(&x, &y).unwrap();
        let se = (1.0f64 / 3.0 + 4.0 / 3.0).sqrt();
        assert_relative_eq!(r.t_statistic, -2.0 / se, max_relative = 1e-14);
        let df = (5.0f64 / 3.0).powi(2) / ((1.0f64 / 3.0).powi(2) / 2.0 + (4.0f64 / 3.0).powi(2) / 2.0);
        assert_relative_eq!(r.df, df, max_relative = 1e-14);
        // scipy.stats.ttest_ind(x, y, equal_var=False)
        assert_relative_eq!(r.p_value, 0.220_880_840_494_095_8, max_relative = 1e-9);
    }

    #[test]
    fn equal_groups_give_zero_statistic() {
        let r = welch_ttest(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let c = welch_ttest(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((c.t_statistic, c.p_value), (0.0, 1.0));
        let d = welch_ttest(&[2.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(d.p_value, 0.0);
    }

    #[test]
    fn tail_p_value_does_not_underflow_early() {
        // 2 * scipy.stats.t.sf(30, 500)
        assert_relative_eq!(two_sided_p(30.0, 500.0), 7.214_288_888_428_29e-114, max_relative = 1e-8);
    }

    #[test]
    fn baseline_tiles_avoid_windows() {
        let s = KernelSupport::new(0.0, 1.0).unwrap();
        let d = Driver::new("d", vec![2.5, 3.0]).unwrap();
        let tiles = tiled_baseline_segments(&d, s, 7.2).unwrap();
        // Gaps [0, 2.5) and (4.0, 7.2].
        assert_eq!(tiles, vec![(0.0, 1.0), (1.0, 2.0), (4.0, 5.0), (5.0, 6.0), (6.0, 7.0)]);
    }

    #[test]
    fn too_few_segments_is_invalid() {
        let s = KernelSupport::new(0.0, 1.0).unwrap();
        let ev = EventSequence::new(vec![0.5], 3.0).unwrap();
        let d = Driver::new("d", vec![0.0]).unwrap();
        assert!(segment_ttest(&ev, &d, s).is_err());
    }
}
