//! Single-break segmented regression with SSE-ratio scoring and a residual
//! bootstrap for break stability.
//!
//! The break month `tau` is the first month of the second segment. Null
//! months are excluded from every fit but keep their calendar position on
//! the time axis.

use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::events::{month_of, MonthKey};
use crate::series::MetricSeries;
use crate::stats::nearest_rank;

/// SSE values below this are treated as zero by the ratio guard.
pub const SSE_EPSILON: f64 = 1e-12;

/// Relative slack under which two candidate SSEs count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BreakpointError {
    #[error("need at least {needed} non-null points, have {have}")]
    TooShort { needed: usize, have: usize },
    #[error("segment too short: {have} points, minimum {min_seg}")]
    SegmentTooShort { have: usize, min_seg: usize },
    #[error("minimum segment length must be at least 2, got {0}")]
    BadMinSegment(usize),
    #[error("points have no spread in time")]
    Singular,
}

/// How the two segments relate at the break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FitVariant {
    /// Two independent lines; a jump at the break is allowed.
    #[default]
    Independent,
    /// One hinge line, continuous at the break month.
    Continuous,
}

impl FitVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            FitVariant::Independent => "independent",
            FitVariant::Continuous => "continuous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub sse: f64,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares over `(x, y)` points.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit, BreakpointError> {
    let n = points.len();
    if n < 2 {
        return Err(BreakpointError::TooShort { needed: 2, have: n });
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(BreakpointError::Singular);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(LineFit { slope, intercept, sse })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentedFit {
    pub before: LineFit,
    pub after: LineFit,
    pub sse: f64,
}

/// Fits the two-segment model with the second segment starting at point
/// index `split` (points sorted by `x`).
fn fit_split(points: &[(f64, f64)], split: usize, variant: FitVariant) -> Result<SegmentedFit, BreakpointError> {
    let (left, right) = points.split_at(split);
    match variant {
        FitVariant::Independent => {
            let before = fit_line(left)?;
            let after = fit_line(right)?;
            Ok(SegmentedFit { before, after, sse: before.sse + after.sse })
        }
        FitVariant::Continuous => fit_hinge(points, split),
    }
}

/// `y = a + b x + c max(0, x - x_split)`, solved by modified Gram-Schmidt.
fn fit_hinge(points: &[(f64, f64)], split: usize) -> Result<SegmentedFit, BreakpointError> {
    let knot = points[split].0;
    let n = points.len();
    let mut cols: [Vec<f64>; 3] = [
        alloc::vec![1.0; n],
        points.iter().map(|p| p.0).collect(),
        points.iter().map(|p| (p.0 - knot).max(0.0)).collect(),
    ];
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut r = [[0.0f64; 3]; 3];
    for j in 0..3 {
        for i in 0..j {
            let proj = dot(&cols[i], &cols[j]);
            r[i][j] = proj;
            let qi = cols[i].clone();
            for (v, q) in cols[j].iter_mut().zip(&qi) {
                *v -= proj * q;
            }
        }
        let norm = libm::sqrt(dot(&cols[j], &cols[j]));
        if norm < 1e-12 {
            return Err(BreakpointError::Singular);
        }
        r[j][j] = norm;
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    let qty = [dot(&cols[0], &y), dot(&cols[1], &y), dot(&cols[2], &y)];
    let mut beta = [0.0f64; 3];
    for i in (0..3).rev() {
        let tail: f64 = (i + 1..3).map(|k| r[i][k] * beta[k]).sum();
        beta[i] = (qty[i] - tail) / r[i][i];
    }
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    let before_line = LineFit { slope: b, intercept: a, sse: 0.0 };
    let after_line = LineFit { slope: b + c, intercept: a - c * knot, sse: 0.0 };
    let sse_of = |pts: &[(f64, f64)], line: &LineFit| {
        pts.iter()
            .map(|&(x, y)| {
                let e = y - line.predict(x);
                e * e
            })
            .sum::<f64>()
    };
    let before = LineFit { sse: sse_of(&points[..split], &before_line), ..before_line };
    let after = LineFit { sse: sse_of(&points[split..], &after_line), ..after_line };
    Ok(SegmentedFit { before, after, sse: before.sse + after.sse })
}

/// Non-null observations of a series on a month-offset time axis.
#[derive(Debug, Clone)]
struct Observations {
    months: Vec<MonthKey>,
    points: Vec<(f64, f64)>,
}

impl Observations {
    fn from_series(series: &MetricSeries) -> Self {
        let origin = series.points().first().map(|p| p.month);
        let mut months = Vec::new();
        let mut points = Vec::new();
        for p in series.points() {
            if let (Some(v), Some(o)) = (p.value, origin) {
                months.push(p.month);
                points.push((p.month.months_since(o) as f64, v));
            }
        }
        Self { months, points }
    }

    fn with_values(&self, ys: &[f64]) -> Vec<(f64, f64)> {
        self.points.iter().zip(ys).map(|(&(x, _), &y)| (x, y)).collect()
    }
}

/// Independent OLS on `[start, tau)` and `[tau, end]`.
pub fn fit_segmented(
    series: &MetricSeries,
    tau: MonthKey,
    min_seg: usize,
    variant: FitVariant,
) -> Result<SegmentedFit, BreakpointError> {
    check_min_seg(min_seg)?;
    let obs = Observations::from_series(series);
    let split = obs.months.iter().take_while(|m| **m < tau).count();
    let short = split.min(obs.points.len() - split);
    if short < min_seg {
        return Err(BreakpointError::SegmentTooShort { have: short, min_seg });
    }
    fit_split(&obs.points, split, variant)
}

fn check_min_seg(min_seg: usize) -> Result<(), BreakpointError> {
    if min_seg < 2 {
        Err(BreakpointError::BadMinSegment(min_seg))
    } else {
        Ok(())
    }
}

/// Point estimate and, after [`bootstrap`], its stability.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointResult {
    pub tau: MonthKey,
    pub sse_segmented: f64,
    pub sse_single: f64,
    pub sse_ratio: f64,
    /// Set when the ratio guard fired (single-line SSE below epsilon).
    pub degenerate: bool,
    pub n_points: usize,
    pub ci_low: Option<MonthKey>,
    pub ci_high: Option<MonthKey>,
    pub stability: Option<f64>,
    pub n_bootstrap: usize,
}

/// `segmented / single` with both-near-zero read as 0 and a near-zero
/// single-line SSE read as 1.
pub fn guarded_ratio(sse_segmented: f64, sse_single: f64) -> (f64, bool) {
    match (sse_segmented < SSE_EPSILON, sse_single < SSE_EPSILON) {
        (true, true) => (0.0, true),
        (false, true) => (1.0, true),
        _ => (sse_segmented / sse_single, false),
    }
}

/// Segmented SSE for every feasible split, in split order.
fn sse_profile(
    points: &[(f64, f64)],
    min_seg: usize,
    variant: FitVariant,
) -> Result<Vec<(usize, f64)>, BreakpointError> {
    let n = points.len();
    if n < 2 * min_seg {
        return Err(BreakpointError::TooShort { needed: 2 * min_seg, have: n });
    }
    (min_seg..=n - min_seg)
        .map(|split| fit_split(points, split, variant).map(|f| (split, f.sse)))
        .collect()
}

/// Argmin with a relative tie band; among ties the earliest split wins,
/// independent of the order candidates are visited.
fn argmin_earliest(profile: &[(usize, f64)], scale: f64) -> (usize, f64) {
    let best = profile.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let band = TIE_TOLERANCE * scale.max(SSE_EPSILON);
    profile
        .iter()
        .filter(|p| p.1 <= best + band)
        .min_by_key(|p| p.0)
        .copied()
        .expect("profile is non-empty")
}

fn locate(points: &[(f64, f64)], min_seg: usize, variant: FitVariant) -> Result<(usize, f64, f64), BreakpointError> {
    let single = fit_line(points)?.sse;
    let profile = sse_profile(points, min_seg, variant)?;
    let (split, sse) = argmin_earliest(&profile, single);
    Ok((split, sse, single))
}

/// Least-SSE single break with at least `min_seg` non-null points per side.
pub fn find_breakpoint(
    series: &MetricSeries,
    min_seg: usize,
    variant: FitVariant,
) -> Result<BreakpointResult, BreakpointError> {
    check_min_seg(min_seg)?;
    let obs = Observations::from_series(series);
    let (split, sse_segmented, sse_single) = locate(&obs.points, min_seg, variant)?;
    let (sse_ratio, degenerate) = guarded_ratio(sse_segmented, sse_single);
    Ok(BreakpointResult {
        tau: obs.months[split],
        sse_segmented,
        sse_single,
        sse_ratio,
        degenerate,
        n_points: obs.points.len(),
        ci_low: None,
        ci_high: None,
        stability: None,
        n_bootstrap: 0,
    })
}

/// Bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub seed: u64,
    /// Months either side of the estimate that count as stable.
    pub stability_window: i64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BootstrapConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            stability_window: 3,
            ci_low: 0.05,
            ci_high: 0.95,
        }
    }
}

/// Independent random stream for bootstrap iteration `iteration`.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

/// Residual bootstrap of the break month: resample the segmented-fit
/// residuals with replacement onto the fitted values and re-estimate.
pub fn bootstrap(
    series: &MetricSeries,
    result: &BreakpointResult,
    min_seg: usize,
    variant: FitVariant,
    config: &BootstrapConfig,
) -> Result<BreakpointResult, BreakpointError> {
    check_min_seg(min_seg)?;
    let obs = Observations::from_series(series);
    let split = obs.months.iter().take_while(|m| **m < result.tau).count();
    let fit = fit_split(&obs.points, split, variant)?;
    let fitted: Vec<f64> = obs
        .points
        .iter()
        .enumerate()
        .map(|(i, &(x, _))| if i < split { fit.before.predict(x) } else { fit.after.predict(x) })
        .collect();
    let residuals: Vec<f64> = obs.points.iter().zip(&fitted).map(|(&(_, y), f)| y - f).collect();

    let mut taus = Vec::with_capacity(config.iterations);
    for b in 0..config.iterations {
        let mut rng = iteration_rng(config.seed, b as u64);
        let ys: Vec<f64> = fitted
            .iter()
            .map(|f| f + residuals[rng.gen_range(0..residuals.len())])
            .collect();
        let (split_b, _, _) = locate(&obs.with_values(&ys), min_seg, variant)?;
        taus.push(obs.months[split_b]);
    }

    let mut out = result.clone();
    out.n_bootstrap = config.iterations;
    if !taus.is_empty() {
        let stable = taus
            .iter()
            .filter(|t| t.months_since(result.tau).abs() <= config.stability_window)
            .count();
        out.stability = Some(stable as f64 / taus.len() as f64);
        taus.sort_unstable();
        out.ci_low = nearest_rank(&taus, config.ci_low);
        out.ci_high = nearest_rank(&taus, config.ci_high);
    }
    Ok(out)
}

/// Whether `tau` lies within `window_months` calendar months of the month
/// containing `event_date`.
pub fn near_event(tau: MonthKey, event_date: NaiveDate, window_months: i64) -> bool {
    let event_month = month_of(event_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    tau.months_since(event_month).abs() <= window_months
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::MetricSeries;

    fn mk(y: i32, m: u32) -> MonthKey {
        MonthKey::new(y, m).unwrap()
    }

    fn series(values: &[f64]) -> MetricSeries {
        MetricSeries::from_values(
            "m",
            "s",
            values.iter().enumerate().map(|(i, v)| (mk(2016, 1).offset(i as i64), Some(*v))),
        )
        .unwrap()
    }

    /// Flat for months 1..=13, then rising 0.02 per month.
    fn planted_kink() -> MetricSeries {
        let v: Vec<f64> = (1..=24).map(|m| 0.5 + 0.02 * (m as f64 - 13.0).max(0.0)).collect();
        series(&v)
    }

    #[test]
    fn fit_line_examples() {
        let pts: Vec<(f64, f64)> = (0..5).map(|x| (x as f64, 2.0 * x as f64 + 1.0)).collect();
        let f = fit_line(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12 && f.sse < 1e-20);
        let flat = fit_line(&[(0.0, 4.0), (1.0, 4.0), (2.0, 4.0)]).unwrap();
        assert_eq!((flat.slope, flat.sse), (0.0, 0.0));
        // y = [0, 1, 0]: slope 0 by symmetry, intercept 1/3, SSE 2/3.
        let tent = fit_line(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert!(tent.slope.abs() < 1e-15);
        assert!((tent.sse - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fit_line(&[(0.0, 1.0)]), Err(BreakpointError::TooShort { needed: 2, have: 1 }));
    }

    #[test]
    fn segmented_fit_on_exact_kink() {
        let s = planted_kink();
        let f = fit_segmented(&s, mk(2017, 1), 6, FitVariant::Independent).unwrap();
        assert!(f.sse < 1e-20);
        let c = fit_segmented(&s, mk(2017, 1), 6, FitVariant::Continuous).unwrap();
        assert!(c.sse < 1e-20);
        assert!((c.after.slope - 0.02).abs() < 1e-10);
    }

    #[test]
    fn segment_bounds_are_enforced() {
        let s = planted_kink();
        // 24 points, min_seg 6: feasible second-segment starts are points 7..=19.
        assert!(fit_segmented(&s, mk(2016, 7), 6, FitVariant::Independent).is_ok());
        assert!(fit_segmented(&s, mk(2017, 7), 6, FitVariant::Independent).is_ok());
        assert_eq!(
            fit_segmented(&s, mk(2016, 6), 6, FitVariant::Independent),
            Err(BreakpointError::SegmentTooShort { have: 5, min_seg: 6 })
        );
        assert_eq!(
            fit_segmented(&s, mk(2017, 8), 6, FitVariant::Independent),
            Err(BreakpointError::SegmentTooShort { have: 5, min_seg: 6 })
        );
    }

    #[test]
    fn planted_kink_is_recovered() {
        for variant in [FitVariant::Independent, FitVariant::Continuous] {
            let r = find_breakpoint(&planted_kink(), 6, variant).unwrap();
            assert_eq!(r.tau, mk(2017, 1), "{variant:?}");
            assert!(r.sse_ratio <= 1e-12);
            assert!(!r.degenerate);
        }
    }

    #[test]
    fn pure_line_is_degenerate() {
        let v: Vec<f64> = (0..23).map(|x| 0.1 + 0.01 * x as f64).collect();
        let r = find_breakpoint(&series(&v), 6, FitVariant::Independent).unwrap();
        assert_eq!(r.sse_ratio, 0.0);
        assert!(r.degenerate);
        assert_eq!(r.tau, mk(2016, 7));
    }

    #[test]
    fn ratio_guard() {
        assert_eq!(guarded_ratio(0.0, 0.0), (0.0, true));
        assert_eq!(guarded_ratio(1e-3, 1e-13), (1.0, true));
        assert_eq!(guarded_ratio(0.5, 2.0), (0.25, false));
    }

    #[test]
    fn too_short_series() {
        let s = series(&[0.0; 11]);
        assert_eq!(
            find_breakpoint(&s, 6, FitVariant::Independent),
            Err(BreakpointError::TooShort { needed: 12, have: 11 })
        );
        assert_eq!(find_breakpoint(&s, 1, FitVariant::Independent), Err(BreakpointError::BadMinSegment(1)));
    }

    #[test]
    fn nulls_keep_calendar_positions() {
        let mut pts: Vec<(MonthKey, Option<f64>)> = (0..24)
            .map(|i| (mk(2016, 1).offset(i), Some(if i < 12 { 0.0 } else { 1.0 })))
            .collect();
        pts[3].1 = None;
        pts[20].1 = None;
        let s = MetricSeries::from_values("m", "s", pts).unwrap();
        let r = find_breakpoint(&s, 6, FitVariant::Independent).unwrap();
        assert_eq!(r.tau, mk(2017, 1));
        assert_eq!(r.n_points, 22);
    }

    #[test]
    fn bootstrap_collapses_on_noiseless_kink() {
        let s = planted_kink();
        let r = find_breakpoint(&s, 6, FitVariant::Independent).unwrap();
        let b = bootstrap(&s, &r, 6, FitVariant::Independent, &BootstrapConfig::new(50, 7)).unwrap();
        assert_eq!((b.ci_low, b.ci_high), (Some(r.tau), Some(r.tau)));
        assert_eq!(b.stability, Some(1.0));
        assert_eq!(b.n_bootstrap, 50);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let v: Vec<f64> = (0..40)
            .map(|i| {
                let wiggle = libm::sin(i as f64 * 1.7) * 0.05;
                if i < 20 { 0.2 + wiggle } else { 0.35 + wiggle }
            })
            .collect();
        let s = series(&v);
        let r = find_breakpoint(&s, 6, FitVariant::Independent).unwrap();
        let cfg = BootstrapConfig::new(100, 42);
        let a = bootstrap(&s, &r, 6, FitVariant::Independent, &cfg).unwrap();
        let b = bootstrap(&s, &r, 6, FitVariant::Independent, &cfg).unwrap();
        assert_eq!(a, b);
        let other = bootstrap(&s, &r, 6, FitVariant::Independent, &BootstrapConfig::new(100, 43)).unwrap();
        assert_eq!(other.n_bootstrap, 100);
    }

    #[test]
    fn argmin_ignores_visit_order() {
        let profile = [(6, 0.5), (7, 0.2), (8, 0.2 + 1e-13), (9, 0.3)];
        let mut reversed = profile;
        reversed.reverse();
        assert_eq!(argmin_earliest(&profile, 1.0), argmin_earliest(&reversed, 1.0));
        assert_eq!(argmin_earliest(&reversed, 1.0).0, 7);
    }

    #[test]
    fn near_event_window() {
        let ga = NaiveDate::from_ymd_opt(2018, 9, 12).unwrap();
        assert!(near_event(mk(2018, 10), ga, 3));
        assert!(!near_event(mk(2019, 1), ga, 3));
        assert!(near_event(mk(2018, 9), ga, 3));
        assert!(near_event(mk(2018, 6), ga, 3));
    }
}
