//! Monthly metric series: toxicity rollups, activity counts, weighted
//! global aggregation, smoothing and cross-platform summaries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::events::{month_of, CommunityRef, InteractionEvent, MonthKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("series months must be strictly increasing")]
    Unordered,
    #[error("series do not share a month grid")]
    GridMismatch,
    #[error("smoothing window must be odd and at least 1, got {0}")]
    BadWindow(usize),
    #[error("no points inside the comparison window")]
    EmptyWindow,
    #[error("total active users over the window is zero")]
    ZeroWeight,
    #[error("no input series")]
    NoSeries,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub month: MonthKey,
    pub value: Option<f64>,
    /// Population behind the value (active users for most metrics).
    pub n: u64,
}

/// One metric over months for a community or an aggregate scope.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub metric: String,
    /// `platform/community` or `platform/global`.
    pub scope: String,
    points: Vec<SeriesPoint>,
}

impl MetricSeries {
    pub fn new(metric: impl Into<String>, scope: impl Into<String>, points: Vec<SeriesPoint>) -> Result<Self, SeriesError> {
        if points.windows(2).any(|w| w[0].month >= w[1].month) {
            return Err(SeriesError::Unordered);
        }
        Ok(Self {
            metric: metric.into(),
            scope: scope.into(),
            points,
        })
    }

    /// Builds a series from `(month, value)` pairs with `n = 0`.
    pub fn from_values(
        metric: impl Into<String>,
        scope: impl Into<String>,
        values: impl IntoIterator<Item = (MonthKey, Option<f64>)>,
    ) -> Result<Self, SeriesError> {
        let points = values.into_iter().map(|(month, value)| SeriesPoint { month, value, n: 0 }).collect();
        Self::new(metric, scope, points)
    }

    pub fn points(&self) -> &[SeriesPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.points.iter().map(|p| p.value)
    }

    pub fn months(&self) -> impl Iterator<Item = MonthKey> + '_ {
        self.points.iter().map(|p| p.month)
    }

    fn same_grid(&self, other: &MetricSeries) -> bool {
        self.points.len() == other.points.len() && self.months().eq(other.months())
    }
}

/// Per-user mean toxicity over scored events in one (community, month).
pub fn user_month_toxicity<'a>(
    events: impl IntoIterator<Item = &'a InteractionEvent>,
    community: &CommunityRef,
    month: MonthKey,
) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for ev in events {
        let Some(tox) = ev.toxicity else { continue };
        if !ev.in_community(community) || month_of(ev.timestamp) != month {
            continue;
        }
        acc.entry(ev.user_id.as_str()).or_default().push(tox);
    }
    // Exact sums make the mean independent of event order and unchanged
    // when a user's events are repeated.
    acc.into_iter()
        .map(|(u, scores)| (String::from(u), crate::stats::exact_sum(scores.iter().copied()) / scores.len() as f64))
        .collect()
}

/// Unweighted mean over users; each user counts once.
pub fn community_month_toxicity(user_month: &BTreeMap<String, f64>) -> Option<f64> {
    crate::stats::mean(user_month.values().copied())
}

/// Distinct users with at least one event in the cell.
pub fn monthly_active_users<'a>(
    events: impl IntoIterator<Item = &'a InteractionEvent>,
    community: &CommunityRef,
    month: MonthKey,
) -> usize {
    events
        .into_iter()
        .filter(|ev| ev.in_community(community) && month_of(ev.timestamp) == month)
        .map(|ev| ev.user_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

/// Active-user-weighted mean toxicity of the same community on both
/// platforms.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformSummary {
    pub community_id: String,
    pub mean_source: f64,
    pub mean_receiver: f64,
    /// `mean_receiver / mean_source`; `None` when the source mean is 0.
    pub ratio: Option<f64>,
    pub difference: f64,
}

fn weighted_window_mean(series: &MetricSeries, window: (MonthKey, MonthKey)) -> Result<f64, SeriesError> {
    let inside: Vec<&SeriesPoint> = series
        .points
        .iter()
        .filter(|p| p.month >= window.0 && p.month <= window.1)
        .filter(|p| p.value.is_some())
        .collect();
    if inside.is_empty() {
        return Err(SeriesError::EmptyWindow);
    }
    let total: f64 = inside.iter().map(|p| p.n as f64).sum();
    if total <= 0.0 {
        return Err(SeriesError::ZeroWeight);
    }
    let weighted: f64 = inside.iter().map(|p| p.value.unwrap_or(0.0) * p.n as f64).sum();
    Ok(weighted / total)
}

/// Each side's mean is `sum(toxicity * active users) / sum(active users)`
/// over window months; weights are each point's `n`.
pub fn platform_summary(
    community_id: &str,
    source: &MetricSeries,
    receiver: &MetricSeries,
    window: (MonthKey, MonthKey),
) -> Result<PlatformSummary, SeriesError> {
    let mean_source = weighted_window_mean(source, window)?;
    let mean_receiver = weighted_window_mean(receiver, window)?;
    Ok(PlatformSummary {
        community_id: String::from(community_id),
        mean_source,
        mean_receiver,
        ratio: (mean_source > 0.0).then(|| mean_receiver / mean_source),
        difference: mean_receiver - mean_source,
    })
}

/// Weighted mean across communities per month. `weights[i]` supplies the
/// weights of `series[i]` as its values; communities with a null value or
/// null weight that month are skipped.
pub fn global_series(
    metric: &str,
    scope: &str,
    series: &[MetricSeries],
    weights: &[MetricSeries],
) -> Result<MetricSeries, SeriesError> {
    let first = series.first().ok_or(SeriesError::NoSeries)?;
    if series.len() != weights.len() || series.iter().chain(weights).any(|s| !s.same_grid(first)) {
        return Err(SeriesError::GridMismatch);
    }
    let points = (0..first.len())
        .map(|i| {
            let present: Vec<(f64, f64)> = series
                .iter()
                .zip(weights)
                .filter_map(|(s, w)| Some((s.points[i].value?, w.points[i].value?)))
                .collect();
            // Weights are taken relative to the largest so that equal weights
            // reduce to exactly 1.0 and the plain mean.
            let scale = present.iter().map(|&(_, w)| w).fold(0.0, f64::max);
            let (mut num, mut den, mut total) = (0.0, 0.0, 0.0);
            if scale > 0.0 {
                for &(v, w) in &present {
                    num += v * (w / scale);
                    den += w / scale;
                    total += w;
                }
            }
            SeriesPoint {
                month: first.points[i].month,
                value: (den > 0.0).then(|| num / den),
                n: total as u64,
            }
        })
        .collect();
    MetricSeries::new(metric, scope, points)
}

/// Centered rolling mean over non-null values; partial windows at the
/// edges; all-null windows stay null.
pub fn smooth(series: &MetricSeries, window: usize) -> Result<MetricSeries, SeriesError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(SeriesError::BadWindow(window));
    }
    let half = window / 2;
    let n = series.points.len();
    let points = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n.saturating_sub(1));
            let value = crate::stats::shifted_mean(series.points[lo..=hi].iter().filter_map(|p| p.value));
            SeriesPoint { value, ..series.points[i] }
        })
        .collect();
    Ok(MetricSeries {
        metric: series.metric.clone(),
        scope: series.scope.clone(),
        points,
    })
}
