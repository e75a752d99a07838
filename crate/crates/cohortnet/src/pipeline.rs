//! Orchestration: corpus -> per-cell metrics -> series -> breakpoints.
//!
//! Work fans out over (community, month) cells and over series on a rayon
//! pool. Results are collected in job order, so output never depends on the
//! number of workers.

use std::collections::BTreeMap;

use cohortnet_core::breakpoints::{bootstrap, find_breakpoint, near_event, BootstrapConfig, BreakpointError, BreakpointResult};
use cohortnet_core::cohorts::{build_first_seen, BanCalendar, CohortLabel, CohortScheme, FirstSeenIndex};
use cohortnet_core::graphs::{build_monthly_graph, build_post_index, GraphBuildStats, PostAuthorIndex};
use cohortnet_core::netmetrics::{structural_metrics, CohortedGraph, StructuralMetrics};
use cohortnet_core::reputation::{CommunityReputation, DailyMean, MonthlyReputation};
use cohortnet_core::series::{
    community_month_toxicity, global_series, platform_summary, smooth, user_month_toxicity, MetricSeries,
    PlatformSummary, SeriesError, SeriesPoint,
};
use cohortnet_core::{CommunityRef, InteractionEvent, MonthKey, Platform};
use rayon::prelude::*;

use crate::config::{hub_metric_name, RunConfig, SeriesChoice};
use crate::error::{Error, Result};
use crate::ingest::Corpus;

/// Scope label of a platform-wide weighted series.
pub fn global_scope(platform: Platform) -> String {
    format!("{platform}/global")
}

pub fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("worker pool: {e}")))
}

/// Everything measured for one community in one month.
#[derive(Debug, Clone)]
pub struct CellRecord {
    pub community: CommunityRef,
    pub month: MonthKey,
    pub active_users: usize,
    pub newcomers: usize,
    pub existing: usize,
    pub structural: StructuralMetrics,
    pub toxicity: Option<f64>,
    pub reputation: MonthlyReputation,
    pub build: GraphBuildStats,
    pub edge_list: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MetricsRun {
    pub grid: Vec<MonthKey>,
    pub communities: Vec<CommunityRef>,
    pub cells: Vec<CellRecord>,
    /// Per-community series followed by platform-global series.
    pub series: Vec<MetricSeries>,
    pub smoothed: Vec<MetricSeries>,
    pub platform_summaries: Vec<PlatformSummary>,
    pub reputation_daily: Vec<(CommunityRef, Vec<DailyMean>)>,
}

impl MetricsRun {
    pub fn find(&self, scope: &str, metric: &str, choice: SeriesChoice) -> Option<&MetricSeries> {
        let list = match choice {
            SeriesChoice::Raw => &self.series,
            SeriesChoice::Smoothed => &self.smoothed,
        };
        list.iter().find(|s| s.scope == scope && s.metric == metric)
    }
}

/// Per-cell metric names in output order, hub columns expanded.
pub fn metric_names(cfg: &RunConfig) -> Vec<String> {
    let mut names: Vec<String> = ["active_users", "newcomer_active_users", "existing_active_users", "nodes", "edges", "ei_index"]
        .map(String::from)
        .to_vec();
    names.extend(cfg.metrics.hub_tops.iter().map(|&t| hub_metric_name(t)));
    names.extend(
        [
            "degree_share_ratio",
            "degree_assortativity",
            "degree_gini",
            "existing_gini",
            "reputation_mean",
            "reputation_active_users",
            "toxicity_mean",
        ]
        .map(String::from),
    );
    names
}

const COUNT_METRICS: [&str; 6] =
    ["active_users", "newcomer_active_users", "existing_active_users", "nodes", "edges", "reputation_active_users"];

fn cell_value(cell: &CellRecord, metric: &str, hub_names: &[String]) -> Option<f64> {
    let s = &cell.structural;
    let count = |n: usize| Some(n as f64);
    match metric {
        "active_users" => count(cell.active_users),
        "newcomer_active_users" => count(cell.newcomers),
        "existing_active_users" => count(cell.existing),
        "nodes" => count(s.nodes),
        "edges" => count(s.edges),
        "ei_index" => s.ei_index,
        "degree_share_ratio" => s.degree_share_ratio,
        "degree_assortativity" => s.degree_assortativity,
        "degree_gini" => s.degree_gini,
        "existing_gini" => s.existing_gini,
        "reputation_mean" => cell.reputation.mean,
        "reputation_active_users" => count(cell.reputation.reputation_active_users),
        "toxicity_mean" => cell.toxicity,
        hub => hub_names.iter().position(|h| h == hub).and_then(|i| s.hub_rates[i].1),
    }
}

struct Prepared<'a> {
    grid: Vec<MonthKey>,
    buckets: BTreeMap<CommunityRef, BTreeMap<MonthKey, Vec<&'a InteractionEvent>>>,
    first_seen: FirstSeenIndex,
    posts: PostAuthorIndex,
}

fn prepare(events: &[InteractionEvent]) -> Result<Prepared<'_>> {
    let (lo, hi) = events
        .iter()
        .map(|e| e.month())
        .fold(None, |acc: Option<(MonthKey, MonthKey)>, m| match acc {
            None => Some((m, m)),
            Some((lo, hi)) => Some((lo.min(m), hi.max(m))),
        })
        .ok_or(Error::EmptyCorpus)?;
    let mut buckets: BTreeMap<CommunityRef, BTreeMap<MonthKey, Vec<&InteractionEvent>>> = BTreeMap::new();
    for ev in events {
        buckets.entry(ev.community()).or_default().entry(ev.month()).or_default().push(ev);
    }
    Ok(Prepared {
        grid: MonthKey::range_inclusive(lo, hi).collect(),
        buckets,
        first_seen: build_first_seen(events),
        posts: build_post_index(events),
    })
}

struct CellInput<'p> {
    community: &'p CommunityRef,
    month: MonthKey,
    events: &'p [&'p InteractionEvent],
}

fn compute_cell(
    input: &CellInput,
    prep: &Prepared,
    scheme: &CohortScheme,
    percentiles: &[f64],
    reputation: MonthlyReputation,
    keep_edges: bool,
) -> Result<CellRecord> {
    let CellInput { community, month, events } = *input;
    let (graph, build) = build_monthly_graph(events.iter().copied(), community, month, &prep.posts);
    let mut labels = BTreeMap::new();
    let (mut newcomers, mut existing) = (0, 0);
    for user in graph.nodes() {
        let first = prep
            .first_seen
            .get(community, user)
            .ok_or_else(|| Error::Domain(format!("{community}: no first-seen time for {user}")))?;
        let label = scheme.label_at(first, month).map_err(|e| Error::Domain(format!("{community} {month}: {e}")))?;
        match label {
            Some(CohortLabel::Newcomer) => newcomers += 1,
            Some(CohortLabel::Existing) => existing += 1,
            None => {}
        }
        labels.insert(user.clone(), label);
    }
    let active_users = graph.node_count();
    let edge_list = (keep_edges && graph.edge_count() > 0).then(|| graph.to_edge_list());
    let cg = CohortedGraph::new(graph, labels).map_err(|e| Error::Domain(e.to_string()))?;
    let structural = structural_metrics(&cg, percentiles).map_err(|e| Error::Domain(e.to_string()))?;
    let toxicity = community_month_toxicity(&user_month_toxicity(events.iter().copied(), community, month));
    Ok(CellRecord {
        community: community.clone(),
        month,
        active_users,
        newcomers,
        existing,
        structural,
        toxicity,
        reputation,
        build,
        edge_list,
    })
}

type ReputationOut = (BTreeMap<MonthKey, MonthlyReputation>, Vec<DailyMean>);

fn community_reputation(
    events: &BTreeMap<MonthKey, Vec<&InteractionEvent>>,
    grid: &[MonthKey],
    cfg: &RunConfig,
) -> Result<ReputationOut> {
    let mut per_user: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for ev in events.values().flatten() {
        per_user.entry(ev.user_id.as_str()).or_default().push(ev.timestamp);
    }
    let last = *grid.last().expect("non-empty grid");
    let last_day = last.succ().first_day_index() - 1;
    let mut acc = CommunityReputation::new(cfg.reputation.params(), cfg.reputation.thresholds(), last_day)
        .map_err(|e| Error::Config(e.to_string()))?;
    for ts in per_user.values_mut() {
        ts.sort_unstable();
        acc.add_user(ts).map_err(|e| Error::Domain(e.to_string()))?;
    }
    let monthly = grid.iter().map(|&m| (m, acc.monthly(m))).collect();
    Ok((monthly, acc.daily_means()))
}

fn series_err(e: SeriesError) -> Error {
    Error::Domain(format!("series: {e}"))
}

/// Computes every per-cell metric, the series built from them and the
/// cross-platform summary.
pub fn compute_metrics(corpus: &Corpus, cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<MetricsRun> {
    cfg.validate()?;
    let prep = prepare(&corpus.events)?;
    let scheme = cfg.scheme()?;
    let percentiles = cfg.hub_percentiles();
    let communities: Vec<CommunityRef> = prep.buckets.keys().cloned().collect();

    let reputations: Vec<ReputationOut> = pool.install(|| {
        communities
            .par_iter()
            .map(|c| community_reputation(&prep.buckets[c], &prep.grid, cfg))
            .collect::<Result<_>>()
    })?;

    let empty: Vec<&InteractionEvent> = Vec::new();
    let jobs: Vec<(usize, CellInput)> = communities
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            let months = &prep.buckets[c];
            let empty = &empty;
            prep.grid.iter().map(move |&m| {
                (ci, CellInput { community: c, month: m, events: months.get(&m).unwrap_or(empty).as_slice() })
            })
        })
        .collect();
    let cells: Vec<CellRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|(ci, input)| {
                let rep = reputations[*ci].0[&input.month].clone();
                compute_cell(input, &prep, &scheme, &percentiles, rep, cfg.metrics.edge_lists)
            })
            .collect::<Result<_>>()
    })?;

    let names = metric_names(cfg);
    let hub_names: Vec<String> = cfg.metrics.hub_tops.iter().map(|&t| hub_metric_name(t)).collect();
    let mut series = Vec::new();
    for (ci, community) in communities.iter().enumerate() {
        let rows = &cells[ci * prep.grid.len()..(ci + 1) * prep.grid.len()];
        for metric in &names {
            let points = rows
                .iter()
                .map(|c| SeriesPoint { month: c.month, value: cell_value(c, metric, &hub_names), n: c.active_users as u64 })
                .collect();
            series.push(MetricSeries::new(metric.clone(), community.to_string(), points).map_err(series_err)?);
        }
    }

    let mut globals = Vec::new();
    for platform in [Platform::Source, Platform::Receiver] {
        let scopes: Vec<String> =
            communities.iter().filter(|c| c.platform == platform).map(ToString::to_string).collect();
        if scopes.is_empty() {
            continue;
        }
        let pick = |metric: &str| -> Vec<MetricSeries> {
            scopes
                .iter()
                .map(|s| series.iter().find(|x| &x.scope == s && x.metric == metric).expect("series exists").clone())
                .collect()
        };
        let weights = pick("active_users");
        for metric in names.iter().filter(|m| !COUNT_METRICS.contains(&m.as_str())) {
            let g = global_series(metric, &global_scope(platform), &pick(metric), &weights).map_err(series_err)?;
            globals.push(g);
        }
    }
    series.extend(globals);

    let smoothed = series
        .iter()
        .map(|s| smooth(s, cfg.metrics.smoothing_window))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(series_err)?;

    let mut platform_summaries = Vec::new();
    let window = (cfg.summary.start, cfg.summary.end);
    for source in communities.iter().filter(|c| c.platform == Platform::Source) {
        let receiver = CommunityRef::new(Platform::Receiver, source.community_id.clone());
        if !prep.buckets.contains_key(&receiver) {
            continue;
        }
        let get = |c: &CommunityRef| {
            series.iter().find(|s| s.scope == c.to_string() && s.metric == "toxicity_mean").expect("series exists")
        };
        match platform_summary(&source.community_id, get(source), get(&receiver), window) {
            Ok(summary) => platform_summaries.push(summary),
            Err(SeriesError::EmptyWindow | SeriesError::ZeroWeight) => {}
            Err(e) => return Err(series_err(e)),
        }
    }

    let reputation_daily = communities.iter().cloned().zip(reputations.into_iter().map(|r| r.1)).collect();
    Ok(MetricsRun { grid: prep.grid, communities, cells, series, smoothed, platform_summaries, reputation_daily })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakStatus {
    Ok,
    /// The ratio guard fired; tau is reported but carries no evidence.
    Degenerate,
    SkippedShort,
}

impl BreakStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BreakStatus::Ok => "ok",
            BreakStatus::Degenerate => "degenerate",
            BreakStatus::SkippedShort => "skipped_short",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BreakpointRow {
    pub scope: String,
    pub metric: String,
    pub series: SeriesChoice,
    pub status: BreakStatus,
    pub n_points: usize,
    pub result: Option<BreakpointResult>,
    /// `(ban label, near)` per calendar entry.
    pub near: Vec<(String, bool)>,
}

fn detect_one(series: &MetricSeries, cfg: &RunConfig, calendar: &BanCalendar) -> Result<BreakpointRow> {
    let bp = &cfg.breakpoints;
    let n_points = series.values().flatten().count();
    let mut row = BreakpointRow {
        scope: series.scope.clone(),
        metric: series.metric.clone(),
        series: bp.series,
        status: BreakStatus::SkippedShort,
        n_points,
        result: None,
        near: Vec::new(),
    };
    let found = match find_breakpoint(series, bp.min_seg, bp.fit) {
        Ok(r) => r,
        Err(BreakpointError::TooShort { .. }) => return Ok(row),
        Err(e) => return Err(Error::Domain(format!("{} {}: {e}", series.scope, series.metric))),
    };
    let result = if bp.iterations > 0 {
        let mut boot = BootstrapConfig::new(bp.iterations, bp.seed.expect("validated"));
        boot.stability_window = bp.stability_window;
        bootstrap(series, &found, bp.min_seg, bp.fit, &boot)
            .map_err(|e| Error::Domain(format!("{} {}: {e}", series.scope, series.metric)))?
    } else {
        found
    };
    row.status = if result.degenerate { BreakStatus::Degenerate } else { BreakStatus::Ok };
    row.near = calendar
        .entries()
        .iter()
        .map(|b| (b.label.clone(), near_event(result.tau, b.date, bp.near_window)))
        .collect();
    row.result = Some(result);
    Ok(row)
}

/// One row per (scope, configured metric), scopes in series order.
pub fn detect_breakpoints(run: &MetricsRun, cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<Vec<BreakpointRow>> {
    cfg.validate()?;
    let calendar = cfg.calendar()?;
    let list = match cfg.breakpoints.series {
        SeriesChoice::Raw => &run.series,
        SeriesChoice::Smoothed => &run.smoothed,
    };
    let mut scopes: Vec<&str> = Vec::new();
    for s in list {
        if !scopes.contains(&s.scope.as_str()) {
            scopes.push(&s.scope);
        }
    }
    let jobs: Vec<&MetricSeries> = scopes
        .iter()
        .flat_map(|scope| {
            cfg.breakpoints
                .metrics
                .iter()
                .filter_map(move |m| list.iter().find(|s| s.scope == *scope && &s.metric == m))
        })
        .collect();
    pool.install(|| jobs.par_iter().map(|s| detect_one(s, cfg, &calendar)).collect())
}
