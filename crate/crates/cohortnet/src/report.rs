//! Markdown summary and versioned JSON bundle. Neither contains wall-clock
//! data, so identical inputs and seed give identical bytes.

use std::fmt::Write as _;

use cohortnet_core::events::ValidationReport;
use cohortnet_core::MonthKey;
use serde::Serialize;

use crate::config::RunConfig;
use crate::export;
use crate::pipeline::{BreakStatus, BreakpointRow, MetricsRun};
use crate::synth_io::TruthSidecar;

pub const SCHEMA_VERSION: u32 = 1;
pub const MARKDOWN_FILE: &str = "report.md";
pub const JSON_FILE: &str = "report.json";

pub struct ReportInput<'a> {
    pub cfg: &'a RunConfig,
    pub validation: &'a ValidationReport,
    pub run: &'a MetricsRun,
    pub breakpoints: &'a [BreakpointRow],
    pub truth: Option<&'a TruthSidecar>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityOverview {
    pub scope: String,
    pub first_active: Option<MonthKey>,
    pub last_active: Option<MonthKey>,
    pub peak_active_users: u64,
    pub mean_ei_index: Option<f64>,
    pub mean_toxicity: Option<f64>,
    pub mean_reputation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeComparison {
    pub ban_month: MonthKey,
    pub p_cross: f64,
    pub expected_ei: f64,
    pub measured_ei: Option<f64>,
    pub expected_toxicity: f64,
    pub measured_toxicity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthComparison {
    pub scope: String,
    pub regimes: Vec<RegimeComparison>,
    pub planted_break: Option<MonthKey>,
    pub recovered_break: Option<MonthKey>,
    pub break_status: Option<&'static str>,
    /// Recovered within one month of the planted break.
    pub break_recovered: bool,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (s, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn community_overview(run: &MetricsRun) -> Vec<CommunityOverview> {
    use crate::config::SeriesChoice::Raw;
    run.communities
        .iter()
        .map(|c| {
            let scope = c.to_string();
            let active = run.find(&scope, "active_users", Raw).expect("series exists");
            let live: Vec<MonthKey> = active.points().iter().filter(|p| p.n > 0).map(|p| p.month).collect();
            let mean = |metric: &str| run.find(&scope, metric, Raw).and_then(|s| mean_of(s.values()));
            CommunityOverview {
                first_active: live.first().copied(),
                last_active: live.last().copied(),
                peak_active_users: active.points().iter().map(|p| p.n).max().unwrap_or(0),
                mean_ei_index: mean("ei_index"),
                mean_toxicity: mean("toxicity_mean"),
                mean_reputation: mean("reputation_mean"),
                scope,
            }
        })
        .collect()
}

/// Measured regime means and the recovered E-I break for the truth scope.
pub fn compare_truth(truth: &TruthSidecar, run: &MetricsRun, rows: &[BreakpointRow]) -> TruthComparison {
    use crate::config::SeriesChoice::Raw;
    let gt = &truth.ground_truth;
    let regime_mean = |metric: &str, i: usize| {
        let start = gt.regimes[i].ban_month;
        let end = gt.regimes.get(i + 1).map(|r| r.ban_month);
        run.find(&truth.scope, metric, Raw).and_then(|s| {
            mean_of(
                s.points()
                    .iter()
                    .filter(|p| p.month >= start && end.is_none_or(|e| p.month < e))
                    .map(|p| p.value),
            )
        })
    };
    let regimes = gt
        .regimes
        .iter()
        .enumerate()
        .map(|(i, r)| RegimeComparison {
            ban_month: r.ban_month,
            p_cross: r.p_cross,
            expected_ei: r.expected_ei,
            measured_ei: regime_mean("ei_index", i),
            expected_toxicity: r.expected_toxicity,
            measured_toxicity: regime_mean("toxicity_mean", i),
        })
        .collect();
    let row = rows.iter().find(|r| r.scope == truth.scope && r.metric == "ei_index");
    let recovered_break = row.and_then(|r| r.result.as_ref()).map(|r| r.tau);
    let break_recovered = match (gt.planted_break, recovered_break) {
        (Some(p), Some(r)) => r.months_since(p).abs() <= 1,
        _ => false,
    };
    TruthComparison {
        scope: truth.scope.clone(),
        regimes,
        planted_break: gt.planted_break,
        recovered_break,
        break_status: row.map(|r| r.status.as_str()),
        break_recovered,
    }
}

fn f(v: Option<f64>, places: usize) -> String {
    v.map(|x| format!("{x:.places$}")).unwrap_or_else(|| "-".into())
}

fn m(v: Option<MonthKey>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

pub fn render_markdown(input: &ReportInput) -> String {
    let ReportInput { cfg, validation, run, breakpoints, truth } = input;
    let bp = &cfg.breakpoints;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "# cohortnet report\n");
    let _ = writeln!(
        w,
        "Months {} to {}; {} communities; seed {}; fit {}; {} series.\n",
        m(run.grid.first().copied()),
        m(run.grid.last().copied()),
        run.communities.len(),
        bp.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
        bp.fit.as_str(),
        bp.series.as_str()
    );

    let _ = writeln!(w, "## Input\n");
    let _ = writeln!(w, "| rows read | accepted | rejected |\n|---:|---:|---:|");
    let _ = writeln!(w, "| {} | {} | {} |\n", validation.rows_read, validation.rows_accepted, validation.rows_rejected);
    if !validation.rejection_reasons.is_empty() {
        let _ = writeln!(w, "| reason | rows |\n|---|---:|");
        for (code, n) in &validation.rejection_reasons {
            let _ = writeln!(w, "| {code} | {n} |");
        }
        let _ = writeln!(w);
    }

    let _ = writeln!(w, "## Communities\n");
    let _ = writeln!(
        w,
        "| scope | first active | last active | peak active users | mean E-I | mean toxicity | mean reputation |\n|---|---|---|---:|---:|---:|---:|"
    );
    for c in community_overview(run) {
        let _ = writeln!(
            w,
            "| {} | {} | {} | {} | {} | {} | {} |",
            c.scope,
            m(c.first_active),
            m(c.last_active),
            c.peak_active_users,
            f(c.mean_ei_index, 3),
            f(c.mean_toxicity, 3),
            f(c.mean_reputation, 3)
        );
    }
    let _ = writeln!(w);

    let _ = writeln!(w, "## Cross-platform toxicity\n");
    if run.platform_summaries.is_empty() {
        let _ = writeln!(w, "No community appears on both platforms inside {} to {}.\n", cfg.summary.start, cfg.summary.end);
    } else {
        let _ = writeln!(w, "Window {} to {}, weighted by monthly active users.\n", cfg.summary.start, cfg.summary.end);
        let _ = writeln!(w, "| community | source | receiver | ratio | difference |\n|---|---:|---:|---:|---:|");
        for s in &run.platform_summaries {
            let _ = writeln!(
                w,
                "| {} | {:.3} | {:.3} | {} | {:+.3} |",
                s.community_id,
                s.mean_source,
                s.mean_receiver,
                f(s.ratio, 2),
                s.difference
            );
        }
        let _ = writeln!(w);
    }

    let _ = writeln!(w, "## Breakpoints\n");
    let eligible: Vec<&BreakpointRow> = breakpoints.iter().filter(|r| r.status != BreakStatus::SkippedShort).collect();
    if eligible.is_empty() {
        let _ = writeln!(w, "no series eligible\n");
    } else {
        let _ = writeln!(
            w,
            "| scope | metric | status | break | 90% CI | SSE ratio | stability | near bans |\n|---|---|---|---|---|---:|---:|---|"
        );
        for r in &eligible {
            let res = r.result.as_ref().expect("eligible rows carry a result");
            let near: Vec<&str> = r.near.iter().filter(|(_, n)| *n).map(|(l, _)| l.as_str()).collect();
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} | {} to {} | {:.3} | {} | {} |",
                r.scope,
                r.metric,
                r.status.as_str(),
                res.tau,
                m(res.ci_low),
                m(res.ci_high),
                res.sse_ratio,
                f(res.stability, 2),
                if near.is_empty() { "-".into() } else { near.join(", ") }
            );
        }
        let _ = writeln!(w);
    }
    let skipped = breakpoints.len() - eligible.len();
    if skipped > 0 {
        let _ = writeln!(w, "{skipped} series skipped: fewer than {} non-null months.\n", 2 * bp.min_seg);
    }

    if let Some(truth) = truth {
        let cmp = compare_truth(truth, run, breakpoints);
        let _ = writeln!(w, "## Planted regimes ({})\n", cmp.scope);
        let _ = writeln!(
            w,
            "| regime start | p_cross | expected E-I | measured E-I | expected toxicity | measured toxicity |\n|---|---:|---:|---:|---:|---:|"
        );
        for r in &cmp.regimes {
            let _ = writeln!(
                w,
                "| {} | {:.3} | {:.3} | {} | {:.3} | {} |",
                r.ban_month,
                r.p_cross,
                r.expected_ei,
                f(r.measured_ei, 3),
                r.expected_toxicity,
                f(r.measured_toxicity, 3)
            );
        }
        let _ = writeln!(
            w,
            "\nPlanted break {}, recovered {} ({}): {}.\n",
            m(cmp.planted_break),
            m(cmp.recovered_break),
            cmp.break_status.unwrap_or("not run"),
            if cmp.break_recovered { "within one month" } else { "not recovered" }
        );
    }

    let _ = writeln!(w, "## Files\n");
    for name in [
        export::METRICS_FILE,
        export::METRICS_SMOOTHED_FILE,
        export::CELLS_FILE,
        export::PLATFORM_SUMMARY_FILE,
        export::REPUTATION_DAILY_FILE,
        export::BREAKPOINTS_FILE,
        JSON_FILE,
    ] {
        let _ = writeln!(w, "- `{name}`");
    }
    out
}

#[derive(Serialize)]
struct BreakpointJson<'a> {
    scope: &'a str,
    metric: &'a str,
    series: &'static str,
    status: &'static str,
    n_points: usize,
    break_month: Option<MonthKey>,
    ci_low: Option<MonthKey>,
    ci_high: Option<MonthKey>,
    sse_ratio: Option<f64>,
    stability: Option<f64>,
    near: Vec<&'a str>,
}

#[derive(Serialize)]
struct Bundle<'a> {
    schema_version: u32,
    grid: (Option<MonthKey>, Option<MonthKey>),
    settings: serde_json::Value,
    input: &'a ValidationReport,
    communities: Vec<CommunityOverview>,
    platform_summary: Vec<serde_json::Value>,
    breakpoints: Vec<BreakpointJson<'a>>,
    ground_truth: Option<TruthComparison>,
}

/// Settings that shape the results. Worker count and output location are
/// left out so the bundle does not depend on how a run was executed.
fn result_settings(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("serializable");
    if let Some(map) = v.as_object_mut() {
        map.remove("workers");
        map.remove("output");
    }
    v
}

pub fn render_json(input: &ReportInput) -> String {
    let ReportInput { cfg, validation, run, breakpoints, truth } = input;
    let bundle = Bundle {
        schema_version: SCHEMA_VERSION,
        grid: (run.grid.first().copied(), run.grid.last().copied()),
        settings: result_settings(cfg),
        input: validation,
        communities: community_overview(run),
        platform_summary: run
            .platform_summaries
            .iter()
            .map(|s| {
                serde_json::json!({
                    "community": s.community_id,
                    "mean_source": s.mean_source,
                    "mean_receiver": s.mean_receiver,
                    "ratio": s.ratio,
                    "difference": s.difference,
                })
            })
            .collect(),
        breakpoints: breakpoints
            .iter()
            .map(|r| {
                let res = r.result.as_ref();
                BreakpointJson {
                    scope: &r.scope,
                    metric: &r.metric,
                    series: r.series.as_str(),
                    status: r.status.as_str(),
                    n_points: r.n_points,
                    break_month: res.map(|x| x.tau),
                    ci_low: res.and_then(|x| x.ci_low),
                    ci_high: res.and_then(|x| x.ci_high),
                    sse_ratio: res.map(|x| x.sse_ratio),
                    stability: res.and_then(|x| x.stability),
                    near: r.near.iter().filter(|(_, n)| *n).map(|(l, _)| l.as_str()).collect(),
                }
            })
            .collect(),
        ground_truth: truth.map(|t| compare_truth(t, run, breakpoints)),
    };
    serde_json::to_string_pretty(&bundle).expect("serializable") + "\n"
}
