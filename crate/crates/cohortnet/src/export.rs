//! Plot-ready CSV output. Every table is rendered to bytes first and then
//! written, so reruns over unchanged inputs produce identical files.
//!
//! Nulls are empty fields; floats use Rust's shortest round-trip form.

use std::path::{Path, PathBuf};

use cohortnet_core::cohorts::BanCalendar;
use cohortnet_core::reputation::DailyMean;
use cohortnet_core::series::{MetricSeries, PlatformSummary};
use cohortnet_core::CommunityRef;

use crate::error::{Error, Result};
use crate::pipeline::{BreakpointRow, CellRecord, MetricsRun};

pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_SMOOTHED_FILE: &str = "metrics_smoothed.csv";
pub const CELLS_FILE: &str = "cells.csv";
pub const PLATFORM_SUMMARY_FILE: &str = "platform_summary.csv";
pub const REPUTATION_DAILY_FILE: &str = "reputation_daily.csv";
pub const BREAKPOINTS_FILE: &str = "breakpoints.csv";

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Long format: `metric,scope,year,month,value,n`.
pub fn metrics_csv(series: &[MetricSeries]) -> Vec<u8> {
    let rows = series.iter().flat_map(|s| {
        s.points().iter().map(move |p| {
            vec![
                s.metric.clone(),
                s.scope.clone(),
                p.month.year().to_string(),
                p.month.month().to_string(),
                num(p.value),
                p.n.to_string(),
            ]
        })
    });
    table(&strings(&["metric", "scope", "year", "month", "value", "n"]), rows)
}

/// Graph construction diagnostics per cell.
pub fn cells_csv(cells: &[CellRecord]) -> Vec<u8> {
    let rows = cells.iter().map(|c| {
        vec![
            c.community.to_string(),
            c.month.year().to_string(),
            c.month.month().to_string(),
            c.active_users.to_string(),
            c.build.comments.to_string(),
            c.build.dangling_parent.to_string(),
            c.build.cross_community_parent.to_string(),
            c.build.self_reply.to_string(),
        ]
    });
    let header = ["scope", "year", "month", "active_users", "comments", "dangling_parent", "cross_community_parent", "self_reply"];
    table(&strings(&header), rows)
}

pub fn platform_summary_csv(rows: &[PlatformSummary]) -> Vec<u8> {
    let rows = rows.iter().map(|s| {
        vec![
            s.community_id.clone(),
            s.mean_source.to_string(),
            s.mean_receiver.to_string(),
            num(s.ratio),
            s.difference.to_string(),
        ]
    });
    table(&strings(&["community", "mean_source", "mean_receiver", "ratio", "difference"]), rows)
}

pub fn reputation_daily_csv(daily: &[(CommunityRef, Vec<DailyMean>)]) -> Vec<u8> {
    let rows = daily.iter().flat_map(|(c, days)| {
        days.iter().map(move |d| {
            let date = chrono::DateTime::from_timestamp(d.day * cohortnet_core::events::SECONDS_PER_DAY, 0)
                .expect("day in range")
                .date_naive();
            vec![c.to_string(), date.to_string(), d.mean.to_string(), d.qualifying_users.to_string()]
        })
    });
    table(&strings(&["scope", "date", "mean", "qualifying_users"]), rows)
}

/// Column-safe form of a ban label.
pub fn label_slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

pub fn breakpoints_csv(rows: &[BreakpointRow], calendar: &BanCalendar, fit: &str) -> Vec<u8> {
    let mut header = strings(&[
        "scope",
        "metric",
        "series",
        "fit",
        "status",
        "n_points",
        "break_month",
        "ci_low",
        "ci_high",
        "sse_ratio",
        "sse_segmented",
        "sse_single",
        "stability",
        "n_bootstrap",
    ]);
    header.extend(calendar.entries().iter().map(|b| format!("near_{}", label_slug(&b.label))));
    let out = rows.iter().map(|r| {
        let month = |m: Option<cohortnet_core::MonthKey>| m.map(|m| m.to_string()).unwrap_or_default();
        let res = r.result.as_ref();
        let mut row = vec![
            r.scope.clone(),
            r.metric.clone(),
            r.series.as_str().to_string(),
            fit.to_string(),
            r.status.as_str().to_string(),
            r.n_points.to_string(),
            month(res.map(|x| x.tau)),
            month(res.and_then(|x| x.ci_low)),
            month(res.and_then(|x| x.ci_high)),
            num(res.map(|x| x.sse_ratio)),
            num(res.map(|x| x.sse_segmented)),
            num(res.map(|x| x.sse_single)),
            num(res.and_then(|x| x.stability)),
            res.map(|x| x.n_bootstrap.to_string()).unwrap_or_default(),
        ];
        if r.near.is_empty() {
            row.extend(calendar.entries().iter().map(|_| String::new()));
        } else {
            row.extend(r.near.iter().map(|(_, near)| near.to_string()));
        }
        row
    });
    table(&header, out)
}

/// Edge-list files keyed by relative path, `edges/<platform>_<community>_<YYYY-MM>.txt`.
pub fn edge_list_files(cells: &[CellRecord]) -> Vec<(PathBuf, Vec<u8>)> {
    cells
        .iter()
        .filter_map(|c| {
            let body = c.edge_list.as_ref()?;
            let name = format!("{}_{}_{}.txt", c.community.platform, label_slug(&c.community.community_id), c.month);
            Some((Path::new("edges").join(name), body.clone().into_bytes()))
        })
        .collect()
}

/// All metric-stage files.
pub fn metric_files(run: &MetricsRun) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = vec![
        (PathBuf::from(METRICS_FILE), metrics_csv(&run.series)),
        (PathBuf::from(METRICS_SMOOTHED_FILE), metrics_csv(&run.smoothed)),
        (PathBuf::from(CELLS_FILE), cells_csv(&run.cells)),
        (PathBuf::from(PLATFORM_SUMMARY_FILE), platform_summary_csv(&run.platform_summaries)),
        (PathBuf::from(REPUTATION_DAILY_FILE), reputation_daily_csv(&run.reputation_daily)),
    ];
    files.extend(edge_list_files(&run.cells));
    files
}

/// Writes files under `dir`, creating directories as needed.
pub fn write_files(dir: &Path, files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (rel, bytes) in files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
