//! TOML run configuration. Every key has a default, so an empty file (or
//! none at all, with `--input`) is a valid run.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use cohortnet_core::breakpoints::FitVariant;
use cohortnet_core::cohorts::{BanCalendar, BanEvent, CohortScheme, DEFAULT_TENURE_MONTHS};
use cohortnet_core::reputation::{ReputationParams, ReputationThresholds};
use cohortnet_core::events::SECONDS_PER_DAY;
use cohortnet_core::MonthKey;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::InputFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    /// Rayon worker count; 0 lets rayon decide.
    pub workers: usize,
    pub input: InputConfig,
    /// Absent means the built-in Reddit calendar; `bans = []` means none.
    pub bans: Option<Vec<BanEntry>>,
    pub cohorts: CohortConfig,
    pub reputation: ReputationConfig,
    pub metrics: MetricsConfig,
    pub breakpoints: BreakpointConfig,
    pub summary: SummaryConfig,
    pub output: OutputConfig,
}


#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub paths: Vec<PathBuf>,
    pub format: Option<InputFormat>,
    pub strict: bool,
    /// Synthetic ground-truth sidecar to compare against in the report.
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanEntry {
    pub label: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Retrospective,
    Rolling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub scheme: SchemeKind,
    /// Tenure window for the rolling scheme.
    pub window_months: u32,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self { scheme: SchemeKind::Retrospective, window_months: DEFAULT_TENURE_MONTHS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReputationConfig {
    pub base_increment: f64,
    pub streak_gain: f64,
    pub forgetting: f64,
    pub gap_days: f64,
    pub decay_unit_days: f64,
    pub activity_floor: f64,
    pub active_above: f64,
}

impl Default for ReputationConfig {
    fn default() -> Self {
        let p = ReputationParams::default();
        let t = ReputationThresholds::default();
        Self {
            base_increment: p.base_increment,
            streak_gain: p.streak_gain,
            forgetting: p.forgetting,
            gap_days: 1.0,
            decay_unit_days: 1.0,
            activity_floor: t.activity_floor,
            active_above: t.active_above,
        }
    }
}

impl ReputationConfig {
    pub fn params(&self) -> ReputationParams {
        let secs = |days: f64| (days * SECONDS_PER_DAY as f64).round() as i64;
        ReputationParams {
            base_increment: self.base_increment,
            streak_gain: self.streak_gain,
            forgetting: self.forgetting,
            gap_threshold_secs: secs(self.gap_days),
            decay_unit_secs: secs(self.decay_unit_days),
        }
    }

    pub fn thresholds(&self) -> ReputationThresholds {
        ReputationThresholds { activity_floor: self.activity_floor, active_above: self.active_above }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Hub definitions as top fractions of the existing-user degree
    /// distribution (0.10 = top decile).
    pub hub_tops: Vec<f64>,
    /// Centered smoothing window, odd.
    pub smoothing_window: usize,
    /// Write one edge list per cell under `<out>/edges/`.
    pub edge_lists: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { hub_tops: vec![0.05, 0.10, 0.20], smoothing_window: 3, edge_lists: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SeriesChoice {
    Raw,
    Smoothed,
}

impl SeriesChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesChoice::Raw => "raw",
            SeriesChoice::Smoothed => "smoothed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakpointConfig {
    pub min_seg: usize,
    pub iterations: usize,
    /// Required whenever `iterations > 0`.
    pub seed: Option<u64>,
    pub fit: FitVariant,
    pub series: SeriesChoice,
    /// Months either side of a ban month that count as "near".
    pub near_window: i64,
    /// Months either side of the estimate that count as stable.
    pub stability_window: i64,
    pub metrics: Vec<String>,
}

impl Default for BreakpointConfig {
    fn default() -> Self {
        Self {
            min_seg: 6,
            iterations: 200,
            seed: None,
            fit: FitVariant::Independent,
            series: SeriesChoice::Raw,
            near_window: 3,
            stability_window: 3,
            metrics: ["toxicity_mean", "ei_index", "existing_gini", "degree_assortativity", "reputation_mean"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryConfig {
    /// Inclusive month window for the cross-platform toxicity summary.
    pub start: MonthKey,
    pub end: MonthKey,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self { start: MonthKey::new(2014, 1).expect("valid"), end: MonthKey::new(2020, 12).expect("valid") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative input and output paths resolve against the config file.
        if let Some(base) = path.parent() {
            for p in cfg.input.paths.iter_mut() {
                *p = base.join(&*p);
            }
            cfg.input.ground_truth = cfg.input.ground_truth.map(|p| base.join(p));
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn calendar(&self) -> Result<BanCalendar> {
        match &self.bans {
            None => Ok(BanCalendar::reddit_voat()),
            Some(entries) => BanCalendar::new(entries.iter().map(|b| BanEvent::new(b.label.clone(), b.date)).collect())
                .map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn scheme(&self) -> Result<CohortScheme> {
        Ok(match self.cohorts.scheme {
            SchemeKind::Retrospective => CohortScheme::Retrospective(self.calendar()?),
            SchemeKind::Rolling => CohortScheme::Rolling { window_months: self.cohorts.window_months },
        })
    }

    /// Hub percentiles (`1 - top`) in configured order.
    pub fn hub_percentiles(&self) -> Vec<f64> {
        self.metrics.hub_tops.iter().map(|t| 1.0 - t).collect()
    }

    /// Checks everything that does not need the filesystem.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.scheme()?;
        self.reputation.params().validate().map_err(|e| Error::Config(e.to_string()))?;
        for &t in &self.metrics.hub_tops {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("hub_tops entries must lie in (0, 1), got {t}"));
            }
        }
        let w = self.metrics.smoothing_window;
        if w == 0 || w.is_multiple_of(2) {
            return bad(format!("smoothing_window must be odd, got {w}"));
        }
        if self.breakpoints.min_seg < 2 {
            return bad("breakpoints.min_seg must be at least 2".into());
        }
        if self.breakpoints.iterations > 0 && self.breakpoints.seed.is_none() {
            return bad("breakpoints.seed is required when iterations > 0 (or pass --seed)".into());
        }
        if self.summary.start > self.summary.end {
            return bad("summary.start is after summary.end".into());
        }
        Ok(())
    }

    /// Input paths must exist before any work starts.
    pub fn check_inputs(&self) -> Result<()> {
        if self.input.paths.is_empty() {
            return Err(Error::Config("no input paths (set input.paths or pass --input)".into()));
        }
        for p in self.input.paths.iter().chain(self.input.ground_truth.as_ref()) {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
            }
        }
        Ok(())
    }
}

/// Metric column name for a hub top fraction, e.g. `hub_rate_top10`.
pub fn hub_metric_name(top: f64) -> String {
    format!("hub_rate_top{:02}", (top * 100.0).round() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.calendar().unwrap(), BanCalendar::reddit_voat());
        assert_eq!(cfg.hub_percentiles(), vec![0.95, 0.9, 0.8]);
        assert_eq!(cfg.reputation.params(), ReputationParams::default());
        // Bootstrap is on by default, so a seed must be supplied.
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
workers = 4

[input]
paths = ["events.jsonl"]
strict = true

[[bans]]
label = "first"
date = "2016-02-01"

[[bans]]
label = "second"
date = "2017-07-01"

[cohorts]
scheme = "rolling"
window_months = 3

[metrics]
hub_tops = [0.1]
smoothing_window = 5

[breakpoints]
seed = 9
fit = "continuous"
series = "smoothed"
metrics = ["ei_index"]

[summary]
start = "2016-01"
end = "2017-12"
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.workers, 4);
        assert_eq!(cfg.calendar().unwrap().entries().len(), 2);
        assert_eq!(cfg.scheme().unwrap(), CohortScheme::Rolling { window_months: 3 });
        assert_eq!(cfg.breakpoints.fit, FitVariant::Continuous);
        assert_eq!(cfg.breakpoints.series, SeriesChoice::Smoothed);
        assert_eq!(cfg.summary.start, MonthKey::new(2016, 1).unwrap());
    }

    #[test]
    fn explicit_empty_calendar() {
        let cfg = RunConfig::from_toml("bans = []").unwrap();
        assert!(cfg.calendar().unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("[metrics]\nhub_top = [0.1]").is_err());
        let mut cfg = RunConfig::default();
        cfg.breakpoints.seed = Some(1);
        cfg.metrics.smoothing_window = 4;
        assert!(cfg.validate().is_err());
        cfg.metrics.smoothing_window = 3;
        cfg.metrics.hub_tops = vec![1.0];
        assert!(cfg.validate().is_err());
        cfg.metrics.hub_tops = vec![0.1];
        cfg.bans = Some(vec![
            BanEntry { label: "b".into(), date: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap() },
            BanEntry { label: "a".into(), date: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap() },
        ]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hub_names() {
        assert_eq!(hub_metric_name(0.05), "hub_rate_top05");
        assert_eq!(hub_metric_name(0.10), "hub_rate_top10");
        assert_eq!(hub_metric_name(0.2), "hub_rate_top20");
    }
}
