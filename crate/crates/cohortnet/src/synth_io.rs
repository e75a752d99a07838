//! Scenario files in, corpus plus ground-truth sidecar out.

use std::path::{Path, PathBuf};

use cohortnet_core::synth::{generate, GroundTruth, ScenarioConfig};
use cohortnet_core::CommunityRef;
use serde::{Deserialize, Serialize};

use crate::config::{BanEntry, RunConfig};
use crate::error::{Error, Result};
use crate::ingest::write_jsonl;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const RUN_CONFIG_FILE: &str = "run.toml";

/// Ground truth together with the scope it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub scope: String,
    pub ground_truth: GroundTruth,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

pub fn load_truth(path: &Path) -> Result<TruthSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Run configuration matching a scenario: its ban calendar, its seed and
/// the files [`write_scenario`] produces.
pub fn run_config_for(scenario: &ScenarioConfig) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.input.paths = vec![PathBuf::from(EVENTS_FILE)];
    cfg.input.ground_truth = Some(PathBuf::from(TRUTH_FILE));
    cfg.bans = Some(
        scenario
            .calendar()
            .entries()
            .iter()
            .map(|b| BanEntry { label: b.label.clone(), date: b.date })
            .collect(),
    );
    cfg.breakpoints.seed = Some(scenario.seed);
    cfg.summary.start = scenario.start;
    cfg.summary.end = scenario.last_month();
    cfg.output.dir = PathBuf::from("out");
    cfg
}

/// Generates the scenario and writes corpus, sidecar and run config into
/// `dir`. Returns the ground truth.
pub fn write_scenario(scenario: &ScenarioConfig, dir: &Path) -> Result<TruthSidecar> {
    let (events, truth) = generate(scenario).map_err(|e| Error::Domain(e.to_string()))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&events, &dir.join(EVENTS_FILE))?;
    let sidecar = TruthSidecar {
        scope: CommunityRef::new(scenario.platform, scenario.community_id.clone()).to_string(),
        ground_truth: truth,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("serializable") + "\n";
    let truth_path = dir.join(TRUTH_FILE);
    std::fs::write(&truth_path, json).map_err(|e| Error::io(&truth_path, e))?;
    let run = toml::to_string(&run_config_for(scenario)).map_err(|e| Error::Domain(e.to_string()))?;
    let run_path = dir.join(RUN_CONFIG_FILE);
    std::fs::write(&run_path, run).map_err(|e| Error::io(&run_path, e))?;
    Ok(sidecar)
}
