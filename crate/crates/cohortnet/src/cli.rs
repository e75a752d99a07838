//! Command-line front end. Flags override the config file, which overrides
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cohortnet_core::breakpoints::FitVariant;

use crate::config::{RunConfig, SeriesChoice};
use crate::error::{Error, Result};
use crate::ingest::{self, Corpus, InputFormat};
use crate::pipeline::{self, BreakpointRow, MetricsRun};
use crate::report::{self, ReportInput};
use crate::synth_io::{self, TruthSidecar};
use crate::export;

#[derive(Debug, Parser)]
#[command(name = "cohortnet", version, about = "Cohort-aware reply-network analytics for forum event logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check inputs; exit 0 only if every row is accepted.
    Validate(RunArgs),
    /// Per-cell metrics, global and smoothed series.
    Metrics(RunArgs),
    /// Metrics plus breakpoint detection.
    Breakpoints(RunArgs),
    /// Everything, plus Markdown and JSON reports.
    Report(RunArgs),
    /// Generate a synthetic corpus with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FitArg {
    Independent,
    Continuous,
}

impl From<FitArg> for FitVariant {
    fn from(f: FitArg) -> Self {
        match f {
            FitArg::Independent => FitVariant::Independent,
            FitArg::Continuous => FitVariant::Continuous,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input file; repeatable. Replaces the configured inputs.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bootstrap seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop at the first rejected row.
    #[arg(long)]
    pub strict: bool,
    /// Detect breakpoints on smoothed series.
    #[arg(long)]
    pub smoothed: bool,
    #[arg(long, value_enum)]
    pub fit: Option<FitArg>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Ground-truth sidecar from `synth`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Scenario TOML.
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Merges flags into the configured (or default) run settings.
pub fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !args.inputs.is_empty() {
        cfg.input.paths = args.inputs.clone();
    }
    if args.format.is_some() {
        cfg.input.format = args.format;
    }
    cfg.input.strict |= args.strict;
    if args.truth.is_some() {
        cfg.input.ground_truth = args.truth.clone();
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if args.seed.is_some() {
        cfg.breakpoints.seed = args.seed;
    }
    if args.smoothed {
        cfg.breakpoints.series = SeriesChoice::Smoothed;
    }
    if let Some(fit) = args.fit {
        cfg.breakpoints.fit = fit.into();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Metrics,
    Breakpoints,
    Report,
}

pub struct Analysis {
    pub corpus: Corpus,
    pub run: MetricsRun,
    pub breakpoints: Vec<BreakpointRow>,
    pub truth: Option<TruthSidecar>,
}

/// Runs the pipeline up to `stage` without touching the output directory.
pub fn analyze(cfg: &RunConfig, stage: Stage) -> Result<Analysis> {
    let mut cfg = cfg.clone();
    if stage == Stage::Metrics {
        // Metrics never bootstrap, so they need no seed.
        cfg.breakpoints.iterations = 0;
    }
    cfg.validate()?;
    cfg.check_inputs()?;
    let corpus = ingest::load(&cfg.input.paths, cfg.input.format, cfg.input.strict)?;
    if corpus.events.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pool = pipeline::build_pool(cfg.workers)?;
    let run = pipeline::compute_metrics(&corpus, &cfg, &pool)?;
    let breakpoints = if stage >= Stage::Breakpoints {
        pipeline::detect_breakpoints(&run, &cfg, &pool)?
    } else {
        Vec::new()
    };
    let truth = match (&cfg.input.ground_truth, stage) {
        (Some(p), Stage::Report) => Some(synth_io::load_truth(p)?),
        _ => None,
    };
    Ok(Analysis { corpus, run, breakpoints, truth })
}

/// Every output file of `stage`, relative to the output directory.
pub fn render(cfg: &RunConfig, analysis: &Analysis, stage: Stage) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut files = export::metric_files(&analysis.run);
    if stage >= Stage::Breakpoints {
        let calendar = cfg.calendar()?;
        let csv = export::breakpoints_csv(&analysis.breakpoints, &calendar, cfg.breakpoints.fit.as_str());
        files.push((PathBuf::from(export::BREAKPOINTS_FILE), csv));
    }
    if stage == Stage::Report {
        let input = ReportInput {
            cfg,
            validation: &analysis.corpus.report,
            run: &analysis.run,
            breakpoints: &analysis.breakpoints,
            truth: analysis.truth.as_ref(),
        };
        files.push((PathBuf::from(report::MARKDOWN_FILE), report::render_markdown(&input).into_bytes()));
        files.push((PathBuf::from(report::JSON_FILE), report::render_json(&input).into_bytes()));
    }
    Ok(files)
}

/// Analyzes and writes outputs; returns the directory written.
pub fn execute(cfg: &RunConfig, stage: Stage) -> Result<PathBuf> {
    let analysis = analyze(cfg, stage)?;
    let files = render(cfg, &analysis, stage)?;
    export::write_files(&cfg.output.dir, &files)?;
    Ok(cfg.output.dir.clone())
}

fn validate(cfg: &RunConfig) -> Result<i32> {
    cfg.check_inputs()?;
    let corpus = ingest::load(&cfg.input.paths, cfg.input.format, cfg.input.strict)?;
    let report = &corpus.report;
    println!("{}", serde_json::to_string_pretty(report).expect("serializable"));
    Ok(if report.is_clean() { 0 } else { 1 })
}

fn synth(args: &SynthArgs) -> Result<i32> {
    let mut scenario = synth_io::load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let sidecar = synth_io::write_scenario(&scenario, &args.out)?;
    eprintln!(
        "wrote {} ({} regimes, planted break {})",
        args.out.display(),
        sidecar.ground_truth.regimes.len(),
        sidecar.ground_truth.planted_break.map(|m| m.to_string()).unwrap_or_else(|| "none".into())
    );
    Ok(0)
}

fn announce(dir: &Path, stage: Stage) {
    eprintln!("{stage:?} outputs written to {}", dir.display());
}

/// Runs one command and returns the process exit code on success.
pub fn run(cli: &Cli) -> Result<i32> {
    let (args, stage) = match &cli.command {
        Command::Validate(args) => return validate(&resolve(args)?),
        Command::Synth(args) => return synth(args),
        Command::Metrics(args) => (args, Stage::Metrics),
        Command::Breakpoints(args) => (args, Stage::Breakpoints),
        Command::Report(args) => (args, Stage::Report),
    };
    let cfg = resolve(args)?;
    let dir = execute(&cfg, stage)?;
    announce(&dir, stage);
    Ok(0)
}
