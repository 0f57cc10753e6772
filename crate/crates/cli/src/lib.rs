//! Command-line harness: calibrate a threshold, fuzz one target or sweep
//! many, and replay or classify stored flags.

pub mod sweep;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use spider_core::calibrate::{
    classify_candidates, classify_complexity, compute_threshold, default_probe_lengths,
    most_severe, run_baseline, samples_csv, threshold_value, DEFAULT_WARMUP,
};
use spider_core::depgraph::{dependency_set, event_types_for, reach_set};
use spider_core::event::Event;
use spider_core::fuzzer::{replay, run_campaign, CampaignConfig, CampaignError, FuzzReport};
use spider_core::generators::GeneratorMode;
use spider_core::testbed::fixtures::{normal_traffic, parse_workload, testbed_registry};
use spider_core::testbed::ServiceRegistry;

use sweep::{run_sweep, SweepPlan, DEFAULT_BUDGET_EXECS, DEFAULT_LENGTHS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CANDIDATE: i32 = 10;

/// Overrides every `--seed` when set.
pub const SEED_ENV: &str = "SPIDER_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "spider",
    version,
    about = "Performance fuzzing for event-driven controller services"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive t_max from a normal-traffic workload.
    Calibrate(CalibrateArgs),
    /// Fuzz one target at one sequence length.
    Analyze(AnalyzeArgs),
    /// Fuzz targets at ascending sequence lengths.
    Sweep(SweepArgs),
    /// Show a target's dependency set next to its naive reach set.
    Deps(DepsArgs),
    /// List services that handle at least one event type.
    List(FixtureArg),
    /// Re-execute a stored flag and check it reproduces.
    Replay(FlagArgs),
    /// Classify how a stored flag's cost grows with prefix length.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FixtureArg {
    /// Service registry JSON; the shipped testbed when omitted.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub fixture: FixtureArg,
    /// Workload JSONL; the shipped normal traffic when omitted.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
    /// Also write per-event samples here as CSV.
    #[arg(long)]
    pub samples_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Auto,
    Fixed(u64),
}

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Threshold::Auto);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!(
                "threshold must be \"auto\" or a positive integer, got {s:?}"
            )),
            Ok(v) => Ok(Threshold::Fixed(v)),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Auto => f.write_str("auto"),
            Threshold::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Options shared by `analyze` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct CampaignArgs {
    #[command(flatten)]
    pub fixture: FixtureArg,
    #[arg(long)]
    pub budget_secs: Option<f64>,
    /// Defaults to 50000 when no budget is given.
    #[arg(long)]
    pub budget_execs: Option<u64>,
    #[arg(long, default_value_t = Threshold::Auto)]
    pub threshold: Threshold,
    /// Workload used by `--threshold auto`.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = GeneratorMode::Full)]
    pub mode: GeneratorMode,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub seq_len: usize,
    /// Flags kept in full; later ones are only counted.
    #[arg(long)]
    pub flag_limit: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Comma-separated; every analyzable service when omitted.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LENGTHS)]
    pub lengths: Vec<usize>,
    /// Run every length even after a target has flagged.
    #[arg(long)]
    pub full_sweep: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Write one report per campaign and the summary into this directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DepsArgs {
    #[command(flatten)]
    pub fixture: FixtureArg,
    #[arg(long)]
    pub target: String,
}

#[derive(Debug, Clone, Args)]
pub struct FlagArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub flag: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub flag: FlagArgs,
    /// Prefix lengths to probe; quarters of the sequence by default.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<usize>,
}

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

fn config<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Config(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

/// What a command prints on stdout, and its exit code.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn json<T: Serialize>(value: &T, code: i32) -> Outcome {
        Outcome {
            stdout: serde_json::to_string_pretty(value).expect("output serializes") + "\n",
            code,
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Calibrate(args) => calibrate(&args),
        Command::Analyze(args) => analyze(&args),
        Command::Sweep(args) => sweep(&args),
        Command::Deps(args) => deps(&args),
        Command::List(args) => {
            let registry = load_registry(&args)?;
            Ok(Outcome::json(&registry.list_analyzable(), EXIT_OK))
        }
        Command::Replay(args) => replay_flag(&args),
        Command::Classify(args) => classify(&args),
    }
}

fn load_registry(arg: &FixtureArg) -> Result<ServiceRegistry, CliError> {
    match &arg.fixture {
        Some(path) => ServiceRegistry::load(path).map_err(config),
        None => Ok(testbed_registry()),
    }
}

fn load_workload(path: Option<&Path>) -> Result<Vec<Event>, CliError> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(config)?;
            parse_workload(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(config)
        }
        None => Ok(normal_traffic()),
    }
}

fn load_report(path: &Path) -> Result<FuzzReport, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(config)?;
    FuzzReport::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(config)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(runtime)?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

/// `SPIDER_SEED` when set and valid, else `fallback`.
pub fn effective_seed(fallback: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| config(anyhow!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(fallback),
    }
}

fn resolve_threshold(args: &CampaignArgs, registry: &ServiceRegistry) -> Result<u64, CliError> {
    match args.threshold {
        Threshold::Fixed(v) => Ok(v),
        Threshold::Auto => {
            let workload = load_workload(args.workload.as_deref())?;
            let samples = run_baseline(registry, &workload, DEFAULT_WARMUP).map_err(config)?;
            let lengths: Vec<u64> = samples.iter().map(|s| s.path_length).collect();
            compute_threshold(&lengths).map_err(config)
        }
    }
}

fn budgets(args: &CampaignArgs) -> (Option<u64>, Option<f64>) {
    match (args.budget_execs, args.budget_secs) {
        (None, None) => (Some(DEFAULT_BUDGET_EXECS), None),
        other => other,
    }
}

fn calibrate(args: &CalibrateArgs) -> Result<Outcome, CliError> {
    let registry = load_registry(&args.fixture)?;
    let workload = load_workload(args.workload.as_deref())?;
    let samples = run_baseline(&registry, &workload, args.warmup).map_err(config)?;
    let lengths: Vec<u64> = samples.iter().map(|s| s.path_length).collect();
    let t_max = compute_threshold(&lengths).map_err(config)?;
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<u64>() as f64 / n;
    let std = ((threshold_value(&lengths).map_err(config)? - mean) / 3.0).max(0.0);
    if let Some(path) = &args.samples_csv {
        write_file(path, &samples_csv(&samples))?;
    }
    Ok(Outcome::json(
        &json!({
            "t_max": t_max,
            "mean": mean,
            "std": std,
            "max": lengths.iter().max(),
            "samples": lengths.len(),
            "warmup": args.warmup,
            "workload_events": workload.len(),
        }),
        EXIT_OK,
    ))
}

fn analyze(args: &AnalyzeArgs) -> Result<Outcome, CliError> {
    let registry = load_registry(&args.campaign.fixture)?;
    let t_max = resolve_threshold(&args.campaign, &registry)?;
    let (budget_execs, budget_secs) = budgets(&args.campaign);
    let mut cfg = CampaignConfig::new(
        &args.target,
        args.seq_len,
        t_max,
        effective_seed(args.campaign.seed)?,
    )
    .with_mode(args.campaign.mode);
    cfg.budget_execs = budget_execs;
    cfg.budget_secs = budget_secs;
    if let Some(limit) = args.flag_limit {
        cfg.flag_limit = limit;
    }
    cfg.validate().map_err(config)?;
    registry.require(&args.target).map_err(config)?;

    let mut report = run_campaign(&registry, &cfg).map_err(|e| match e {
        CampaignError::Generate(_) => runtime(e),
        _ => config(e),
    })?;
    classify_candidates(&mut report, None);
    let code = if report.has_candidate() {
        EXIT_CANDIDATE
    } else {
        EXIT_OK
    };
    let summary = campaign_summary(&report);
    match &args.out {
        Some(path) => {
            write_file(path, &report.to_json())?;
            Ok(Outcome::json(&summary, code))
        }
        None => {
            eprintln!(
                "{}",
                serde_json::to_string(&summary).expect("summary serializes")
            );
            Ok(Outcome {
                stdout: report.to_json() + "\n",
                code,
            })
        }
    }
}

/// A short description of a finished campaign.
pub fn campaign_summary(report: &FuzzReport) -> serde_json::Value {
    let flags: Vec<_> = report
        .flags
        .iter()
        .enumerate()
        .map(|(i, f)| {
            json!({
                "flag": i,
                "execution": f.execution,
                "path_length": f.path_length,
                "candidate": f.triage.is_candidate(),
                "complexity": f.complexity.as_ref().map(|v| v.class),
                "residual": f.complexity.as_ref().map(|v| v.residual()),
            })
        })
        .collect();
    json!({
        "target": report.config.target,
        "seq_len": report.config.seq_len,
        "t_max": report.config.t_max,
        "seed": report.seed,
        "executions": report.executions,
        "execution_errors": report.execution_errors,
        "queue_size": report.queue_size,
        "flags_total": report.flags_total,
        "candidates": report.candidates().count(),
        "complexity": most_severe(report),
        "flags": flags,
    })
}

fn sweep(args: &SweepArgs) -> Result<Outcome, CliError> {
    let registry = load_registry(&args.campaign.fixture)?;
    let targets = if args.targets.is_empty() {
        registry.list_analyzable()
    } else {
        args.targets.clone()
    };
    let (budget_execs, budget_secs) = budgets(&args.campaign);
    let mut plan = SweepPlan {
        targets,
        lengths: args.lengths.clone(),
        budget_execs,
        budget_secs,
        t_max: 1,
        seed: effective_seed(args.campaign.seed)?,
        mode: args.campaign.mode,
        full_sweep: args.full_sweep,
    };
    plan.validate(&registry).map_err(|e| config(anyhow!(e)))?;
    plan.t_max = resolve_threshold(&args.campaign, &registry)?;
    if args.jobs == 0 {
        return Err(config(anyhow!("--jobs must be at least 1")));
    }

    let (summary, runs) = run_sweep(&registry, &plan, args.jobs);
    if let Some(dir) = &args.out_dir {
        for run in &runs {
            if let Ok(report) = &run.report {
                write_file(
                    &dir.join(format!("{}-n{}.json", run.target, run.seq_len)),
                    &report.to_json(),
                )?;
            }
        }
        write_file(
            &dir.join("summary.json"),
            &serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )?;
    }
    let code = if summary.has_candidate() {
        EXIT_CANDIDATE
    } else {
        EXIT_OK
    };
    Ok(Outcome::json(&summary, code))
}

fn deps(args: &DepsArgs) -> Result<Outcome, CliError> {
    let registry = load_registry(&args.fixture)?;
    let dep = dependency_set(&registry, &args.target).map_err(config)?;
    let reach = reach_set(&registry, &args.target).map_err(config)?;
    let types = event_types_for(&registry, &dep);
    Ok(Outcome::json(
        &json!({
            "target": dep.target,
            "dependency": dep.members,
            "reach": reach,
            "read_closure": dep.read_closure,
            "rounds": dep.rounds,
            "event_types": types.types().iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        }),
        EXIT_OK,
    ))
}

fn replay_flag(args: &FlagArgs) -> Result<Outcome, CliError> {
    let report = load_report(&args.report)?;
    if args.flag >= report.flags.len() {
        return Err(config(anyhow!(
            "report has {} stored flags; no flag {}",
            report.flags.len(),
            args.flag
        )));
    }
    let outcome = replay(&report, args.flag).map_err(runtime)?;
    Ok(Outcome::json(&outcome, EXIT_OK))
}

fn classify(args: &ClassifyArgs) -> Result<Outcome, CliError> {
    let report = load_report(&args.flag.report)?;
    let flag = report.flags.get(args.flag.flag).ok_or_else(|| {
        config(anyhow!(
            "report has {} stored flags; no flag {}",
            report.flags.len(),
            args.flag.flag
        ))
    })?;
    let lengths = if args.lengths.is_empty() {
        default_probe_lengths(flag.events.len())
    } else {
        args.lengths.clone()
    };
    let verdict = classify_complexity(&report.registry, &report.dependency.members, flag, &lengths)
        .map_err(config)?;
    Ok(Outcome::json(&verdict, EXIT_OK))
}
