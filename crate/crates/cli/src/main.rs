//! Command-line front end. Every subcommand is plumbing around library
//! operations; the only things that live here are argument parsing, output
//! formatting, and exit-code mapping.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crglab_core::lab::LabError;
use crglab_core::sources::SourceError;

// ---------------------------------------------------------------------------
// Configuration types. A run is fully determined by one ExperimentConfig;
// `--config file.json` replays a saved one byte for byte.

#[derive(Parser, Debug)]
#[command(name = "crglab", version, about = "Experiments over correlated pointer-chasing sources")]
struct Cli {
    /// Replay a saved experiment config (JSON) instead of passing flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<ExperimentConfig>,
}

#[derive(Subcommand, Serialize, Deserialize, Clone, Debug)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    /// Draw seeded samples from a source family, one JSON record per line.
    Sample(SampleCfg),
    /// Run a protocol over sampled or enumerated inputs and summarize it.
    Run(RunCfg),
    /// Exact (and optionally Monte Carlo) transcript distance between two
    /// verification branches under the meet-in-the-middle protocol.
    Tv(TvCfg),
    /// Sweep the exhaustive protocol search over round and bit budgets.
    Search(SearchCfg),
    /// Check a verification mixture against the structured noise class.
    Check(CheckCfg),
    /// Replay a source translation and compare it with its target.
    Reduce(ReduceCfg),
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct OutputOpts {
    /// Write here instead of stdout.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// json, jsonl, or csv; each command has a natural default.
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Worker threads for search and enumeration.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Jsonl,
    Csv,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Pcs,
    PcsProduct,
    Mid,
    Pv,
    Disj,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Yes,
    No,
    Mix,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// Pointer-chasing key agreement.
    Chasing,
    /// Meet-in-the-middle pointer verification.
    Meet,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Success,
    Distinguish,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ReduceKind {
    /// Split wide blocks into several narrow instances.
    TRemoval,
    /// Sparse-set instances into the chasing source or its product.
    Sparse,
    /// Verification instances into the chasing source or the hybrid.
    Verification,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Both,
    Correlated,
    Product,
    Intersecting,
    Disjoint,
    Truthful,
    Uniform,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct SampleCfg {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub r: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "two")]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub l: usize,
    /// Verification branch (pv family only).
    #[arg(long, value_enum)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub which: Option<Which>,
    /// Force the sparse sets to intersect (disj family only).
    #[arg(long)]
    #[serde(default)]
    pub intersecting: bool,
    #[arg(long, default_value_t = 10)]
    #[serde(default = "ten")]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct RunCfg {
    #[arg(long, value_enum)]
    pub protocol: ProtocolKind,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub r: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "two")]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub l: usize,
    /// Input branch for the verification protocol.
    #[arg(long, value_enum, default_value_t = Which::Mix)]
    #[serde(default = "mix")]
    pub which: Which,
    /// Enumerate the whole source instead of sampling.
    #[arg(long)]
    #[serde(default)]
    pub exact: bool,
    /// Append the hash-equality tail with this error budget (sampled
    /// chasing runs only; the tail draws public coins).
    #[arg(long)]
    #[serde(default)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    #[serde(default = "thousand")]
    pub trials: usize,
    /// Emit one record per sampled run before the summary line.
    #[arg(long)]
    #[serde(default)]
    pub records: bool,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Enumeration cap; CRGLAB_CAP overrides the default.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct TvCfg {
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub r: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "two")]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = Which::Yes)]
    #[serde(default = "yes")]
    pub first: Which,
    #[arg(long, value_enum, default_value_t = Which::No)]
    #[serde(default = "no")]
    pub second: Which,
    /// Add a Monte Carlo estimate with this many trials per branch.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct SearchCfg {
    /// Permutation count of the verification instance.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub r: usize,
    #[arg(long, default_value_t = 3)]
    #[serde(default = "three")]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = Objective::Success)]
    #[serde(default = "success")]
    pub objective: Objective,
    /// Schedule lengths to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1])]
    #[serde(default = "rounds_default")]
    pub rounds: Vec<usize>,
    /// Bit budgets to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2, 3])]
    #[serde(default = "bits_default")]
    pub bits: Vec<usize>,
    /// Skip candidates that are not minimal under pointer relabelings.
    #[arg(long)]
    #[serde(default)]
    pub prune: bool,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct CheckCfg {
    #[arg(long, default_value_t = 3)]
    #[serde(default = "three")]
    pub r: usize,
    #[arg(long, default_value_t = 4)]
    #[serde(default = "four")]
    pub n: usize,
    /// Entropy slack; defaults to 2/n.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    #[serde(default)]
    pub big_c: f64,
    /// Force the closed-form representative path instead of enumerating.
    #[arg(long)]
    #[serde(default)]
    pub reduced: bool,
    /// Work bound for the conditional-independence sweep.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_cap: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct ReduceCfg {
    #[arg(long, value_enum)]
    pub kind: ReduceKind,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub r: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "two")]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub l: usize,
    /// Narrow instances per wide block (t-removal only).
    #[arg(long, default_value_t = 2)]
    #[serde(default = "two")]
    pub t: usize,
    #[arg(long, value_enum, default_value_t = Branch::Both)]
    #[serde(default = "both")]
    pub branch: Branch,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputOpts,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn four() -> usize {
    4
}
fn ten() -> usize {
    10
}
fn thousand() -> usize {
    1000
}
fn mix() -> Which {
    Which::Mix
}
fn yes() -> Which {
    Which::Yes
}
fn no() -> Which {
    Which::No
}
fn success() -> Objective {
    Objective::Success
}
fn both() -> Branch {
    Branch::Both
}
fn rounds_default() -> Vec<usize> {
    vec![1]
}
fn bits_default() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

// ---------------------------------------------------------------------------
// Errors and exit codes: 0 success, 2 invalid request, 3 resource cap.

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Cap(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Cap(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<SourceError> for CliError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::SupportExceedsCap { support, cap } => CliError::Cap(format!(
                "support size {support} exceeds the enumeration cap {cap}; raise CRGLAB_CAP or --cap"
            )),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::SearchTooLarge { estimate, cap } => CliError::Cap(format!(
                "search needs {estimate} candidates, cap is {cap}; raise CRGLAB_CAP or --cap"
            )),
            LabError::Source(src) => src.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<crglab_core::engine::EngineError> for CliError {
    fn from(e: crglab_core::engine::EngineError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<crglab_core::reductions::ReductionError> for CliError {
    fn from(e: crglab_core::reductions::ReductionError) -> Self {
        match e {
            crglab_core::reductions::ReductionError::Source(src) => src.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Enumeration cap: explicit flag, then the CRGLAB_CAP variable, then 1e6.
pub fn resolve_cap(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match std::env::var("CRGLAB_CAP") {
        Ok(text) => text
            .parse::<u64>()
            .map_err(|_| CliError::Validation(format!("CRGLAB_CAP is not a number: {text:?}"))),
        Err(_) => Ok(1_000_000),
    }
}

// ---------------------------------------------------------------------------
// Output plumbing: all numbers pass through a 12-significant-digit rounding
// so files diff cleanly across machines.

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let shift = (11 - mag).clamp(-17, 17);
    let factor = 10f64.powi(shift);
    (x * factor).round() / factor
}

pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    let mag = x.abs().log10().floor() as i32;
    let prec = (11 - mag).clamp(0, 17) as usize;
    let mut s = format!("{:.*}", prec, x);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Rounds every float in a JSON tree to 12 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                        *v = serde_json::Value::Number(r);
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn json_line(mut v: serde_json::Value) -> String {
    round_json(&mut v);
    v.to_string()
}

fn write_output(opts: &OutputOpts, text: &str) -> Result<(), CliError> {
    let body = if text.ends_with('\n') { text.to_owned() } else { format!("{text}\n") };
    match &opts.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "pass either --config or a subcommand, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation("nothing to do: pass a subcommand or --config".into()))
        }
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))?
        }
        (None, Some(cmd)) => cmd,
    };

    let output = match &config {
        ExperimentConfig::Sample(c) => c.output.clone(),
        ExperimentConfig::Run(c) => c.output.clone(),
        ExperimentConfig::Tv(c) => c.output.clone(),
        ExperimentConfig::Search(c) => c.output.clone(),
        ExperimentConfig::Check(c) => c.output.clone(),
        ExperimentConfig::Reduce(c) => c.output.clone(),
    };
    if let Some(jobs) = output.jobs {
        if jobs == 0 {
            return Err(CliError::Validation("--jobs must be positive".into()));
        }
        // ignore the error when a pool already exists (tests call run twice)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }

    let text = match &config {
        ExperimentConfig::Sample(c) => commands::cmd_sample(c)?,
        ExperimentConfig::Run(c) => commands::cmd_run(c)?,
        ExperimentConfig::Tv(c) => commands::cmd_tv(c)?,
        ExperimentConfig::Search(c) => commands::cmd_search(c)?,
        ExperimentConfig::Check(c) => commands::cmd_check(c)?,
        ExperimentConfig::Reduce(c) => commands::cmd_reduce(c)?,
    };
    write_output(&output, &text)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
