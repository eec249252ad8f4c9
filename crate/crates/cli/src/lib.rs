//! `qolrank` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 no rank interval
//! reaches the requested level.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;
use thiserror::Error;

use qolrank_core::coverage_lab::{mc_coverage, LabError};
use qolrank_core::dataset::{self, DataError, PopulationSource};
use qolrank_core::decimal;
use qolrank_core::exact_inference::{
    find_interval, parse_fraction, DesignCounts, InferenceError, Policy, RankPmf,
};
use qolrank_core::experiment::{
    observe, randomize_with, rng_for_stream, synth_population, ExperimentError, SynthSpec,
};
use qolrank_core::report::{self, analyze, CoverageReport, IntervalReport};
use qolrank_core::DeathPlacement;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::IntervalInfeasible { .. } => CliError::Infeasible(e.to_string()),
            InferenceError::EmptyArm(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Inference(e) => e.into(),
            LabError::Experiment(e) => e.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qolrank",
    version,
    about = "Exact randomization confidence sets for quantiles with outcomes censored by death"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TextOrJson {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Confidence sets for several quantiles under one or more death placements.
    Analyze(AnalyzeArgs),
    /// Control rank interval for treated rank i in a design with n treated and m controls.
    Interval(IntervalArgs),
    /// Exact distribution of the number of controls below the counterfactual order statistic.
    Pmf(PmfArgs),
    /// Draw a synthetic population and one randomized experiment from it.
    Simulate(SimulateArgs),
    /// Monte Carlo coverage of the confidence set on a known population.
    Coverage(CoverageArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Death placement: -inf, +inf, or a decimal t (quality q beats death iff q >= t).
    #[arg(long = "cut", allow_hyphen_values = true, default_values_t = vec!["-inf".to_string()])]
    cuts: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1/8,1/4,1/2,3/4,7/8")]
    quantiles: Vec<String>,
    #[arg(long, default_value = "paper")]
    policy: String,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct IntervalArgs {
    #[arg(long)]
    i: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "paper")]
    policy: String,
    #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
    format: TextOrJson,
}

#[derive(Debug, Args)]
struct PmfArgs {
    #[arg(long)]
    i: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Print exact fractions instead of decimals.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON population recipe; the built-in 650-subject demo when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Observed-data CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full potential-outcomes table.
    #[arg(long)]
    population_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "spec"])))]
struct CoverageArgs {
    /// Observed CSV (taken as a no-effect population) or population CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON population recipe.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    i: usize,
    /// Treated count per trial; defaults to the input's or recipe's split.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, allow_hyphen_values = true, default_value = "-inf")]
    cut: String,
    #[arg(long, default_value = "paper")]
    policy: String,
}

/// Runs the CLI on `argv`, writing to stdout/stderr, and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn parse_policy(s: &str) -> Result<Policy, CliError> {
    s.parse()
        .map_err(|e: InferenceError| CliError::Usage(e.to_string()))
}

fn parse_cut(s: &str) -> Result<DeathPlacement, CliError> {
    s.parse()
        .map_err(|e: qolrank_core::ordering::OrderingError| CliError::Usage(e.to_string()))
}

fn parse_quantiles(qs: &[String]) -> Result<Vec<Ratio<u64>>, CliError> {
    qs.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_fraction(s).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn read_spec(path: &Path) -> Result<SynthSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Interval(a) => cmd_interval(a, out),
        Command::Pmf(a) => cmd_pmf(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Coverage(a) => cmd_coverage(a, out),
    }
}

fn cmd_analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let policy = parse_policy(&args.policy)?;
    let placements = args
        .cuts
        .iter()
        .map(|c| parse_cut(c))
        .collect::<Result<Vec<_>, _>>()?;
    let quantiles = parse_quantiles(&args.quantiles)?;
    let obs = dataset::ingest_csv(&args.input)?;
    let rep = analyze(&obs, args.alpha, &placements, &quantiles, policy)?;
    let text = match args.format {
        Format::Table => rep.to_table(),
        Format::Json => rep.to_json() + "\n",
        Format::Csv => rep.to_csv(),
    };
    out.write_all(text.as_bytes())?;
    Ok(if rep.has_infeasible() { 4 } else { 0 })
}

fn cmd_interval(args: IntervalArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let policy = parse_policy(&args.policy)?;
    let design = DesignCounts::new(args.n, args.m)?;
    let iv = find_interval(args.i, design, args.alpha, policy)?;
    let rep = IntervalReport::new(design, args.i, args.alpha, policy, &iv);
    let text = match args.format {
        TextOrJson::Text => rep.to_text(),
        TextOrJson::Json => report::canonical_json(&rep) + "\n",
    };
    out.write_all(text.as_bytes())?;
    Ok(0)
}

fn cmd_pmf(args: PmfArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let design = DesignCounts::new(args.n, args.m)?;
    let pmf = RankPmf::new(args.i, design)?;
    let cells: Vec<String> = pmf
        .probs()
        .iter()
        .map(|p| {
            if args.exact {
                p.to_string()
            } else {
                decimal::render_trimmed(p, decimal::PROBABILITY_DIGITS)
            }
        })
        .collect();
    writeln!(out, "{}", cells.join(" "))?;
    Ok(0)
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut spec = match &args.spec {
        Some(p) => read_spec(p)?,
        None => SynthSpec::demo(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let pop = synth_population(&spec)?;
    let mut rng = rng_for_stream(spec.seed, 1);
    let z = randomize_with(pop.len(), spec.treated_count(), &mut rng)?;
    let obs = observe(&pop, &z)?;
    match &args.out {
        Some(path) => dataset::write_observed(&obs, create(path)?)?,
        None => dataset::write_observed(&obs, &mut *out)?,
    }
    if let Some(path) = &args.population_out {
        dataset::write_population(&pop, create(path)?)?;
    }
    Ok(0)
}

fn cmd_coverage(args: CoverageArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let policy = parse_policy(&args.policy)?;
    let placement = parse_cut(&args.cut)?;
    let (pop, default_n, sharp_null) = match (&args.input, &args.spec) {
        (Some(path), _) => {
            let src = dataset::load_population_or_observed(path)?;
            let n = src.observed_treated();
            let null = matches!(src, PopulationSource::SharpNull { .. });
            let pop = src.population().clone();
            let n = n.unwrap_or(pop.len() / 2);
            (pop, n, null)
        }
        (None, Some(path)) => {
            let spec = read_spec(path)?;
            (synth_population(&spec)?, spec.treated_count(), false)
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --input or --spec is required".into(),
            ))
        }
    };
    let n = args.n.unwrap_or(default_n);
    let run = mc_coverage(
        &pop,
        n,
        args.i,
        args.alpha,
        placement,
        policy,
        args.trials,
        args.seed,
    )?;
    let rep = CoverageReport::new(&run, args.alpha, policy, placement, args.seed, sharp_null);
    writeln!(out, "{}", report::canonical_json(&rep))?;
    Ok(0)
}
