//! Command-line entry point: generate scenarios, run them under the
//! coordination strategies, and verify stored results.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::metrics::{solve_time_stats, system_reports, write_reports, MetricsError};
use crate::network::RoadNetwork;
use crate::scenario::{default_params, generate_scenario, EconomicParams, Scenario, ScenarioError};
use crate::sim::{run, SimConfig, SimError, SimulationResult, SingletonRule};
use crate::strategies::StrategyKind;
use crate::verify::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0} invariant violation(s)")]
    Invariant(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io(source) => CliError::Io {
                path: PathBuf::from("<reports>"),
                source,
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "platoon", version, about = "Multi-fleet truck platoon coordination")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random scenario as JSON.
    Generate(GenerateArgs),
    /// Simulate scenarios and write results and reports.
    Run(RunArgs),
    /// Check stored results against the invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Road network JSON; the bundled SE-33 network when omitted.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub trucks: usize,
    /// Fleet shares, comma separated; they must sum to 1.
    #[arg(long, default_value = "0.4,0.3,0.2,0.1", value_delimiter = ',')]
    pub shares: Vec<f64>,
    /// Parameter override such as `waiting_budget_min=10`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyChoice {
    Single,
    Pareto,
    Sysmax,
    All,
}

impl StrategyChoice {
    fn kinds(self) -> Vec<StrategyKind> {
        match self {
            StrategyChoice::Single => vec![StrategyKind::SingleFleet],
            StrategyChoice::Pareto => vec![StrategyKind::ParetoCrossFleet],
            StrategyChoice::Sysmax => vec![StrategyKind::SystemMax],
            StrategyChoice::All => StrategyKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SingletonChoice {
    Wait,
    Depart,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Seeds as a comma list and/or inclusive ranges, e.g. `1,4,7-9`.
    #[arg(long, default_value = "1")]
    pub seed: String,
    /// Stored scenario file to run instead of generating one.
    #[arg(long = "scenario", conflicts_with = "network")]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StrategyChoice::All)]
    pub strategy: StrategyChoice,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Keep every solver instance in the result files.
    #[arg(long)]
    pub dump_instances: bool,
    /// Solve all three programs at every instance and record them.
    #[arg(long)]
    pub audit: bool,
    /// What a triggering truck left alone does.
    #[arg(long, value_enum, default_value_t = SingletonChoice::Wait)]
    pub singleton_rule: SingletonChoice,
    /// Number of scenarios simulated at once.
    #[arg(long, default_value_t = 1)]
    pub parallel_scenarios: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Result files written by `run`.
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Applies `key=value` overrides in order.
pub fn apply_overrides(mut params: EconomicParams, overrides: &[String]) -> Result<EconomicParams, CliError> {
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
        params = params.with_override(key.trim(), value.trim())?;
    }
    Ok(params)
}

/// Parses `1,4,7-9` into `[1, 4, 7, 8, 9]`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("bad seed list `{s}`"));
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn load_network(path: Option<&Path>) -> Result<RoadNetwork, CliError> {
    match path {
        None => Ok(RoadNetwork::se33()),
        Some(p) => RoadNetwork::from_json(&read(p)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
    }
}

fn build_scenario(args: &ScenarioArgs, seed: u64) -> Result<Scenario, CliError> {
    let net = load_network(args.network.as_deref())?;
    let params = apply_overrides(default_params(), &args.params)?;
    Ok(generate_scenario(
        &net,
        args.trucks,
        &args.shares,
        params.start_window(),
        seed,
        params,
    )?)
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let sc = build_scenario(&args.scenario, args.seed)?;
    let json = sc.to_json();
    match &args.out {
        Some(p) => write(p, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

struct ScenarioRun {
    label: String,
    results: Vec<SimulationResult>,
}

fn simulate(label: String, sc: &Scenario, args: &RunArgs) -> Result<ScenarioRun, CliError> {
    let results = args
        .strategy
        .kinds()
        .into_iter()
        .map(|kind| {
            let config = SimConfig {
                strategy: kind,
                audit: args.audit,
                singleton_rule: match args.singleton_rule {
                    SingletonChoice::Wait => SingletonRule::WaitForLaterBatches,
                    SingletonChoice::Depart => SingletonRule::DepartAtArrival,
                },
                dump_instances: args.dump_instances,
            };
            run(sc, config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScenarioRun { label, results })
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let runs: Vec<ScenarioRun> = if let Some(path) = &args.scenario_file {
        let mut sc = Scenario::from_json(&read(path)?)?;
        sc.params = apply_overrides(sc.params.clone(), &args.scenario.params)?;
        let label = path
            .file_stem()
            .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
        vec![simulate(label, &sc, args)?]
    } else {
        let seeds = parse_seeds(&args.seed)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.parallel_scenarios.max(1))
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| {
                    let sc = build_scenario(&args.scenario, seed)?;
                    simulate(format!("n{}-seed{seed}", args.scenario.trucks), &sc, args)
                })
                .collect::<Result<Vec<_>, CliError>>()
        })?
    };

    let mut reports = Vec::new();
    for r in &runs {
        for res in &r.results {
            let file = args.out.join(&r.label).join(format!("result-{}.json", res.strategy));
            write(&file, &res.to_json())?;
        }
        let rep = system_reports(&r.label, &r.results);
        for (s, res) in rep.iter().zip(&r.results) {
            let margin_s = res.params.trigger_margin().as_hours() * 3600.0;
            let (max_s, slow) = solve_time_stats(res.instances(), margin_s)
                .map_or((0.0, 0), |t| (t.max_s, t.over_margin));
            println!(
                "{} {:>7} profit {:>12} fuel {:6.3}% instances {:5} max solve {:.3}s over margin {}",
                s.scenario,
                s.strategy.to_string(),
                s.total_profit.to_string(),
                s.fuel_reduction_pct,
                s.instance_count,
                max_s,
                slow
            );
        }
        reports.extend(rep);
    }
    write_reports(&args.out, &reports)?;
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let mut failures = 0;
    for path in &args.results {
        let result = SimulationResult::from_json(&read(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let violations = verify(&result);
        if violations.is_empty() {
            println!("{}: ok", path.display());
        }
        for v in &violations {
            println!("{}: FAIL {v}", path.display());
        }
        failures += violations.len();
    }
    if failures > 0 {
        return Err(CliError::Invariant(failures));
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
