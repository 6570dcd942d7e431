//! Command-line driver: generate bundles, run the soup algorithms, verify,
//! analyze, embed and render.

pub mod analyze;
pub mod config;
pub mod embed;
pub mod layout;
pub mod report;
pub mod stages;

use std::ffi::OsString;
use std::fmt;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use log::info;

use config::{parse_algorithms, Overrides, RunConfig};
use layout::Layout;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config. Exit 1.
    Usage(String),
    /// Missing or inconsistent inputs, or violated invariants. Exit 2.
    Data(String),
    /// I/O and other failures. Exit 3.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "soupbench", version, about = "Build model soups on synthetic populations and analyze how they grow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run config; defaults to OUT/config.json from an earlier stage.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "SOUPBENCH_OUT", default_value = "soupbench-out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `all` or a comma-separated list of greedy, greedier, ranked-diversity, ranked-euclidean.
    #[arg(long, global = true, value_delimiter = ',')]
    pub algo: Vec<String>,
    /// strict or nonstrict, for every algorithm.
    #[arg(long, global = true)]
    pub accept: Option<String>,
    #[arg(long, global = true)]
    pub trials: Option<u32>,
    #[arg(long, global = true)]
    pub envs: Option<usize>,
    #[arg(long, global = true)]
    pub models: Option<usize>,
    /// Also draw per-environment selection boxplots.
    #[arg(long, global = true)]
    pub per_environment: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Train model populations into OUT/bundles.
    Generate,
    /// Run the soup algorithms into OUT/trajectories.
    Soup,
    /// Check recorded trajectories against their bundles.
    Verify,
    /// Series, quantile and APD tables into OUT/analysis.
    Analyze,
    /// Embed trajectory points into OUT/mds.
    Mds,
    /// SVG figures into OUT/report.
    Report,
    /// Every stage in order.
    Pipeline,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Soup => "soup",
            Command::Verify => "verify",
            Command::Analyze => "analyze",
            Command::Mds => "mds",
            Command::Report => "report",
            Command::Pipeline => "pipeline",
        }
    }
}

impl Cli {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let algorithms = if self.algo.is_empty() { None } else { Some(parse_algorithms(&self.algo)?) };
        let acceptance = self.accept.as_deref().map(str::parse).transpose().map_err(CliError::Usage)?;
        Ok(Overrides {
            seed: self.seed,
            algorithms,
            acceptance,
            trials: self.trials,
            environments: self.envs,
            models: self.models,
            per_environment: self.per_environment,
        })
    }

    /// Explicit config file, else the one an earlier stage saved, else
    /// defaults; flags apply on top.
    pub fn resolve_config(&self, layout: &Layout) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None if self.command == Command::Generate || self.command == Command::Pipeline => RunConfig::default(),
            None => layout.saved_config()?.unwrap_or_default(),
        };
        cfg.apply(&self.overrides()?);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// What a command did, for printing.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub verified: Option<stages::VerifyReport>,
}

pub fn execute(command: Command, cfg: &RunConfig, layout: &Layout) -> Result<Outcome, CliError> {
    layout.write_config(cfg)?;
    let mut out = Outcome::default();
    let steps: &[Command] = match command {
        Command::Pipeline => {
            &[Command::Generate, Command::Soup, Command::Verify, Command::Analyze, Command::Mds, Command::Report]
        }
        _ => std::slice::from_ref(&command),
    };
    for &step in steps {
        info!("{}", step.name());
        match step {
            Command::Generate => out.written.extend(stages::generate(cfg, layout)?),
            Command::Soup => out.written.extend(stages::soup(cfg, layout)?),
            Command::Verify => {
                let report = stages::verify(cfg, layout)?;
                if let Some((path, v)) = report.violations.first() {
                    for (p, v) in &report.violations {
                        eprintln!("{}: {v}", p.display());
                    }
                    return Err(CliError::Data(format!(
                        "{} violation(s) in {} trajectories, first in {}: {v}",
                        report.violations.len(),
                        report.checked,
                        path.display()
                    )));
                }
                out.verified = Some(report);
            }
            Command::Analyze => out.written.extend(analyze::analyze(cfg, layout)?),
            Command::Mds => out.written.extend(embed::mds(cfg, layout)?),
            Command::Report => out.written.extend(report::report(cfg, layout)?),
            Command::Pipeline => unreachable!("pipeline is expanded above"),
        }
    }
    Ok(out)
}

fn log_run(layout: &Layout, command: Command, hash: &str) {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let line = format!("{secs} {} config_hash={hash}\n", command.name());
    let file = std::fs::OpenOptions::new().create(true).append(true).open(layout.run_log());
    if let Err(e) = file.and_then(|mut f| f.write_all(line.as_bytes())) {
        log::warn!("run log: {e}");
    }
}

fn run_parsed(cli: &Cli) -> Result<Outcome, CliError> {
    let layout = Layout::new(&cli.out);
    let cfg = cli.resolve_config(&layout)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let outcome = pool.install(|| execute(cli.command, &cfg, &layout))?;
    log_run(&layout, cli.command, &cfg.hash());
    Ok(outcome)
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(&cli) {
        Ok(outcome) => {
            if let Some(v) = &outcome.verified {
                println!("verified {} trajectories, no violations", v.checked);
            }
            println!("wrote {} files under {}", outcome.written.len(), cli.out.display());
            0
        }
        Err(e) => {
            eprintln!("soupbench: {e}");
            e.exit_code()
        }
    }
}
