// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{Label, Summary};
use config::{Overrides, RunConfig};

/// Replication-risk scans, quadratic fits and validation suites.
#[derive(Debug, Parser)]
#[command(name = "hedgerep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (TOML, or a JSON summary from an earlier run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte-Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Time steps on the unit interval.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Output directory; falls back to `[output] dir`, then `HEDGEREP_OUT_DIR`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads. Affects wall time only.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Single-bond replication risk over candidate maturities.
    BondScan,
    /// Model-point replication risk over candidate ages.
    LifeScan,
    /// Optimal nominals on a bond basis.
    QuadFit,
    /// Two-asset and delta-hedge fixtures.
    HedgeDemo,
    /// Martingale, discount, variance-identity, kappa-mass and PDE checks.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::BondScan => "bond-scan",
            Command::LifeScan => "life-scan",
            Command::QuadFit => "quad-fit",
            Command::HedgeDemo => "hedge-demo",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(hedgerep::Error),
    Io(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numeric(e) => write!(f, "numerical failure: {e}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<hedgerep::Error> for Failure {
    fn from(e: hedgerep::Error) -> Self {
        Failure::Numeric(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

const VALIDATION_FAILED: u8 = 4;

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_outputs(summary: &Summary, csv_path: &Path, json_path: &Path) -> Result<(), Failure> {
    let io = |p: &Path, e: &dyn std::fmt::Display| Failure::Io(format!("{}: {e}", p.display()));
    for p in [csv_path, json_path] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
        }
    }
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| io(csv_path, &e))?;
    w.write_record(["label", "mean", "std_error"])
        .map_err(|e| io(csv_path, &e))?;
    for row in &summary.scan {
        let label = match &row.label {
            Label::Value(x) => num(*x),
            Label::Name(s) => s.clone(),
        };
        let se = row.std_error.map(num).unwrap_or_default();
        w.write_record([label, num(row.mean), se])
            .map_err(|e| io(csv_path, &e))?;
    }
    w.flush().map_err(|e| io(csv_path, &e))?;

    let mut json = serde_json::to_string_pretty(summary).map_err(|e| io(json_path, &e))?;
    json.push('\n');
    fs::write(json_path, json).map_err(|e| io(json_path, &e))
}

fn run(cli: &Cli) -> Result<Summary, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        paths: cli.paths,
        steps: cli.steps,
        out_dir: cli.out_dir.clone(),
    });
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let summary = match cli.command {
        Command::BondScan => commands::bond_scan(&cfg)?,
        Command::LifeScan => commands::life_scan(&cfg)?,
        Command::QuadFit => commands::quad_fit(&cfg)?,
        Command::HedgeDemo => commands::hedge_demo(&cfg)?,
        Command::Validate => commands::validate(&cfg)?,
    };
    let (csv_path, json_path) = cfg.output_files(cli.command.name());
    write_outputs(&summary, &csv_path, &json_path)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(&cli) {
        Ok(summary) => {
            if let Some(m) = summary.minimizer {
                match m.label {
                    Some(l) => println!("minimizer: label {l} value {:e}", m.value),
                    None => println!("minimum: {:e}", m.value),
                }
            }
            let failed = summary.failures();
            for c in summary.validation.iter().filter(|c| !c.passed) {
                eprintln!(
                    "FAIL {}: measured {:e}, reference {:e}, tolerance {:e}",
                    c.name, c.measured, c.reference, c.tolerance
                );
            }
            println!(
                "{} of {} checks passed",
                summary.validation.len() - failed,
                summary.validation.len()
            );
            if failed > 0 {
                ExitCode::from(VALIDATION_FAILED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("hedgerep: {e}");
            ExitCode::from(e.code())
        }
    }
}
