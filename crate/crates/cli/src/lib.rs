//! Command-line front end of the cognitive-radio test bench.

pub mod analyze;
pub mod config;
pub mod error;
pub mod report;
pub mod simulate;
pub mod table;
pub mod validate;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cogbench_core::{Method, PolicyKind, Rotation};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "cogbench", version, about = "Cognitive-radio test bench and factor analysis")]
pub struct Cli {
    /// Print errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the radio grid over the scenarios and write performance.csv.
    Simulate(SimulateArgs),
    /// Factor-analyse a performance matrix.
    Analyze(AnalyzeArgs),
    /// Write plot-ready tables from simulate and analyze outputs.
    Report(ReportArgs),
    /// Check a config, scenario file or performance matrix.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RotateArg {
    None,
    Varimax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Fa,
    Pca,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario file; the built-in set when absent.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated subset of ucb1,exp3,random,pola,prola,qlearn.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    pub policies: Option<Vec<PolicyKind>>,
    /// Horizon of every scenario, replacing the scenario's own.
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write only the manifest.
    #[arg(long)]
    pub dry_run: bool,
    /// Add wall-clock time to the manifest.
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Performance matrix; `<out>/performance.csv` when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep factors whose reduced eigenvalue exceeds this.
    #[arg(long)]
    pub retention: Option<f64>,
    #[arg(long, value_enum)]
    pub rotate: Option<RotateArg>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Fixed number of factors, overriding the retention threshold.
    #[arg(long)]
    pub factors: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Performance matrix; `<out>/performance.csv` when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Factor axes shared by every component table (1-based) [default: 1,2].
    #[arg(long, value_delimiter = ',')]
    pub fix: Option<Vec<usize>>,
    /// Third axis of each component table; every other factor when absent.
    #[arg(long, value_delimiter = ',')]
    pub vary: Option<Vec<usize>>,
    /// JSON array of factor names.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Performance matrix to check.
    #[arg(long)]
    pub performance: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.trim().parse::<PolicyKind>().map_err(|e| e.to_string())
}

fn load(config: &Option<PathBuf>, ov: Overrides) -> Result<RunConfig> {
    RunConfig::load(config.as_deref(), &ov)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = load(
                &a.config,
                Overrides {
                    seed: a.seed,
                    scenarios: a.scenarios,
                    policies: a.policies,
                    slots: a.slots,
                    reps: a.reps,
                    out: a.out,
                    ..Overrides::default()
                },
            )?;
            let sim = simulate::run(&cfg, a.dry_run, a.record_timing)?;
            simulate::print_summary(&sim, &cfg.out_dir);
        }
        Command::Analyze(a) => {
            let cfg = load(
                &a.config,
                Overrides {
                    out: a.out,
                    retention: a.retention,
                    rotation: a.rotate.map(|r| match r {
                        RotateArg::None => Rotation::None,
                        RotateArg::Varimax => Rotation::Varimax,
                    }),
                    method: a.method.map(|m| match m {
                        MethodArg::Fa => Method::Fa,
                        MethodArg::Pca => Method::Pca,
                    }),
                    n_factors: a.factors,
                    ..Overrides::default()
                },
            )?;
            let input = a.input.unwrap_or_else(|| cfg.out_dir.join(simulate::PERFORMANCE_CSV));
            let (report, analysis, perf) = analyze::run(&input, &cfg.out_dir, &cfg.fa)?;
            analyze::print_summary(&report, &analysis, &perf, &cfg.out_dir);
        }
        Command::Report(a) => {
            let cfg = load(&a.config, Overrides { out: a.out, ..Overrides::default() })?;
            let axes = report::Axes { fixed: a.fix, vary: a.vary };
            let files = report::run(&cfg.out_dir, a.input.as_deref(), &axes, a.labels.as_deref())?;
            for n in &files.notices {
                println!("note: {n}");
            }
            println!("wrote {} to {}", files.written.join(", "), cfg.out_dir.display());
        }
        Command::Validate(a) => {
            let ov = Overrides { scenarios: a.scenarios, ..Overrides::default() };
            let v = validate::run(a.config.as_deref(), &ov, a.performance.as_deref())?;
            println!("ok: {} scenarios, {} radios", v.scenarios, v.radios);
            if let Some((r, c)) = v.performance {
                println!("ok: performance matrix {r} x {c}");
            }
        }
    }
    Ok(())
}
