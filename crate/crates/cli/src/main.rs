use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mabcs::config::parse_config;
use mabcs::env_model::Fluctuation;
use mabcs::metrics::{CumulativeSeries, RunSummary};
use mabcs::sweep::{plan_sweep, run_and_write, write_run, write_sweep_summary, TraceOptions, SWEEP_SUMMARY_FILE};
use mabcs::{run_experiment, RunConfig, StrategyKind};
use rayon::prelude::*;

/// Client selection simulator for federated learning over fluctuating wireless resources.
#[derive(Parser)]
#[command(name = "mabcs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV outputs.
    Simulate(SimulateArgs),
    /// Run every (eta, strategy, seed) combination and summarize.
    Sweep(SweepArgs),
    /// Rebuild the sweep summary from an existing output directory.
    Summarize {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// Configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-round candidate scores.
    #[arg(long)]
    trace_scores: bool,
    /// Also write every client's per-round resources.
    #[arg(long)]
    trace_realizations: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Comma-separated fluctuation exponents, `none` for no fluctuation.
    #[arg(long, value_delimiter = ',', value_parser = parse_eta, default_value = "none,1.5,1.99")]
    etas: Vec<Fluctuation>,
    /// Comma-separated strategy names, or `all`.
    #[arg(long, default_value = "all")]
    strategies: String,
    /// Number of seeds; runs use seeds 0..N.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace_scores: bool,
    #[arg(long)]
    trace_realizations: bool,
}

fn parse_strategy(s: &str) -> std::result::Result<StrategyKind, String> {
    s.parse().map_err(|e: mabcs::Error| e.to_string())
}

fn parse_eta(s: &str) -> std::result::Result<Fluctuation, String> {
    Fluctuation::parse(s.trim()).map_err(|e| e.to_string())
}

fn parse_strategies(list: &str) -> Result<Vec<StrategyKind>> {
    if list.trim() == "all" {
        return Ok(StrategyKind::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind: StrategyKind = name.parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    anyhow::ensure!(!out.is_empty(), "no strategies given");
    Ok(out)
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    match &arg.config {
        Some(path) => parse_config(path).with_context(|| format!("reading config {}", path.display())),
        None => Ok(RunConfig::default()),
    }
}

fn summary_line(s: &RunSummary) -> String {
    format!(
        "{}: {} rounds, final cumulative time {:.3} s",
        s.run_id, s.rounds, s.final_cumulative_s
    )
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(kind) = args.strategy {
        cfg.strategy.kind = kind;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let run = run_experiment(&cfg)?;
    let trace = TraceOptions {
        scores: args.trace_scores,
        realizations: args.trace_realizations,
    };
    let dir = write_run(&run, &args.out, trace)?;
    let summary = RunSummary::new(&CumulativeSeries::from(&run), None)?;
    println!("{:.9}", summary.final_cumulative_s);
    println!("{} -> {}", summary_line(&summary), dir.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let base = load_config(&args.config)?;
    let strategies = parse_strategies(&args.strategies)?;
    anyhow::ensure!(!args.etas.is_empty(), "no eta values given");
    anyhow::ensure!(args.seeds > 0, "--seeds must be at least 1");
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let plan = plan_sweep(&base, &args.etas, &strategies, &seeds);
    for cfg in &plan {
        cfg.validate()?;
    }
    for w in base.warnings() {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let trace = TraceOptions {
        scores: args.trace_scores,
        realizations: args.trace_realizations,
    };
    let results: Vec<mabcs::Result<RunSummary>> = plan.par_iter().map(|cfg| run_and_write(cfg, &args.out, trace)).collect();
    for r in results {
        println!("{}", summary_line(&r?));
    }
    summarize(&args.out)
}

fn summarize(out: &Path) -> Result<()> {
    let summary = write_sweep_summary(out)?;
    for (strategy, by_eta) in &summary.reduction_ratios {
        for (eta, ratio) in by_eta {
            println!("{strategy} eta={eta}: mean reduction ratio {ratio:+.4}");
        }
    }
    println!("summary written to {}", out.join(SWEEP_SUMMARY_FILE).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Summarize { out } => summarize(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<mabcs::Error>() {
                Some(mabcs::Error::Usage(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
