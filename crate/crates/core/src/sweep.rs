//! Output layout for single runs and sweeps, and sweep summaries.
//!
//! Each run is written to `<root>/<run_id>/` as `rounds.csv`, optional
//! `scores.csv` and `realizations.csv`, `resolved-config.txt` and
//! `summary.json`.
//! [`summarize_dir`] rebuilds the sweep summary from the rounds files alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::render_config;
use crate::env_model::Fluctuation;
use crate::error::{Error, Result};
use crate::fl_sim::{run_experiment, RunConfig, RunOutput};
use crate::metrics::{
    read_cumulative_series, write_json, write_realizations_csv, write_rounds_csv, write_scores_csv, CumulativeSeries,
    RunSummary,
};
use crate::strategies::StrategyKind;

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const REALIZATIONS_FILE: &str = "realizations.csv";
pub const CONFIG_FILE: &str = "resolved-config.txt";
pub const RUN_SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.json";

/// Reduction ratios are measured against this strategy.
pub const BASELINE: StrategyKind = StrategyKind::NaiveFedcs;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceOptions {
    pub scores: bool,
    pub realizations: bool,
}

/// One configuration per (eta, strategy, seed), in that nesting order.
pub fn plan_sweep(base: &RunConfig, etas: &[Fluctuation], strategies: &[StrategyKind], seeds: &[u64]) -> Vec<RunConfig> {
    let mut out = Vec::with_capacity(etas.len() * strategies.len() * seeds.len());
    for &eta in etas {
        for &kind in strategies {
            for &seed in seeds {
                let mut cfg = base.clone();
                cfg.env.fluctuation = eta;
                cfg.strategy.kind = kind;
                cfg.master_seed = seed;
                out.push(cfg);
            }
        }
    }
    out
}

/// Writes one run below `root` and returns its directory.
pub fn write_run(run: &RunOutput, root: &Path, trace: TraceOptions) -> Result<PathBuf> {
    let dir = root.join(&run.meta.run_id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_rounds_csv(&run.meta, &run.rounds, &dir.join(ROUNDS_FILE))?;
    if trace.scores {
        write_scores_csv(&run.scores, &dir.join(SCORES_FILE))?;
    }
    if trace.realizations {
        write_realizations_csv(&run.realizations, &dir.join(REALIZATIONS_FILE))?;
    }
    let cfg_path = dir.join(CONFIG_FILE);
    std::fs::write(&cfg_path, render_config(&run.config)).map_err(|e| Error::io(&cfg_path, e))?;
    let summary = RunSummary::new(&CumulativeSeries::from(run), None)?;
    write_json(&summary, &dir.join(RUN_SUMMARY_FILE))?;
    Ok(dir)
}

pub fn run_and_write(cfg: &RunConfig, root: &Path, trace: TraceOptions) -> Result<RunSummary> {
    let run = run_experiment(cfg)?;
    write_run(&run, root, trace)?;
    RunSummary::new(&CumulativeSeries::from(&run), None)
}

/// Aggregate over seeds for one (strategy, eta) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub strategy: String,
    pub eta: String,
    pub seeds: Vec<u64>,
    pub mean_final_cumulative_s: f64,
    /// Mean over seeds that have a baseline run; `None` if none do.
    pub mean_reduction_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub baseline: String,
    /// Mean reduction ratio by strategy, then eta; the baseline is omitted.
    pub reduction_ratios: BTreeMap<String, BTreeMap<String, f64>>,
    pub runs: Vec<RunSummary>,
    pub groups: Vec<GroupSummary>,
}

impl SweepSummary {
    pub fn group(&self, strategy: &str, eta: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.strategy == strategy && g.eta == eta)
    }
}

/// Builds the summary from in-memory series.
pub fn summarize(series: &[CumulativeSeries]) -> Result<SweepSummary> {
    let baselines: BTreeMap<(&str, u64), &CumulativeSeries> = series
        .iter()
        .filter(|s| s.meta.strategy == BASELINE.name())
        .map(|s| ((s.meta.eta.as_str(), s.meta.seed), s))
        .collect();
    let mut runs = Vec::with_capacity(series.len());
    for s in series {
        let base = baselines.get(&(s.meta.eta.as_str(), s.meta.seed)).copied();
        runs.push(RunSummary::new(s, base)?);
    }
    runs.sort_by(|a, b| (&a.eta, &a.strategy, a.seed).cmp(&(&b.eta, &b.strategy, b.seed)));

    let mut grouped: BTreeMap<(String, String), Vec<&RunSummary>> = BTreeMap::new();
    for r in &runs {
        grouped.entry((r.eta.clone(), r.strategy.clone())).or_default().push(r);
    }
    let groups = grouped
        .into_iter()
        .map(|((eta, strategy), rs)| {
            let ratios: Vec<f64> = rs.iter().filter_map(|r| r.reduction_ratio).collect();
            GroupSummary {
                strategy,
                eta,
                seeds: rs.iter().map(|r| r.seed).collect(),
                mean_final_cumulative_s: rs.iter().map(|r| r.final_cumulative_s).sum::<f64>() / rs.len() as f64,
                mean_reduction_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            }
        })
        .collect::<Vec<GroupSummary>>();
    let mut reduction_ratios: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for g in groups.iter().filter(|g| g.strategy != BASELINE.name()) {
        if let Some(r) = g.mean_reduction_ratio {
            reduction_ratios.entry(g.strategy.clone()).or_default().insert(g.eta.clone(), r);
        }
    }
    Ok(SweepSummary {
        baseline: BASELINE.name().to_owned(),
        reduction_ratios,
        runs,
        groups,
    })
}

/// Reads every `<root>/*/rounds.csv` and summarizes them.
pub fn summarize_dir(root: &Path) -> Result<SweepSummary> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(ROUNDS_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    let mut series = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let fallback = fallback_meta(name);
        series.push(read_cumulative_series(&dir.join(ROUNDS_FILE), fallback)?);
    }
    summarize(&series)
}

/// Meta for an empty rounds file, recovered from `<strategy>_eta-<eta>_seed-<seed>`.
fn fallback_meta(dir_name: &str) -> crate::fl_sim::RunMeta {
    let parsed = dir_name.rsplit_once("_seed-").and_then(|(head, seed)| {
        let (strategy, eta) = head.rsplit_once("_eta-")?;
        Some((strategy, eta, seed.parse().ok()?))
    });
    match parsed {
        Some((strategy, eta, seed)) => crate::fl_sim::RunMeta::new(strategy, eta, seed),
        None => crate::fl_sim::RunMeta::new(dir_name, "", 0),
    }
}

/// Summarizes `root` and writes the result to `root/sweep_summary.json`.
pub fn write_sweep_summary(root: &Path) -> Result<SweepSummary> {
    let summary = summarize_dir(root)?;
    write_json(&summary, &root.join(SWEEP_SUMMARY_FILE))?;
    Ok(summary)
}
