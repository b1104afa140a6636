//! Comparison metrics and CSV export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env_model::ResourceRealization;
use crate::error::{Error, Result};
use crate::fl_sim::{RoundRecord, RunMeta, RunOutput, ScoreEntry};
use crate::ClientId;

pub const ROUNDS_HEADER: [&str; 9] = [
    "run_id",
    "strategy",
    "eta",
    "seed",
    "round",
    "elapsed_s",
    "cumulative_s",
    "selected_ids",
    "candidate_ids",
];
pub const SCORES_HEADER: [&str; 4] = ["round", "client_id", "score", "n_selected"];
pub const REALIZATIONS_HEADER: [&str; 6] = [
    "round",
    "client_id",
    "theta_tmp",
    "gamma_tmp",
    "t_update_s",
    "t_upload_s",
];

/// Formats a real with 9 significant digits, like C's `%.9g`.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn join_ids(ids: &[ClientId]) -> String {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")
}

/// Per-round cumulative elapsed time of one run, enough to compare runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeSeries {
    pub meta: RunMeta,
    pub elapsed_s: Vec<f64>,
    pub cumulative_s: Vec<f64>,
}

impl CumulativeSeries {
    pub fn from_rounds(meta: RunMeta, rounds: &[RoundRecord]) -> Self {
        Self {
            meta,
            elapsed_s: rounds.iter().map(|r| r.actual_round_time_s).collect(),
            cumulative_s: rounds.iter().map(|r| r.cumulative_time_s).collect(),
        }
    }

    pub fn final_cumulative_s(&self) -> f64 {
        self.cumulative_s.last().copied().unwrap_or(0.0)
    }
}

impl From<&RunOutput> for CumulativeSeries {
    fn from(run: &RunOutput) -> Self {
        Self::from_rounds(run.meta.clone(), &run.rounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSeries {
    pub baseline_label: String,
    pub variant_label: String,
    /// Baseline minus variant cumulative time; positive when the variant is faster.
    pub diff_s: Vec<f64>,
    pub final_reduction_ratio: f64,
}

pub fn time_difference(baseline: &CumulativeSeries, variant: &CumulativeSeries) -> Result<ComparisonSeries> {
    if baseline.meta.seed != variant.meta.seed || baseline.meta.eta != variant.meta.eta {
        return Err(Error::Usage(format!(
            "cannot compare {} with {}: seed and eta must match",
            baseline.meta.run_id, variant.meta.run_id
        )));
    }
    if baseline.cumulative_s.len() != variant.cumulative_s.len() {
        return Err(Error::Usage(format!(
            "cannot compare {} ({} rounds) with {} ({} rounds)",
            baseline.meta.run_id,
            baseline.cumulative_s.len(),
            variant.meta.run_id,
            variant.cumulative_s.len()
        )));
    }
    let diff_s: Vec<f64> = baseline
        .cumulative_s
        .iter()
        .zip(&variant.cumulative_s)
        .map(|(b, v)| b - v)
        .collect();
    let final_reduction_ratio = match (diff_s.last(), baseline.cumulative_s.last()) {
        (Some(&d), Some(&b)) if b != 0.0 => d / b,
        _ => 0.0,
    };
    Ok(ComparisonSeries {
        baseline_label: baseline.meta.strategy.clone(),
        variant_label: variant.meta.strategy.clone(),
        diff_s,
        final_reduction_ratio,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn write_all<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |source| Error::Csv {
        path: path.to_owned(),
        source,
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_rounds_csv(meta: &RunMeta, rounds: &[RoundRecord], path: &Path) -> Result<()> {
    write_all(
        path,
        &ROUNDS_HEADER,
        rounds.iter().map(|r| {
            [
                meta.run_id.clone(),
                meta.strategy.clone(),
                meta.eta.clone(),
                meta.seed.to_string(),
                r.round_index.to_string(),
                fmt_real(r.actual_round_time_s),
                fmt_real(r.cumulative_time_s),
                join_ids(&r.ordered_selection),
                join_ids(&r.candidate_ids),
            ]
        }),
    )
}

pub fn write_scores_csv(scores: &[ScoreEntry], path: &Path) -> Result<()> {
    write_all(
        path,
        &SCORES_HEADER,
        scores.iter().map(|s| {
            [
                s.round_index.to_string(),
                s.client_id.to_string(),
                fmt_real(s.score),
                s.n_selected.to_string(),
            ]
        }),
    )
}

pub fn write_realizations_csv(table: &[ResourceRealization], path: &Path) -> Result<()> {
    write_all(
        path,
        &REALIZATIONS_HEADER,
        table.iter().map(|r| {
            [
                r.round_index.to_string(),
                r.client_id.to_string(),
                fmt_real(r.theta_tmp),
                fmt_real(r.gamma_tmp),
                fmt_real(r.t_update_s),
                fmt_real(r.t_upload_s),
            ]
        }),
    )
}

/// One parsed row of a rounds file.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundsRow {
    pub meta: RunMeta,
    pub round_index: usize,
    pub elapsed_s: f64,
    pub cumulative_s: f64,
    pub selected_ids: Vec<ClientId>,
    pub candidate_ids: Vec<ClientId>,
}

fn parse_ids(s: &str) -> std::result::Result<Vec<ClientId>, std::num::ParseIntError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(str::parse).collect()
}

pub fn read_rounds_csv(path: &Path) -> Result<Vec<RoundsRow>> {
    let bad = |message: String| Error::Parse {
        path: path.to_owned(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })?;
    let headers = reader.headers().map_err(|source| Error::Csv {
        path: path.to_owned(),
        source,
    })?;
    if headers.iter().ne(ROUNDS_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("row {}: bad number `{}`", line + 2, field(i))))
        };
        let seed: u64 = field(3)
            .parse()
            .map_err(|_| bad(format!("row {}: bad seed", line + 2)))?;
        let mut meta = RunMeta::new(field(1), field(2), seed);
        meta.run_id = field(0).to_owned();
        rows.push(RoundsRow {
            meta,
            round_index: field(4)
                .parse()
                .map_err(|_| bad(format!("row {}: bad round", line + 2)))?,
            elapsed_s: num(5)?,
            cumulative_s: num(6)?,
            selected_ids: parse_ids(field(7)).map_err(|e| bad(format!("row {}: {e}", line + 2)))?,
            candidate_ids: parse_ids(field(8)).map_err(|e| bad(format!("row {}: {e}", line + 2)))?,
        });
    }
    Ok(rows)
}

/// Rebuilds a cumulative series from a rounds file.
pub fn read_cumulative_series(path: &Path, fallback_meta: RunMeta) -> Result<CumulativeSeries> {
    let rows = read_rounds_csv(path)?;
    let meta = rows.first().map_or(fallback_meta, |r| r.meta.clone());
    Ok(CumulativeSeries {
        meta,
        elapsed_s: rows.iter().map(|r| r.elapsed_s).collect(),
        cumulative_s: rows.iter().map(|r| r.cumulative_s).collect(),
    })
}

/// Headline numbers of one run, serialized next to its CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub strategy: String,
    pub eta: String,
    pub seed: u64,
    pub rounds: usize,
    pub final_cumulative_s: f64,
    /// Relative to naive FedCS on the same seed and eta, when available.
    pub reduction_ratio: Option<f64>,
}

impl RunSummary {
    pub fn new(series: &CumulativeSeries, baseline: Option<&CumulativeSeries>) -> Result<Self> {
        let reduction_ratio = baseline
            .map(|b| time_difference(b, series).map(|c| c.final_reduction_ratio))
            .transpose()?;
        Ok(Self {
            run_id: series.meta.run_id.clone(),
            strategy: series.meta.strategy.clone(),
            eta: series.meta.eta.clone(),
            seed: series.meta.seed,
            rounds: series.cumulative_s.len(),
            final_cumulative_s: series.final_cumulative_s(),
            reduction_ratio,
        })
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
