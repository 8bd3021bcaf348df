//! Mean ± sample standard deviation of final-row metrics, grouped by cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::trace::{read_trace, TraceError, TraceRow};

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("no trace files to summarize")]
    EmptyInput,
    #[error("{0}: trace has no rows")]
    EmptyTrace(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

pub const METRICS: [&str; 10] = [
    "iter",
    "wall_time_s",
    "hypergrad_norm",
    "residual_norm",
    "upper_value",
    "lower_grad_norm",
    "test_metric",
    "n_hvp",
    "n_jvp",
    "n_grad",
];

fn metric(row: &TraceRow, i: usize) -> Option<f64> {
    Some(match i {
        0 => row.iter as f64,
        1 => row.wall_time_s,
        2 => row.hypergrad_norm,
        3 => row.residual_norm,
        4 => row.upper_value,
        5 => row.lower_grad_norm,
        6 => return row.test_metric,
        7 => row.n_hvp as f64,
        8 => row.n_jvp as f64,
        _ => row.n_grad as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Sample statistics; a single value has zero spread.
pub fn mean_std(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Stat { mean, std }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: String,
    pub runs: usize,
    /// One entry per [`METRICS`] column; `None` when no run reported it.
    pub stats: Vec<Option<Stat>>,
}

impl GroupSummary {
    pub fn get(&self, metric_name: &str) -> Option<Stat> {
        METRICS
            .iter()
            .position(|m| *m == metric_name)
            .and_then(|i| self.stats[i])
    }
}

/// `runs/lancbio_eta=0.1__seed3.csv` belongs to group `lancbio_eta=0.1`.
pub fn group_of(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.rfind("__seed") {
        Some(i) => stem[..i].to_string(),
        None => stem,
    }
}

pub fn summarize(paths: &[PathBuf]) -> Result<Vec<GroupSummary>, SummaryError> {
    if paths.is_empty() {
        return Err(SummaryError::EmptyInput);
    }
    let mut groups: BTreeMap<String, Vec<TraceRow>> = BTreeMap::new();
    for path in paths {
        let last = read_trace(path)?
            .pop()
            .ok_or_else(|| SummaryError::EmptyTrace(path.display().to_string()))?;
        groups.entry(group_of(path)).or_default().push(last);
    }
    Ok(groups
        .into_iter()
        .map(|(group, rows)| {
            let stats = (0..METRICS.len())
                .map(|i| {
                    let vals: Vec<f64> = rows.iter().filter_map(|r| metric(r, i)).collect();
                    (!vals.is_empty()).then(|| mean_std(&vals))
                })
                .collect();
            GroupSummary {
                group,
                runs: rows.len(),
                stats,
            }
        })
        .collect())
}

pub fn to_csv(summary: &[GroupSummary]) -> String {
    let mut out = String::from("group,runs");
    for m in METRICS {
        write!(out, ",{m}_mean,{m}_std").unwrap();
    }
    out.push('\n');
    for g in summary {
        write!(out, "{},{}", g.group, g.runs).unwrap();
        for s in &g.stats {
            match s {
                Some(s) => write!(out, ",{},{}", s.mean, s.std).unwrap(),
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Aligned table of the headline metrics.
pub fn to_text(summary: &[GroupSummary]) -> String {
    let cols = [
        "iter",
        "hypergrad_norm",
        "residual_norm",
        "upper_value",
        "test_metric",
        "n_hvp",
    ];
    let mut rows = vec![std::iter::once("group".to_string())
        .chain(std::iter::once("runs".to_string()))
        .chain(cols.iter().map(|c| c.to_string()))
        .collect::<Vec<_>>()];
    for g in summary {
        let mut row = vec![g.group.clone(), g.runs.to_string()];
        for c in cols {
            row.push(match g.get(c) {
                Some(s) => format!("{:.4e} ± {:.2e}", s.mean, s.std),
                None => "-".into(),
            });
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
