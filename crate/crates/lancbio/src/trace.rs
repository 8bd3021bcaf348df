//! Per-iteration trace files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use lancbio_core::solvers::TraceRecord;
use thiserror::Error;

pub const TRACE_HEADER: [&str; 10] = [
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

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: header does not match the trace format")]
    BadHeader { path: String },
    #[error("{path}, line {line}: bad value `{value}` in column `{column}`")]
    BadValue {
        path: String,
        line: u64,
        column: &'static str,
        value: String,
    },
}

/// Streams rows to a CSV sink, flushing after each so that an interrupted
/// run leaves a readable prefix.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(TRACE_HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &TraceRecord) -> csv::Result<()> {
        let metric = r.test_metric.map(|m| m.to_string()).unwrap_or_default();
        self.inner.write_record([
            r.iter.to_string(),
            r.wall_time_s.to_string(),
            r.hypergrad_norm.to_string(),
            r.residual_norm.to_string(),
            r.upper_value.to_string(),
            r.lower_grad_norm.to_string(),
            metric,
            r.n_hvp.to_string(),
            r.n_jvp.to_string(),
            r.n_grad.to_string(),
        ])?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
            .into_inner()
            .map_err(|e| e.into_error())
            .expect("flushed after every row")
    }
}

impl TraceWriter<File> {
    pub fn create(path: &Path) -> csv::Result<Self> {
        Self::new(File::create(path)?)
    }
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: u64,
    pub wall_time_s: f64,
    pub hypergrad_norm: f64,
    pub residual_norm: f64,
    pub upper_value: f64,
    pub lower_grad_norm: f64,
    pub test_metric: Option<f64>,
    pub n_hvp: u64,
    pub n_jvp: u64,
    pub n_grad: u64,
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, TraceError> {
    let name = path.display().to_string();
    let csv_err = |source| TraceError::Csv {
        path: name.clone(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    if reader.headers().map_err(csv_err)?.iter().ne(TRACE_HEADER) {
        return Err(TraceError::BadHeader { path: name });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |i: usize| TraceError::BadValue {
            path: name.clone(),
            line,
            column: TRACE_HEADER[i],
            value: record[i].to_string(),
        };
        let f = |i: usize| record[i].parse::<f64>().map_err(|_| bad(i));
        let u = |i: usize| record[i].parse::<u64>().map_err(|_| bad(i));
        rows.push(TraceRow {
            iter: u(0)?,
            wall_time_s: f(1)?,
            hypergrad_norm: f(2)?,
            residual_norm: f(3)?,
            upper_value: f(4)?,
            lower_grad_norm: f(5)?,
            test_metric: if record[6].is_empty() {
                None
            } else {
                Some(f(6)?)
            },
            n_hvp: u(7)?,
            n_jvp: u(8)?,
            n_grad: u(9)?,
        });
    }
    Ok(rows)
}
