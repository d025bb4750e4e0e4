use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "iter",
    "loss",
    "grad_norm",
    "bits_up",
    "bits_down",
    "measured_pi_mean",
    "variance_quadratic",
    "elapsed_ms",
];

/// One logged point of a run. `grad_norm` is `‖∇f(x_t)‖₂` on the full dataset.
/// Empty CSV cells stand for `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub iter: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub bits_up: u64,
    pub bits_down: u64,
    pub measured_pi_mean: Option<f64>,
    pub variance_quadratic: Option<f64>,
    pub elapsed_ms: f64,
}

impl MetricRow {
    pub fn bits_total(&self) -> u64 {
        self.bits_up + self.bits_down
    }
}

/// Summary statistics appended to the JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: String,
    pub final_grad_norm: Option<f64>,
    pub min_grad_norm: Option<f64>,
    pub total_bits: u64,
    pub measured_pi_min: Option<f64>,
    pub measured_pi_max: Option<f64>,
}

/// Everything needed to reproduce and inspect a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub summary: RunSummary,
    pub rows: Vec<MetricRow>,
}

pub fn write_csv<W: Write>(rows: &[MetricRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}

pub fn export_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(&e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(|e| csv_error(&e))).collect()
}

fn csv_error(e: &csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

pub fn export_json(record: &RunRecord, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, record)
        .map_err(std::io::Error::from)
        .and_then(|()| w.write_all(b"\n"))
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

/// A column selectable by `extract`. `bits_total` is `bits_up + bits_down`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Iter,
    Loss,
    GradNorm,
    BitsUp,
    BitsDown,
    BitsTotal,
    MeasuredPiMean,
    VarianceQuadratic,
    ElapsedMs,
}

impl std::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "iter" => Column::Iter,
            "loss" => Column::Loss,
            "grad_norm" => Column::GradNorm,
            "bits_up" => Column::BitsUp,
            "bits_down" => Column::BitsDown,
            "bits_total" => Column::BitsTotal,
            "measured_pi_mean" => Column::MeasuredPiMean,
            "variance_quadratic" => Column::VarianceQuadratic,
            "elapsed_ms" => Column::ElapsedMs,
            _ => return Err(Error::config(format!("unknown column '{s}'"))),
        })
    }
}

impl Column {
    pub fn value(self, row: &MetricRow) -> Option<f64> {
        match self {
            Column::Iter => Some(row.iter as f64),
            Column::Loss => Some(row.loss),
            Column::GradNorm => Some(row.grad_norm),
            Column::BitsUp => Some(row.bits_up as f64),
            Column::BitsDown => Some(row.bits_down as f64),
            Column::BitsTotal => Some(row.bits_total() as f64),
            Column::MeasuredPiMean => row.measured_pi_mean,
            Column::VarianceQuadratic => row.variance_quadratic,
            Column::ElapsedMs => Some(row.elapsed_ms),
        }
    }
}

/// Whitespace-separated two-column text for gnuplot. Rows where either
/// column is empty are skipped.
pub fn extract(rows: &[MetricRow], x: Column, y: Column) -> String {
    let mut out = String::new();
    for row in rows {
        if let (Some(a), Some(b)) = (x.value(row), y.value(row)) {
            out.push_str(&format!("{a} {b}\n"));
        }
    }
    out
}
