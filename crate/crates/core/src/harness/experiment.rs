use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::metrics::{export_csv, export_json, MetricRow, RunRecord, RunSummary};
use super::RunConfig;
use crate::algorithms::{run, RunOptions, TraceEvent};
use crate::error::{Error, Result};
use crate::ledger::{BitLedger, Direction};
use crate::problems::{LogisticProblem, Problem};
use crate::vector::ModelVector;

/// Step sizes tried by default: 0.001 to 0.009 in steps of 0.002, plus 0.01.
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.001, 0.003, 0.005, 0.007, 0.009, 0.01];

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricRow>,
    pub final_x: ModelVector,
    pub ledger: BitLedger,
    pub pi_range: Option<(f64, f64)>,
}

/// A failed run. Rows logged before the failure are kept and, when the
/// configuration names an output, already written.
#[derive(Debug)]
pub struct ExperimentFailure {
    pub error: Error,
    pub rows: Vec<MetricRow>,
}

impl From<Error> for ExperimentFailure {
    fn from(error: Error) -> Self {
        ExperimentFailure {
            error,
            rows: Vec::new(),
        }
    }
}

impl std::fmt::Display for ExperimentFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for ExperimentFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Loads the data, runs the configured algorithm from `x = 0` and writes the
/// CSV, JSON record and trace named by the configuration.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput, ExperimentFailure> {
    config.validate()?;
    let problem = config.build_problem()?;
    run_on(config, &problem)
}

/// As [`run_experiment`] on an already built problem.
pub fn run_on(config: &RunConfig, problem: &LogisticProblem) -> Result<ExperimentOutput, ExperimentFailure> {
    let dim = problem.dim();
    let sim = config.sim_config(dim)?;
    let options = RunOptions {
        iterations: config.iterations,
        log_interval: config.log_interval,
        record_time: config.record_time,
        trace: config.trace.is_some(),
    };
    match run(problem, &sim, ModelVector::zeros(dim), options) {
        Ok(out) => {
            write_outputs(config, &out.rows, "ok", out.ledger.total_bits(), out.pi_range)?;
            if let Some(path) = &config.trace {
                write_trace(&out.trace, path)?;
            }
            Ok(ExperimentOutput {
                rows: out.rows,
                final_x: out.final_x,
                ledger: out.ledger,
                pi_range: out.pi_range,
            })
        }
        Err(failure) => {
            let bits = failure.partial.last().map_or(0, MetricRow::bits_total);
            let status = format!("failed: {}", failure.error);
            if let Err(io) = write_outputs(config, &failure.partial, &status, bits, None) {
                return Err(ExperimentFailure {
                    error: io,
                    rows: failure.partial,
                });
            }
            Err(ExperimentFailure {
                error: failure.error,
                rows: failure.partial,
            })
        }
    }
}

pub fn summarize(rows: &[MetricRow], status: &str, total_bits: u64, pi_range: Option<(f64, f64)>) -> RunSummary {
    RunSummary {
        status: status.into(),
        final_grad_norm: rows.last().map(|r| r.grad_norm),
        min_grad_norm: min_grad_norm(rows),
        total_bits,
        measured_pi_min: pi_range.map(|r| r.0),
        measured_pi_max: pi_range.map(|r| r.1),
    }
}

pub fn min_grad_norm(rows: &[MetricRow]) -> Option<f64> {
    rows.iter()
        .map(|r| r.grad_norm)
        .fold(None, |m, g| Some(m.map_or(g, |m: f64| m.min(g))))
}

/// The JSON record lives next to the CSV with a `.json` extension.
pub fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn write_outputs(
    config: &RunConfig,
    rows: &[MetricRow],
    status: &str,
    total_bits: u64,
    pi_range: Option<(f64, f64)>,
) -> Result<()> {
    let Some(path) = &config.output else {
        return Ok(());
    };
    export_csv(rows, path)?;
    let record = RunRecord {
        config: config.clone(),
        summary: summarize(rows, status, total_bits, pi_range),
        rows: rows.to_vec(),
    };
    export_json(&record, &json_path(path))
}

/// Writes every traced message as
/// `iteration u64 | direction u8 (0 up, 1 down) | endpoint u32 | length u32 | message bytes`,
/// little-endian.
pub fn write_trace(events: &[TraceEvent], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        for ev in events {
            let bytes = ev.message.to_bytes();
            w.write_all(&ev.iteration.to_le_bytes())?;
            w.write_all(&[u8::from(ev.direction == Direction::Down)])?;
            w.write_all(&ev.endpoint.to_le_bytes())?;
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(&bytes)?;
        }
        w.flush()
    };
    put(&mut w).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    /// `min_t ‖∇f(x_t)‖`, or the error that stopped the run.
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best_alpha: f64,
    pub best_min_grad_norm: f64,
    pub points: Vec<GridPoint>,
}

/// Runs `config` once per step size and returns the one with the smallest
/// minimum gradient norm, ties going to the smaller step. Diverged runs are
/// excluded; if all diverge the result is a divergence error.
///
/// When `config` names outputs, each point writes its own files as laid out
/// by [`grid_configs`].
pub fn grid_search(config: &RunConfig, alphas: &[f64]) -> Result<GridResult> {
    if alphas.is_empty() {
        return Err(Error::config("empty step-size grid"));
    }
    config.validate()?;
    let problem = config.build_problem()?;
    let configs = grid_configs(config, alphas);
    let outcomes = run_all(&configs, &problem);
    let mut points = Vec::with_capacity(alphas.len());
    for (cfg, outcome) in configs.iter().zip(outcomes) {
        let outcome = match outcome {
            Ok(out) => min_grad_norm(&out.rows).ok_or_else(|| "no rows".to_string()),
            Err(f) if f.error.exit_code() == 2 => Err(f.error.to_string()),
            Err(f) => return Err(f.error),
        };
        points.push(GridPoint {
            alpha: cfg.alpha,
            outcome,
        });
    }
    let best = points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok().map(|g| (p.alpha, *g)))
        .filter(|(_, g)| g.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    match best {
        Some((best_alpha, best_min_grad_norm)) => Ok(GridResult {
            best_alpha,
            best_min_grad_norm,
            points,
        }),
        None => Err(Error::Diverged {
            algorithm: config.algorithm.to_string(),
            iteration: config.iterations,
            quantity: format!("gradient norm for every step size in {alphas:?}"),
        }),
    }
}

/// One configuration per step size, each with its own output file
/// `<stem>_alpha<α>.csv` when `config.output` is set.
pub fn grid_configs(config: &RunConfig, alphas: &[f64]) -> Vec<RunConfig> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut c = config.clone();
            c.alpha = alpha;
            c.output = config.output.as_ref().map(|p| suffixed(p, alpha, "csv"));
            c.trace = config.trace.as_ref().map(|p| suffixed(p, alpha, "bin"));
            c
        })
        .collect()
}

fn suffixed(path: &Path, alpha: f64, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or(ext);
    path.with_file_name(format!("{stem}_alpha{alpha}.{ext}"))
}

/// Runs independent configurations on a shared problem, in parallel when the
/// `parallel` feature is on. Results are in input order.
pub fn run_all(configs: &[RunConfig], problem: &LogisticProblem) -> Vec<Result<ExperimentOutput, ExperimentFailure>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        configs.par_iter().map(|c| run_on(c, problem)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        configs.iter().map(|c| run_on(c, problem)).collect()
    }
}

/// Parses `alpha=0.001,0.003` (the `alpha=` prefix is optional).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let list = match spec.split_once('=') {
        Some(("alpha", rest)) => rest,
        Some((key, _)) => return Err(Error::config(format!("only alpha can be swept, got '{key}'"))),
        None => spec,
    };
    list.split(',')
        .map(|v| {
            let a: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad step size '{v}'")))?;
            if a > 0.0 && a.is_finite() {
                Ok(a)
            } else {
                Err(Error::config(format!("step size must be positive, got {a}")))
            }
        })
        .collect()
}
