use super::{SimConfig, Simulation, TraceEvent};
use crate::error::Error;
use crate::harness::MetricRow;
use crate::ledger::BitLedger;
use crate::problems::Problem;
use crate::vector::ModelVector;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricRow>,
    pub final_x: ModelVector,
    pub ledger: BitLedger,
    /// Smallest and largest realized compression factor over every call.
    pub pi_range: Option<(f64, f64)>,
    pub trace: Vec<TraceEvent>,
}

/// A run that stopped early. `partial` holds every row logged before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Vec<MetricRow>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure {
            error,
            partial: Vec::new(),
        }
    }
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} logged rows)", self.error, self.partial.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Options for [`run`] that do not affect the trajectory.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub iterations: u64,
    /// Emit a row every `log_interval` iterations (and at the last one).
    pub log_interval: u64,
    /// Fill `elapsed_ms` from the wall clock. Off by default so that output
    /// files are byte-identical across runs.
    pub record_time: bool,
    pub trace: bool,
}

impl RunOptions {
    pub fn new(iterations: u64) -> Self {
        RunOptions {
            iterations,
            log_interval: 1,
            record_time: false,
            trace: false,
        }
    }
}

/// Runs `options.iterations` iterations from `x0`, logging a baseline row at
/// iteration 0 unless there are no iterations at all. Loss and gradient norm
/// are always the exact full-data values at the current model; their cost is
/// not charged to the ledger.
///
/// `measured_pi_mean` and `variance_quadratic` are averaged over the
/// iterations since the previous row.
pub fn run<P: Problem + ?Sized>(
    problem: &P,
    config: &SimConfig,
    x0: ModelVector,
    options: RunOptions,
) -> Result<RunOutput, RunFailure> {
    config.validate(problem.dim(), Some(options.iterations))?;
    let log_interval = options.log_interval.max(1);
    let mut sim = Simulation::new(problem, config.clone(), x0)?;
    if options.trace {
        sim.enable_trace();
    }
    let clock = Clock::start(options.record_time);

    let mut rows = Vec::new();
    if options.iterations > 0 {
        rows.push(metric_row(problem, &sim, 0, None, None, clock.elapsed_ms()));
    }
    let mut pi_range: Option<(f64, f64)> = None;
    let mut pi_acc = Accumulator::default();
    let mut var_acc = Accumulator::default();

    for t in 1..=options.iterations {
        let report = match sim.step() {
            Ok(r) => r,
            Err(error) => return Err(RunFailure { error, partial: rows }),
        };
        for &p in &report.measured_pi {
            pi_range = Some(match pi_range {
                None => (p, p),
                Some((lo, hi)) => (lo.min(p), hi.max(p)),
            });
        }
        if let Some(p) = report.measured_pi_mean() {
            pi_acc.push(p);
        }
        if let Some(q) = report.variance_quadratic {
            var_acc.push(q);
        }
        if t % log_interval == 0 || t == options.iterations {
            let row = metric_row(problem, &sim, t, pi_acc.take(), var_acc.take(), clock.elapsed_ms());
            if !(row.loss.is_finite() && row.grad_norm.is_finite()) {
                let error = sim_diverged(config, t, "loss or gradient norm");
                return Err(RunFailure { error, partial: rows });
            }
            rows.push(row);
        }
    }

    Ok(RunOutput {
        rows,
        final_x: sim.model().clone(),
        ledger: *sim.ledger(),
        pi_range,
        trace: sim.take_trace(),
    })
}

fn sim_diverged(config: &SimConfig, t: u64, quantity: &str) -> Error {
    Error::Diverged {
        algorithm: config.algorithm.to_string(),
        iteration: t,
        quantity: quantity.into(),
    }
}

fn metric_row<P: Problem + ?Sized>(
    problem: &P,
    sim: &Simulation<'_, P>,
    iter: u64,
    measured_pi_mean: Option<f64>,
    variance_quadratic: Option<f64>,
    elapsed_ms: f64,
) -> MetricRow {
    let x = sim.model();
    MetricRow {
        iter,
        loss: problem.loss(x),
        grad_norm: problem.gradient(x).norm(),
        bits_up: sim.ledger().uplink_bits,
        bits_down: sim.ledger().downlink_bits,
        measured_pi_mean,
        variance_quadratic,
        elapsed_ms,
    }
}

#[derive(Default)]
struct Accumulator {
    sum: f64,
    count: usize,
}

impl Accumulator {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn take(&mut self) -> Option<f64> {
        let out = (self.count > 0).then(|| self.sum / self.count as f64);
        *self = Accumulator::default();
        out
    }
}

struct Clock(Option<std::time::Instant>);

impl Clock {
    fn start(enabled: bool) -> Self {
        Clock(enabled.then(std::time::Instant::now))
    }

    fn elapsed_ms(&self) -> f64 {
        self.0.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)
    }
}
