//! Distributed training state machines.
//!
//! Each algorithm is a sequence of explicit phases per iteration: workers
//! compute and encode, the server reduces and encodes, workers decode and
//! update. Every message that crosses the simulated wire is a
//! [`CompressedMessage`] and is charged to the run's [`BitLedger`].
//!
//! The model lives on the workers. For algorithms that broadcast a gradient
//! (rather than a model) every worker holds its own replica of `x` and of any
//! downlink Markov state; the simulation checks after every iteration that
//! the replicas agree.

mod iterations;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use run::{run, RunFailure, RunOptions, RunOutput};

use crate::compress::{CompressedMessage, CompressorSpec, MarkovState};
use crate::error::{Error, Result};
use crate::ledger::{BitLedger, Direction, DownlinkCounting};
use crate::optim::{AmsgradParams, AmsgradState};
use crate::problems::Problem;
use crate::vector::ModelVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Two-way Markov compression with worker-side AMSGrad.
    Cdadam,
    UncompressedAmsgrad,
    /// Workers upload `C(g)`; the server averages and broadcasts in full precision.
    NaiveAmsgrad,
    /// Workers upload `C(g + δ)` and keep the residual `δ`; full-precision broadcast.
    EfAmsgrad,
    /// Same message flow as CD-Adam with an SGD (optionally momentum) update.
    Ef21Sgd,
    /// Uncompressed warm-up, then frozen variance with error-feedback
    /// compressed momentum in both directions.
    OnebitAdam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Cdadam,
        Algorithm::UncompressedAmsgrad,
        Algorithm::NaiveAmsgrad,
        Algorithm::EfAmsgrad,
        Algorithm::Ef21Sgd,
        Algorithm::OnebitAdam,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cdadam => "cdadam",
            Algorithm::UncompressedAmsgrad => "uncompressed_amsgrad",
            Algorithm::NaiveAmsgrad => "naive_amsgrad",
            Algorithm::EfAmsgrad => "ef_amsgrad",
            Algorithm::Ef21Sgd => "ef21_sgd",
            Algorithm::OnebitAdam => "onebit_adam",
        }
    }

    /// Whether the server keeps a downlink Markov sequence replicated on every worker.
    pub fn has_broadcast_markov(self) -> bool {
        matches!(self, Algorithm::Cdadam | Algorithm::Ef21Sgd)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm '{s}'")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything an algorithm needs besides the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub compressor: CompressorSpec,
    pub params: AmsgradParams,
    /// Mini-batch size per worker; 0 means full batch.
    pub tau: usize,
    pub seed: u64,
    pub downlink_counting: DownlinkCounting,
    /// 1-bit Adam: number of uncompressed warm-up iterations.
    pub warmup_iters: u64,
    /// EF21: heavy-ball coefficient, 0 for plain SGD.
    pub sgd_momentum: f64,
}

impl SimConfig {
    pub fn new(algorithm: Algorithm, compressor: CompressorSpec, params: AmsgradParams) -> Self {
        SimConfig {
            algorithm,
            compressor,
            params,
            tau: 0,
            seed: 0,
            downlink_counting: DownlinkCounting::PerBroadcast,
            warmup_iters: 1,
            sgd_momentum: 0.0,
        }
    }

    /// Checks the configuration against a problem and, for 1-bit Adam, the run length.
    pub fn validate(&self, dim: usize, iterations: Option<u64>) -> Result<()> {
        self.params.validate()?;
        self.compressor.validate(dim)?;
        if !(0.0..1.0).contains(&self.sgd_momentum) {
            return Err(Error::config(format!(
                "sgd_momentum must lie in [0, 1), got {}",
                self.sgd_momentum
            )));
        }
        if self.algorithm == Algorithm::OnebitAdam {
            if self.warmup_iters == 0 {
                return Err(Error::config("1-bit Adam needs at least one warm-up iteration"));
            }
            if let Some(t) = iterations {
                if self.warmup_iters > t {
                    return Err(Error::config(format!(
                        "warm-up of {} iterations exceeds the run length {t}",
                        self.warmup_iters
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerState {
    /// The worker's own uploaded sequence `ĝ⁽ⁱ⁾`.
    pub markov_up: MarkovState,
    /// Replica of the server's broadcast sequence `g̃`.
    pub markov_down: MarkovState,
    /// Model replica and moments. EF21 and 1-bit Adam use `opt.m` as their
    /// momentum buffer.
    pub opt: AmsgradState,
    /// Error-feedback residual `δ⁽ⁱ⁾`.
    pub ef_residual: ModelVector,
    /// 1-bit Adam: `b + ν` frozen at the end of warm-up.
    pub frozen_v: Option<ModelVector>,
}

impl WorkerState {
    fn new(x0: &ModelVector) -> Self {
        let d = x0.dim();
        WorkerState {
            markov_up: MarkovState::new(d),
            markov_down: MarkovState::new(d),
            opt: AmsgradState::new(x0.clone()),
            ef_residual: ModelVector::zeros(d),
            frozen_v: None,
        }
    }

    pub fn x(&self) -> &ModelVector {
        &self.opt.x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    /// Aggregate `ĝ = (1/n) Σ ĝ⁽ⁱ⁾`, maintained from the increments alone.
    pub g_hat: ModelVector,
    /// The broadcast sequence `g̃`.
    pub markov_down: MarkovState,
    /// 1-bit Adam: residual of the compressed broadcast.
    pub ef_residual: ModelVector,
}

impl ServerState {
    fn new(dim: usize) -> Self {
        ServerState {
            g_hat: ModelVector::zeros(dim),
            markov_down: MarkovState::new(dim),
            ef_residual: ModelVector::zeros(dim),
        }
    }
}

/// One message on the simulated wire.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub iteration: u64,
    pub direction: Direction,
    /// Sending worker for uplink, [`crate::rng::SERVER`] for broadcasts.
    pub endpoint: u32,
    pub message: CompressedMessage,
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationReport {
    pub iteration: u64,
    /// Realized `‖C(v) − v‖²/‖v‖²` of every compression call this iteration
    /// with a nonzero input.
    pub measured_pi: Vec<f64>,
    /// `(1−β₂)‖g_used − g_fresh‖²` for algorithms that update a second moment.
    pub variance_quadratic: Option<f64>,
    pub variance_inner: Option<f64>,
    /// `max_i ‖g⁽ⁱ⁾‖∞` over the fresh local gradients.
    pub fresh_grad_inf: f64,
    /// `‖·‖∞` of the gradient (or momentum) the workers applied.
    pub applied_grad_inf: f64,
}

impl IterationReport {
    fn push_pi(&mut self, error_sq: f64, input_sq: f64) {
        if input_sq > 0.0 {
            self.measured_pi.push(error_sq / input_sq);
        }
    }

    pub fn measured_pi_mean(&self) -> Option<f64> {
        if self.measured_pi.is_empty() {
            None
        } else {
            Some(self.measured_pi.iter().sum::<f64>() / self.measured_pi.len() as f64)
        }
    }
}

/// A parameter server and its workers, advanced one iteration at a time.
pub struct Simulation<'p, P: Problem + ?Sized> {
    problem: &'p P,
    config: SimConfig,
    workers: Vec<WorkerState>,
    server: ServerState,
    ledger: BitLedger,
    t: u64,
    trace: Option<Vec<TraceEvent>>,
}

impl<'p, P: Problem + ?Sized> Simulation<'p, P> {
    /// Starts from `g₀ = 0`, so every Markov reference begins at `C(0) = 0`.
    pub fn new(problem: &'p P, config: SimConfig, x0: ModelVector) -> Result<Self> {
        let d = problem.dim();
        if x0.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                found: x0.dim(),
            });
        }
        config.validate(d, None)?;
        for w in 0..problem.num_workers() {
            let local = problem.worker_samples(w);
            if config.tau > local {
                return Err(Error::config(format!(
                    "batch size {} exceeds worker {w}'s {local} samples",
                    config.tau
                )));
            }
        }
        Ok(Simulation {
            problem,
            workers: (0..problem.num_workers()).map(|_| WorkerState::new(&x0)).collect(),
            server: ServerState::new(d),
            ledger: BitLedger::new(),
            t: 0,
            trace: None,
            config,
        })
    }

    /// Keeps a copy of every message sent from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn ledger(&self) -> &BitLedger {
        &self.ledger
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    /// The model (identical on every worker).
    pub fn model(&self) -> &ModelVector {
        self.workers[0].x()
    }

    /// Runs iteration `t + 1`.
    pub fn step(&mut self) -> Result<IterationReport> {
        let t = self.t + 1;
        let report = match self.config.algorithm {
            Algorithm::Cdadam | Algorithm::Ef21Sgd => self.markov_two_way(t)?,
            Algorithm::UncompressedAmsgrad => self.uncompressed(t)?,
            Algorithm::NaiveAmsgrad | Algorithm::EfAmsgrad => self.one_way(t)?,
            Algorithm::OnebitAdam => {
                if t <= self.config.warmup_iters {
                    let r = self.uncompressed(t)?;
                    if t == self.config.warmup_iters {
                        self.freeze_variance();
                    }
                    r
                } else {
                    self.onebit_compressed(t)?
                }
            }
        };
        self.t = t;
        self.check_invariants(t)?;
        Ok(report)
    }

    fn diverged(&self, t: u64, quantity: impl Into<String>) -> Error {
        Error::Diverged {
            algorithm: self.config.algorithm.to_string(),
            iteration: t,
            quantity: quantity.into(),
        }
    }

    /// Relabels low-level non-finite errors with the iteration and algorithm.
    fn contextualize(&self, t: u64, err: Error) -> Error {
        match err {
            Error::NonFinite { quantity } => self.diverged(t, quantity),
            other => other,
        }
    }

    fn record(&mut self, t: u64, direction: Direction, endpoint: u32, msg: &CompressedMessage) {
        match direction {
            Direction::Up => self.ledger.record_message(Direction::Up, msg.bit_size()),
            Direction::Down => {
                self.ledger
                    .record_broadcast(msg.bit_size(), self.workers.len(), self.config.downlink_counting)
            }
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                iteration: t,
                direction,
                endpoint,
                message: msg.clone(),
            });
        }
    }

    fn freeze_variance(&mut self) {
        let nu = self.config.params.nu;
        for w in &mut self.workers {
            let v: Vec<f64> = w.opt.b.iter().map(|b| b + nu).collect();
            w.frozen_v = Some(ModelVector::from_raw(v));
        }
    }

    fn check_invariants(&self, t: u64) -> Result<()> {
        let x0 = self.workers[0].x();
        for (i, w) in self.workers.iter().enumerate().skip(1) {
            let gap = w.x().max_abs_diff(x0)?;
            if gap > 1e-12 {
                return Err(Error::Consistency {
                    iteration: t,
                    detail: format!("worker {i} model differs from worker 0 by {gap:e}"),
                });
            }
        }
        if !self.config.algorithm.has_broadcast_markov() {
            return Ok(());
        }
        let server_ref = self.server.markov_down.reference();
        let mut mean_up = ModelVector::zeros(server_ref.dim());
        let inv_n = 1.0 / self.workers.len() as f64;
        for (i, w) in self.workers.iter().enumerate() {
            let gap = w.markov_down.reference().max_abs_diff(server_ref)?;
            if gap > 1e-12 {
                return Err(Error::Consistency {
                    iteration: t,
                    detail: format!("worker {i} broadcast replica differs from the server by {gap:e}"),
                });
            }
            mean_up.add_scaled_unchecked(inv_n, w.markov_up.reference());
        }
        let gap = self.server.g_hat.max_abs_diff(&mean_up)?;
        if gap > 1e-12 * self.server.g_hat.norm_inf().max(1.0) {
            return Err(Error::Consistency {
                iteration: t,
                detail: format!("server aggregate differs from the mean worker reference by {gap:e}"),
            });
        }
        Ok(())
    }
}
