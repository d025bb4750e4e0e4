use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, SimConfig};
use crate::compress::{CompressorKind, CompressorSpec};
use crate::error::{Error, Result};
use crate::ledger::DownlinkCounting;
use crate::optim::{AmsgradParams, StepSize};
use crate::problems::{read_libsvm, synthesize, LogisticProblem};

/// A fully resolved experiment description.
///
/// The text form is one `key = value` pair per line; `#` starts a comment.
/// Unknown keys are rejected. See [`RunConfig::KEYS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub compressor: CompressorKind,
    /// Sparsifier budget; takes precedence over `k_fraction`.
    pub k: Option<usize>,
    /// Sparsifier budget as `⌈k_fraction·d⌉`.
    pub k_fraction: Option<f64>,
    pub workers: usize,
    /// Per-worker batch size; 0 is full batch.
    pub tau: usize,
    pub alpha: f64,
    /// `constant` or `inverse_sqrt`.
    pub schedule: String,
    pub beta1: f64,
    pub beta2: f64,
    pub nu: f64,
    pub lambda: f64,
    pub iterations: u64,
    pub seed: u64,
    /// Seed for data synthesis and shuffling; defaults to `seed`.
    pub data_seed: Option<u64>,
    pub shuffle: bool,
    /// 1-bit Adam warm-up as a fraction of `iterations`, rounded up.
    pub warmup_fraction: f64,
    pub downlink_counting: DownlinkCounting,
    pub sgd_momentum: f64,
    /// LibSVM file; when absent the data is synthetic.
    pub libsvm: Option<PathBuf>,
    /// Synthetic sample count.
    pub n_samples: usize,
    /// Synthetic dimension, or an override of the LibSVM dimension.
    pub dim: Option<usize>,
    /// Synthetic label flip probability.
    pub noise: f64,
    pub log_interval: u64,
    /// CSV destination; a JSON record is written next to it.
    pub output: Option<PathBuf>,
    /// Binary dump of every message.
    pub trace: Option<PathBuf>,
    pub record_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::Cdadam,
            compressor: CompressorKind::ScaledSign,
            k: None,
            k_fraction: None,
            workers: 20,
            tau: 0,
            alpha: 1e-3,
            schedule: "constant".into(),
            beta1: 0.9,
            beta2: 0.99,
            nu: 1e-8,
            lambda: 0.1,
            iterations: 1000,
            seed: 0,
            data_seed: None,
            shuffle: true,
            warmup_fraction: 0.13,
            downlink_counting: DownlinkCounting::PerBroadcast,
            sgd_momentum: 0.0,
            libsvm: None,
            n_samples: 1000,
            dim: None,
            noise: 0.1,
            log_interval: 1,
            output: None,
            trace: None,
            record_time: false,
        }
    }
}

impl RunConfig {
    pub const SYNTHETIC_DIM: usize = 50;

    pub const KEYS: &'static [&'static str] = &[
        "algorithm",
        "compressor",
        "k",
        "k_fraction",
        "workers",
        "tau",
        "alpha",
        "schedule",
        "beta1",
        "beta2",
        "nu",
        "lambda",
        "iterations",
        "seed",
        "data_seed",
        "shuffle",
        "warmup_fraction",
        "downlink_counting",
        "sgd_momentum",
        "libsvm",
        "n_samples",
        "dim",
        "noise",
        "log_interval",
        "output",
        "trace",
        "record_time",
    ];

    /// Parses the text form on top of the defaults, then validates.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        // Relative data paths are relative to the config file.
        if let Some(data) = &mut cfg.libsvm {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(message) => Error::Parse { line: i + 1, message },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies one `key=value` override (CLI `--set`).
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got '{pair}'")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "compressor" => self.compressor = value.parse()?,
            "k" => self.k = optional(key, value)?,
            "k_fraction" => self.k_fraction = optional(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "schedule" => match value {
                "constant" | "inverse_sqrt" => self.schedule = value.into(),
                _ => return Err(Error::config(format!("unknown schedule '{value}'"))),
            },
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "data_seed" => self.data_seed = optional(key, value)?,
            "shuffle" => self.shuffle = parse(key, value)?,
            "warmup_fraction" => self.warmup_fraction = parse(key, value)?,
            "downlink_counting" => {
                self.downlink_counting = DownlinkCounting::parse(value)
                    .ok_or_else(|| Error::config(format!("unknown downlink_counting '{value}'")))?
            }
            "sgd_momentum" => self.sgd_momentum = parse(key, value)?,
            "libsvm" => self.libsvm = optional_path(value),
            "n_samples" => self.n_samples = parse(key, value)?,
            "dim" => self.dim = optional(key, value)?,
            "noise" => self.noise = parse(key, value)?,
            "log_interval" => self.log_interval = parse(key, value)?,
            "output" => self.output = optional_path(value),
            "trace" => self.trace = optional_path(value),
            "record_time" => self.record_time = parse(key, value)?,
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::config("warmup_fraction must lie in [0, 1]"));
        }
        if let Some(f) = self.k_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config("k_fraction must lie in (0, 1]"));
            }
        }
        if self.libsvm.is_none() && (self.n_samples == 0 || self.dim == Some(0) || !(0.0..=1.0).contains(&self.noise)) {
            return Err(Error::config(
                "synthetic data needs n_samples, dim >= 1 and noise in [0, 1]",
            ));
        }
        if self.compressor.is_sparsifier() && self.k.is_none() && self.k_fraction.is_none() {
            return Err(Error::config(format!("{} requires k or k_fraction", self.compressor)));
        }
        self.params().validate()?;
        Ok(())
    }

    pub fn params(&self) -> AmsgradParams {
        let step = match self.schedule.as_str() {
            "inverse_sqrt" => StepSize::InverseSqrt { alpha: self.alpha },
            _ => StepSize::Constant { alpha: self.alpha },
        };
        AmsgradParams {
            step,
            beta1: self.beta1,
            beta2: self.beta2,
            nu: self.nu,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    /// `⌈warmup_fraction·T⌉`, at least one iteration.
    pub fn warmup_iters(&self) -> u64 {
        ((self.warmup_fraction * self.iterations as f64).ceil() as u64).max(1)
    }

    pub fn compressor_spec(&self, dim: usize) -> Result<CompressorSpec> {
        let k = self
            .k
            .or_else(|| self.k_fraction.map(|f| CompressorSpec::k_from_fraction(f, dim)));
        CompressorSpec::from_kind(self.compressor, k)
    }

    pub fn sim_config(&self, dim: usize) -> Result<SimConfig> {
        let mut sim = SimConfig::new(self.algorithm, self.compressor_spec(dim)?, self.params());
        sim.tau = self.tau;
        sim.seed = self.seed;
        sim.downlink_counting = self.downlink_counting;
        sim.warmup_iters = self.warmup_iters();
        sim.sgd_momentum = self.sgd_momentum;
        sim.validate(dim, Some(self.iterations))?;
        Ok(sim)
    }

    pub fn build_problem(&self) -> Result<LogisticProblem> {
        let data = match &self.libsvm {
            Some(path) => read_libsvm(path, self.dim)?,
            None => synthesize(
                self.n_samples,
                self.dim.unwrap_or(Self::SYNTHETIC_DIM),
                self.noise,
                self.data_seed(),
            )?,
        };
        let shuffle = self.shuffle.then(|| self.data_seed());
        LogisticProblem::new(data, self.lambda, self.workers, shuffle)
    }

    /// The text form, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn Display| out.push_str(&format!("{k} = {v}\n"));
        put("algorithm", &self.algorithm);
        put("compressor", &self.compressor);
        if let Some(k) = self.k {
            put("k", &k);
        }
        if let Some(f) = self.k_fraction {
            put("k_fraction", &f);
        }
        put("workers", &self.workers);
        put("tau", &self.tau);
        put("alpha", &self.alpha);
        put("schedule", &self.schedule);
        put("beta1", &self.beta1);
        put("beta2", &self.beta2);
        put("nu", &self.nu);
        put("lambda", &self.lambda);
        put("iterations", &self.iterations);
        put("seed", &self.seed);
        if let Some(s) = self.data_seed {
            put("data_seed", &s);
        }
        put("shuffle", &self.shuffle);
        put("warmup_fraction", &self.warmup_fraction);
        put("downlink_counting", &self.downlink_counting.as_str());
        put("sgd_momentum", &self.sgd_momentum);
        if let Some(p) = &self.libsvm {
            put("libsvm", &p.display());
        }
        put("n_samples", &self.n_samples);
        if let Some(d) = self.dim {
            put("dim", &d);
        }
        put("noise", &self.noise);
        put("log_interval", &self.log_interval);
        if let Some(p) = &self.output {
            put("output", &p.display());
        }
        if let Some(p) = &self.trace {
            put("trace", &p.display());
        }
        put("record_time", &self.record_time);
        out
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::config(format!("bad value '{value}' for {key}: {e}")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match value {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    match value {
        "" | "none" => None,
        v => Some(v.into()),
    }
}
