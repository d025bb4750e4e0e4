//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string, so
//! the page needs no generated glue beyond `wasm-bindgen`'s own. The same
//! functions are tested natively.

use cdadam::algorithms::{run, RunOptions};
use cdadam::harness::RunConfig;
use cdadam::theory::{theorem_constants, TheoryInputs};
use cdadam::{CompressorKind, CompressorSpec, Lane, ModelVector, Purpose, RandomStream};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest problem the page will simulate; keeps the tab responsive.
const MAX_WORK: u64 = 50_000_000;

fn to_js(result: Result<Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Compresses `values` (comma or whitespace separated) once and reports the
/// decoded vector, the squared error, the measured and analytical `π`, and
/// the message size in bits.
#[wasm_bindgen]
pub fn compress_vector(values: &str, compressor: &str, k: u32, seed: u64) -> Result<String, JsError> {
    to_js(compress_json(values, compressor, k as usize, seed))
}

pub fn compress_json(values: &str, compressor: &str, k: usize, seed: u64) -> Result<Value, String> {
    let parsed: Result<Vec<f64>, _> = values
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::parse::<f64>)
        .collect();
    let parsed = parsed.map_err(|e| format!("bad number: {e}"))?;
    if parsed.is_empty() {
        return Err("enter at least one number".into());
    }
    let x = ModelVector::new(parsed).map_err(|e| e.to_string())?;
    let kind: CompressorKind = compressor.parse().map_err(|e: cdadam::Error| e.to_string())?;
    let spec = CompressorSpec::from_kind(kind, kind.is_sparsifier().then_some(k)).map_err(|e| e.to_string())?;
    spec.validate(x.dim()).map_err(|e| e.to_string())?;
    let mut rng = RandomStream::new(seed, Lane::new(0, 0), Purpose::Diagnostic);
    let msg = spec.compress(&x, &mut rng);
    let err = msg.error_sq(&x);
    let norm = x.norm_sq();
    Ok(json!({
        "input": x.as_slice(),
        "output": msg.decode().as_slice(),
        "error_sq": err,
        "measured_pi": if norm > 0.0 { Some(err / norm) } else { None },
        "analytical_pi": spec.analytical_pi(&x),
        "bits": msg.bit_size(),
        "dense_bits": 32 * x.dim() as u64,
    }))
}

/// Runs a small synthetic logistic-regression experiment. `config` uses the
/// same `key = value` lines as the command-line tool; output paths are
/// ignored. Returns the logged rows.
#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, JsError> {
    to_js(simulate_json(config))
}

pub fn simulate_json(config: &str) -> Result<Value, String> {
    let mut cfg = RunConfig::parse(config).map_err(|e| e.to_string())?;
    if cfg.libsvm.is_some() {
        return Err("the browser demo only supports synthetic data".into());
    }
    cfg.output = None;
    cfg.trace = None;
    cfg.record_time = false;
    let dim = cfg.dim.unwrap_or(RunConfig::SYNTHETIC_DIM) as u64;
    let work = cfg.iterations.saturating_mul(cfg.n_samples as u64).saturating_mul(dim);
    if work > MAX_WORK {
        return Err(format!(
            "iterations x samples x dim = {work} exceeds the demo limit of {MAX_WORK}"
        ));
    }
    let problem = cfg.build_problem().map_err(|e| e.to_string())?;
    let sim = cfg.sim_config(problem.data().dim()).map_err(|e| e.to_string())?;
    let options = RunOptions {
        log_interval: cfg.log_interval,
        ..RunOptions::new(cfg.iterations)
    };
    let (rows, status) = match run(&problem, &sim, ModelVector::zeros(problem.data().dim()), options) {
        Ok(out) => (out.rows, "ok".to_owned()),
        Err(f) => (f.partial, f.error.to_string()),
    };
    Ok(json!({
        "algorithm": cfg.algorithm.as_str(),
        "alpha": cfg.alpha,
        "status": status,
        "iter": rows.iter().map(|r| r.iter).collect::<Vec<_>>(),
        "grad_norm": rows.iter().map(|r| r.grad_norm).collect::<Vec<_>>(),
        "bits_total": rows.iter().map(|r| r.bits_total()).collect::<Vec<_>>(),
    }))
}

/// Evaluates the convergence-bound constants at `pi = 0, step, 2 step, ...`
/// below 1. `inputs` holds `key = value` overrides of the default inputs.
#[wasm_bindgen]
pub fn theory_table(inputs: &str, step: f64) -> Result<String, JsError> {
    to_js(theory_json(inputs, step))
}

pub fn theory_json(inputs: &str, step: f64) -> Result<Value, String> {
    if !(step > 0.0 && step < 1.0) {
        return Err("step must lie in (0, 1)".into());
    }
    let base = TheoryInputs::parse(inputs).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    let mut i = 0u32;
    loop {
        let pi = f64::from(i) * step;
        if pi >= 1.0 {
            break;
        }
        let k = theorem_constants(&TheoryInputs { pi, ..base }).map_err(|e| e.to_string())?;
        let mut row = serde_json::Map::new();
        row.insert("pi".into(), json!(pi));
        for (label, value) in k.rows() {
            row.insert(label.into(), json!(value));
        }
        rows.push(Value::Object(row));
        i += 1;
    }
    Ok(Value::Array(rows))
}
