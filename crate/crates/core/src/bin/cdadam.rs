//! Command-line front end.
//!
//! Exit codes: 0 success, 2 divergence, 3 configuration or input error, 4 I/O error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cdadam::harness::{
    extract, grid_search, parse_grid, read_csv, run_experiment, write_csv, Column, RunConfig, DEFAULT_ALPHA_GRID,
};
use cdadam::problems::read_libsvm;
use cdadam::theory::{theorem_constants, TheoryInputs};
use cdadam::Error;

#[derive(Parser)]
#[command(
    name = "cdadam",
    version,
    about = "Communication-compressed distributed AMSGrad simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment. Writes CSV to `output` (or stdout) and a JSON record next to it.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set alpha=0.003`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Grid-search the step size and report the best one.
    Sweep {
        config: PathBuf,
        /// `alpha=0.001,0.003,...`; defaults to 0.001..0.009 by 0.002 plus 0.01.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate the convergence-bound constants.
    Theory {
        /// `key = value` file with any of pi, L, G, G_inf, sigma, nu, beta1, n, N, d, delta_f, epsilon.
        inputs: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Parse a LibSVM file and print its shape.
    ParseCheck {
        file: PathBuf,
        /// Declared feature dimension.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Print two columns of a metrics CSV for plotting.
    Extract {
        /// One of the CSV columns or `bits_total` (= bits_up + bits_down).
        #[arg(long, default_value = "bits_up")]
        x: String,
        #[arg(long, default_value = "grad_norm")]
        y: String,
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 3 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, overrides } => run(&config, &overrides),
        Command::Sweep {
            config,
            grid,
            overrides,
        } => sweep(&config, grid.as_deref(), &overrides),
        Command::Theory {
            inputs,
            overrides,
            json,
        } => theory(inputs.as_deref(), &overrides, json),
        Command::ParseCheck { file, dim } => parse_check(&file, dim),
        Command::Extract { x, y, csv } => extract_columns(&x, &y, &csv),
    }
}

/// Writes to stdout. A closed pipe (`cdadam theory | head`) is not an error.
fn emit(text: &str) -> Result<(), Error> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)?;
    for pair in overrides {
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(path: &Path, overrides: &[String]) -> Result<(), Error> {
    let cfg = load_config(path, overrides)?;
    let out = run_experiment(&cfg).map_err(|f| {
        eprintln!("stopped after {} logged rows", f.rows.len());
        f.error
    })?;
    if cfg.output.is_none() {
        let mut buf = Vec::new();
        write_csv(&out.rows, &mut buf).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?;
        emit(&String::from_utf8_lossy(&buf))?;
    }
    if let Some(last) = out.rows.last() {
        eprintln!(
            "{}: iter {} grad_norm {:.6e} loss {:.6} bits up {} down {}",
            cfg.algorithm, last.iter, last.grad_norm, last.loss, last.bits_up, last.bits_down
        );
    }
    if let Some((lo, hi)) = out.pi_range {
        eprintln!("measured pi range [{lo:.4}, {hi:.4}]");
    }
    Ok(())
}

fn sweep(path: &Path, grid: Option<&str>, overrides: &[String]) -> Result<(), Error> {
    let cfg = load_config(path, overrides)?;
    let alphas = match grid {
        Some(spec) => parse_grid(spec)?,
        None => DEFAULT_ALPHA_GRID.to_vec(),
    };
    let result = grid_search(&cfg, &alphas)?;
    let mut text = String::from("alpha\tmin_grad_norm\n");
    for p in &result.points {
        let _ = match &p.outcome {
            Ok(g) => writeln!(text, "{}\t{g:e}", p.alpha),
            Err(e) => writeln!(text, "{}\tdiverged ({e})", p.alpha),
        };
    }
    let _ = writeln!(
        text,
        "best alpha = {} (min grad_norm {:e})",
        result.best_alpha, result.best_min_grad_norm
    );
    emit(&text)
}

fn theory(inputs: Option<&Path>, overrides: &[String], json: bool) -> Result<(), Error> {
    let mut inp = match inputs {
        Some(p) => TheoryInputs::parse(&std::fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.into(),
            source: e,
        })?)?,
        None => TheoryInputs::default(),
    };
    for pair in overrides {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{pair}'")))?;
        inp.set(k.trim(), v.trim())?;
    }
    let k = theorem_constants(&inp)?;
    let mut text = String::new();
    if json {
        let _ = writeln!(text, "{:#}", serde_json::json!({ "inputs": inp, "constants": k }));
    } else {
        for (label, value) in k.rows() {
            let _ = writeln!(text, "{label:<12} {value:e}");
        }
    }
    emit(&text)
}

fn parse_check(file: &Path, dim: Option<usize>) -> Result<(), Error> {
    let data = read_libsvm(file, dim)?;
    let positive = data.labels().iter().filter(|&&y| y > 0.0).count();
    let nnz = (0..data.len())
        .map(|i| data.row(i).iter().filter(|v| **v != 0.0).count())
        .sum::<usize>();
    emit(&format!(
        "samples   {}\ndim       {}\nlabels    +1: {positive}  -1: {}\nnonzeros  {nnz}\n",
        data.len(),
        data.dim(),
        data.len() - positive
    ))
}

fn extract_columns(x: &str, y: &str, csv: &Path) -> Result<(), Error> {
    let (x, y): (Column, Column) = (x.parse()?, y.parse()?);
    let file = std::fs::File::open(csv).map_err(|e| Error::Io {
        path: csv.into(),
        source: e,
    })?;
    let rows = read_csv(std::io::BufReader::new(file))?;
    emit(&extract(&rows, x, y))
}
