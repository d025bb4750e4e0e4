//! LibSVM / SVMlight text format: `<label> <index>:<value> ...` per line with
//! 1-based indices. Labels `+1`/`-1`, or `1`/`0` with `0` mapped to `-1`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Parses a LibSVM stream into a dense dataset. The dimension is the largest
/// index seen unless `dim` overrides it.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line");
        labels.push(parse_label(label_tok).ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("invalid label '{label_tok}'"),
        })?);

        let mut row = Vec::new();
        for tok in tokens {
            let bad = |what: &str| Error::Parse {
                line: lineno,
                message: format!("{what} in token '{tok}'"),
            };
            let (idx, val) = tok.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let idx: i64 = idx.parse().map_err(|_| bad("invalid index"))?;
            if idx < 1 {
                return Err(bad("index must be >= 1"));
            }
            let val: f64 = val.parse().map_err(|_| bad("invalid value"))?;
            if !val.is_finite() {
                return Err(bad("non-finite value"));
            }
            let idx = idx as usize;
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
    }

    if labels.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no samples".into(),
        });
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(Error::config(format!(
                "dimension override {d} is smaller than the largest index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    let mut features = vec![0.0; rows.len() * d];
    for (r, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[r * d + j] = v;
        }
    }
    Dataset::new(d, features, labels)
}

pub fn read_libsvm(path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(BufReader::new(file), dim)
}

/// Writes nonzero features only; values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    for i in 0..data.len() {
        let label = if data.label(i) > 0.0 { "+1" } else { "-1" };
        write!(out, "{label}")?;
        for (j, v) in data.row(i).iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_label(tok: &str) -> Option<f64> {
    let v: f64 = tok.parse().ok()?;
    if v == 1.0 {
        Some(1.0)
    } else if v == -1.0 || v == 0.0 {
        Some(-1.0)
    } else {
        None
    }
}
