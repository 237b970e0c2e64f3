//! REFLCHAIN v1 chain files.
//!
//! ```text
//! # REFLCHAIN 1
//! # {"names":["d","rho"],"shape":[32,4000,2],...}
//! walker,step,d,rho
//! 0,0,50.12,4.01
//! ...
//! ```
//!
//! Floats are written as the shortest decimal string that parses back to
//! the same binary64 value, so a write/read round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::priors::KdeSource;
use crate::sampler::{Chain, ChainError, ChainMeta};

pub const MAGIC: &str = "# REFLCHAIN 1";

#[derive(Debug, Error)]
pub enum ChainIoError {
    #[error("unsupported chain format: first line is {0:?}, expected \"# REFLCHAIN 1\"")]
    FormatVersionUnsupported(String),
    #[error("corrupt chain header: {0}")]
    CorruptHeader(String),
    #[error("column mismatch on line {line}: {reason}")]
    ColumnMismatch { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("column {0:?} not found in chain")]
    UnknownColumn(String),
    #[error("chain has {0} columns; name the one to use")]
    AmbiguousColumn(usize),
}

pub fn chain_to_string(chain: &Chain) -> String {
    let meta = serde_json::to_string(chain.meta()).expect("chain metadata serialises");
    let mut out = String::with_capacity(64 + chain.values().len() * 20);
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str("# ");
    out.push_str(&meta);
    out.push('\n');
    out.push_str("walker,step");
    for name in chain.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for w in 0..chain.walkers() {
        for s in 0..chain.steps() {
            let _ = write!(out, "{w},{}", chain.step_index(s));
            for v in chain.position(w, s) {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn chain_from_str(text: &str) -> Result<Chain, ChainIoError> {
    let mut lines = text.lines().enumerate();
    let first = lines.next().map(|(_, l)| l).unwrap_or("");
    if first.trim_end() != MAGIC {
        return Err(ChainIoError::FormatVersionUnsupported(first.to_string()));
    }
    let meta_line = lines
        .next()
        .map(|(_, l)| l)
        .ok_or_else(|| ChainIoError::CorruptHeader("missing metadata line".into()))?;
    let json = meta_line
        .strip_prefix("# ")
        .ok_or_else(|| ChainIoError::CorruptHeader("metadata line must start with '# '".into()))?;
    let meta: ChainMeta = serde_json::from_str(json).map_err(|e| ChainIoError::CorruptHeader(e.to_string()))?;
    let [walkers, steps, dim] = meta.shape;
    if meta.names.len() != dim {
        return Err(ChainIoError::CorruptHeader(format!(
            "{} names for {dim} parameters",
            meta.names.len()
        )));
    }
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| ChainIoError::CorruptHeader("missing column header".into()))?;
    let expected: Vec<String> = ["walker", "step"]
        .iter()
        .map(|s| s.to_string())
        .chain(meta.names.iter().cloned())
        .collect();
    let found: Vec<&str> = header.split(',').collect();
    if found != expected {
        return Err(ChainIoError::ColumnMismatch {
            line: header_no + 1,
            reason: format!("header {header:?} does not match parameter names"),
        });
    }
    let interval = meta.thin.stride();
    let mut values = Vec::with_capacity(walkers * steps * dim);
    let mut rows = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(ChainIoError::ColumnMismatch {
                line: line_no,
                reason: format!("expected {} fields, found {}", dim + 2, fields.len()),
            });
        }
        let (w, s) = (rows / steps.max(1), rows % steps.max(1));
        let expect_step = meta.burn_in + s * interval;
        if fields[0].parse::<usize>().ok() != Some(w) || fields[1].parse::<usize>().ok() != Some(expect_step) {
            return Err(ChainIoError::MalformedRow {
                line: line_no,
                reason: format!("expected walker {w}, step {expect_step}"),
            });
        }
        for f in &fields[2..] {
            values.push(f.parse::<f64>().map_err(|_| ChainIoError::MalformedRow {
                line: line_no,
                reason: format!("not a number: {f:?}"),
            })?);
        }
        rows += 1;
    }
    if rows != walkers * steps {
        return Err(ChainIoError::MalformedRow {
            line: text.lines().count(),
            reason: format!("expected {} rows, found {rows}", walkers * steps),
        });
    }
    Ok(Chain::from_parts(meta, values)?)
}

pub fn write_chain(chain: &Chain, path: impl AsRef<Path>) -> Result<(), ChainIoError> {
    let path = path.as_ref();
    fs::write(path, chain_to_string(chain)).map_err(|source| ChainIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_chain(path: impl AsRef<Path>) -> Result<Chain, ChainIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ChainIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    chain_from_str(&text)
}

/// Loads the samples behind a KDE prior. A REFLCHAIN file contributes the
/// named column pooled over all walkers; any other file is read as
/// whitespace/comma separated numbers, taking the first column.
pub fn load_kde_samples(source: &KdeSource, base_dir: &Path) -> Result<Vec<f64>, ChainIoError> {
    let path = base_dir.join(&source.path);
    let text = fs::read_to_string(&path).map_err(|e| ChainIoError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    if text.starts_with(MAGIC) {
        let chain = chain_from_str(&text)?;
        let col = match &source.column {
            Some(name) => chain
                .names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| ChainIoError::UnknownColumn(name.clone()))?,
            None if chain.dim() == 1 => 0,
            None => return Err(ChainIoError::AmbiguousColumn(chain.dim())),
        };
        return Ok(chain.pooled().column(col));
    }
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let first = t.split(|c: char| c == ',' || c.is_whitespace()).next().unwrap_or("");
        out.push(first.parse::<f64>().map_err(|_| ChainIoError::MalformedRow {
            line: idx + 1,
            reason: format!("not a number: {first:?}"),
        })?);
    }
    Ok(out)
}
