//! Text formats for datasets and partitions, and atomic file writes.
//!
//! Points file: one point per line, whitespace- or comma-separated decimals;
//! blank lines and lines starting with `#` are ignored. Hard partition file:
//! one integer label per line. Soft partition file: a `k=<int>` header line
//! followed by n rows of k membership weights.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::partition::{DataSet, Partition};

/// Writes `bytes` to `path` atomically: a temp file in the same directory is
/// written, flushed, then renamed over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Content lines of a text file with 1-based line numbers; blank and `#`
/// lines are skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

/// Parses a points file into a dataset.
pub fn load_dataset(path: &Path) -> Result<DataSet> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text)
}

/// Parses points-file text; factored out of [`load_dataset`] for testing.
pub fn parse_dataset(text: &str) -> Result<DataSet> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut dim: Option<usize> = None;
    for (line_no, line) in content_lines(text) {
        let mut row = Vec::new();
        for tok in tokens(line) {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cannot parse {tok:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value {tok:?}"),
                });
            }
            row.push(v);
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("ragged row: expected {d} columns, got {}", row.len()),
                })
            }
            _ => {}
        }
        points.push(row);
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("empty dataset".to_string()));
    }
    DataSet::new(points)
}

/// A partition loaded from disk, plus the label compaction applied to hard
/// files whose labels had gaps (`(original, compact)` pairs, in label order).
#[derive(Debug, Clone)]
pub struct LoadedPartition {
    pub partition: Partition,
    pub relabeled: Vec<(usize, usize)>,
}

/// Loads a hard or soft partition file and validates it against `ds`.
/// A leading `k=<int>` line selects the soft format.
pub fn load_partition(path: &Path, ds: &DataSet) -> Result<LoadedPartition> {
    let text = fs::read_to_string(path)?;
    parse_partition(&text, ds)
}

/// Parses partition-file text; factored out of [`load_partition`] for
/// testing.
pub fn parse_partition(text: &str, ds: &DataSet) -> Result<LoadedPartition> {
    let mut lines = content_lines(text).peekable();
    let loaded = match lines.peek() {
        Some((_, l)) if l.starts_with("k=") => parse_soft(lines),
        Some(_) => parse_hard(lines),
        None => Err(Error::EmptyInput("empty partition file".to_string())),
    }?;
    loaded.partition.validate_against(ds)?;
    Ok(loaded)
}

fn parse_hard<'a>(lines: impl Iterator<Item = (usize, &'a str)>) -> Result<LoadedPartition> {
    let mut raw: Vec<usize> = Vec::new();
    for (line_no, line) in lines {
        let mut toks = tokens(line);
        let tok = toks.next().expect("content lines are non-empty");
        if toks.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "hard partition rows carry exactly one label".to_string(),
            });
        }
        let label: usize = tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("cannot parse {tok:?} as a cluster label"),
        })?;
        raw.push(label);
    }
    // Compact label gaps ({0, 2} becomes {0, 1}) and remember the mapping.
    let mut distinct: Vec<usize> = raw.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let compact = |l: usize| distinct.binary_search(&l).expect("label seen above");
    let relabeled: Vec<(usize, usize)> = distinct
        .iter()
        .enumerate()
        .filter(|(new, orig)| *new != **orig)
        .map(|(new, orig)| (*orig, new))
        .collect();
    let labels: Vec<usize> = raw.iter().map(|&l| compact(l)).collect();
    let partition = Partition::from_labels(&labels, Some(distinct.len()))?;
    Ok(LoadedPartition {
        partition,
        relabeled,
    })
}

fn parse_soft<'a>(mut lines: impl Iterator<Item = (usize, &'a str)>) -> Result<LoadedPartition> {
    let (header_no, header) = lines.next().expect("peeked soft header");
    let k: usize = header[2..].trim().parse().map_err(|_| Error::Parse {
        line: header_no,
        message: format!("cannot parse {:?} as k", &header[2..]),
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in lines {
        let mut row = Vec::with_capacity(k);
        for tok in tokens(line) {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cannot parse {tok:?} as a weight"),
            })?;
            row.push(v);
        }
        if row.len() != k {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {k} weights, got {}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("soft partition has no rows".to_string()));
    }
    Ok(LoadedPartition {
        partition: Partition::from_rows(&rows)?,
        relabeled: Vec::new(),
    })
}

/// Serializes a partition in the matching text format (hard: label lines,
/// soft: `k=` header plus weight rows). Floats print in shortest round-trip
/// form, so save-then-load reproduces weights exactly.
pub fn partition_to_string(p: &Partition) -> String {
    let mut out = String::new();
    match p.labels() {
        Some(labels) => {
            for l in labels {
                out.push_str(&format!("{l}\n"));
            }
        }
        None => {
            out.push_str(&format!("k={}\n", p.k()));
            for i in 0..p.n() {
                let row: Vec<String> =
                    (0..p.k()).map(|j| format!("{}", p.weight(i, j))).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
    }
    out
}

/// Writes a partition file atomically.
pub fn save_partition(p: &Partition, path: &Path) -> Result<()> {
    atomic_write(path, partition_to_string(p).as_bytes())
}

/// Serializes a dataset in the points format.
pub fn dataset_to_string(ds: &DataSet) -> String {
    let mut out = String::new();
    for i in 0..ds.n() {
        let row: Vec<String> = ds.point(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Writes a dataset file atomically.
pub fn save_dataset(ds: &DataSet, path: &Path) -> Result<()> {
    atomic_write(path, dataset_to_string(ds).as_bytes())
}
