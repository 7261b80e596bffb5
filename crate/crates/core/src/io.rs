//! CSV readers and writers for paths, signals and coefficients.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical to the one written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dsp::FirFilter;
use crate::error::{Error, Result};
use crate::mcfxlms::Coefficients;
use crate::signal::PathMatrix;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => format_err(path, format!("{other:?}")),
    }
}

/// Writes equal-length columns under `headers`, one row per index.
pub fn write_columns<W: Write>(
    out: W,
    headers: &[String],
    columns: &[&[f64]],
) -> std::io::Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == rows));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(headers)?;
    let mut record = Vec::with_capacity(columns.len());
    for r in 0..rows {
        record.clear();
        record.extend(columns.iter().map(|c| c[r].to_string()));
        w.write_record(&record)?;
    }
    w.flush()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Headers and columns of a numeric CSV file.
pub fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() {
        return Err(format_err(path, "missing header row"));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                format_err(path, format!("row {}: `{field}` is not a number", line + 1))
            })?;
            columns[c].push(v);
        }
    }
    Ok((headers, columns))
}

/// `tap,m1_k1,m1_k2,…,mM_kK`: one column per path, `k` varying fastest.
pub fn write_path_matrix(path: &Path, paths: &PathMatrix) -> Result<()> {
    let mut headers = vec!["tap".to_owned()];
    let mut cols: Vec<Vec<f64>> = vec![(0..paths.taps()).map(|i| i as f64).collect()];
    for m in 0..paths.outputs() {
        for k in 0..paths.inputs() {
            headers.push(format!("m{}_k{}", m + 1, k + 1));
            cols.push(paths.get(m, k).taps().to_vec());
        }
    }
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let mut out = create(path)?;
    write_columns(&mut out, &headers, &refs).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn parse_path_label(label: &str) -> Option<(usize, usize)> {
    let rest = label.strip_prefix('m')?;
    let (m, k) = rest.split_once("_k")?;
    Some((m.parse().ok()?, k.parse().ok()?))
}

pub fn read_path_matrix(path: &Path) -> Result<PathMatrix> {
    let (headers, cols) = read_columns(path)?;
    if headers[0] != "tap" || headers.len() < 2 {
        return Err(format_err(path, "expected header `tap,m1_k1,...`"));
    }
    let last = parse_path_label(&headers[headers.len() - 1])
        .ok_or_else(|| format_err(path, format!("bad column `{}`", headers[headers.len() - 1])))?;
    let (outputs, inputs) = last;
    if outputs == 0 || inputs == 0 || outputs * inputs != headers.len() - 1 {
        return Err(format_err(path, "path columns do not form a full M×K grid"));
    }
    for (i, h) in headers[1..].iter().enumerate() {
        let want = (i / inputs + 1, i % inputs + 1);
        if parse_path_label(h) != Some(want) {
            return Err(format_err(
                path,
                format!(
                    "column {} is `{h}`, expected `m{}_k{}`",
                    i + 2,
                    want.0,
                    want.1
                ),
            ));
        }
    }
    for (i, &t) in cols[0].iter().enumerate() {
        if t != i as f64 {
            return Err(format_err(
                path,
                format!("tap index {t} out of order at row {}", i + 1),
            ));
        }
    }
    let filters = cols
        .into_iter()
        .skip(1)
        .map(FirFilter::new)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| format_err(path, e.to_string()))?;
    PathMatrix::new(outputs, inputs, filters).map_err(|e| format_err(path, e.to_string()))
}

/// One column per channel: `{prefix}1 … {prefix}C`.
pub fn write_signals(path: &Path, prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let headers: Vec<String> = (1..=rows.len()).map(|c| format!("{prefix}{c}")).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let mut out = create(path)?;
    write_columns(&mut out, &headers, &refs).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// Reads a per-channel signal file written by [`write_signals`].
pub fn read_signals(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(read_columns(path)?.1)
}

/// `k{k}_j{j}` (fully connected) or `j{j}` (collocated) columns, one row per tap.
pub fn write_coefficients(path: &Path, coef: &Coefficients) -> Result<()> {
    let refs: Vec<&[f64]> = coef.units.iter().map(Vec::as_slice).collect();
    let mut out = create(path)?;
    write_columns(&mut out, &coef.labels(), &refs).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn ensure_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}
