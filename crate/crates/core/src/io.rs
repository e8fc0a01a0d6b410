//! Text formats: MatrixMarket coordinate (observations), MatrixMarket array
//! and headerless CSV (dense matrices).
//!
//! External indices are 1-based; everything in memory is 0-based.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DenseMatrix, ObservationSet, ObservationVector};

const COORD_HEADER: &str = "%%MatrixMarket matrix coordinate real general";
const ARRAY_HEADER: &str = "%%MatrixMarket matrix array real general";

/// Upper bound on preallocation driven by untrusted size lines.
const MAX_PREALLOC: usize = 1 << 16;

/// Shortest round-trip text for a value, integral values without `.0`.
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = self.0;
        if v == v.trunc() && v.abs() < 1e15 {
            write!(f, "{v}")
        } else {
            write!(f, "{v:?}")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

fn parse_header(line: &str) -> Result<Layout> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(1, "missing `%%MatrixMarket matrix` banner"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(Error::parse(1, format!("unsupported layout `{other}`"))),
    };
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::parse(1, format!("unsupported field `{}`", tokens[3])));
    }
    if tokens[4] != "general" {
        return Err(Error::parse(1, format!("unsupported symmetry `{}`", tokens[4])));
    }
    Ok(layout)
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse(line, "missing value"))?;
    let v = tok
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid value `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn no_trailing<'a>(mut it: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match it.next() {
        Some(t) => Err(Error::parse(line, format!("unexpected token `{t}`"))),
        None => Ok(()),
    }
}

/// Parses observations in MatrixMarket coordinate format. Each line
/// `i j v` is one observation; repeated cells are separate observations.
pub fn parse_coordinate(text: &str) -> Result<(ObservationSet, ObservationVector)> {
    let first = text.lines().next().ok_or_else(|| Error::parse(1, "empty input"))?;
    if parse_header(first)? != Layout::Coordinate {
        return Err(Error::parse(1, "expected coordinate layout"));
    }
    let mut lines = data_lines(text);
    let (ln, size) = lines.next().ok_or_else(|| Error::parse(2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let d1 = parse_usize(toks.next(), ln, "row count")?;
    let d2 = parse_usize(toks.next(), ln, "column count")?;
    let m = parse_usize(toks.next(), ln, "entry count")?;
    no_trailing(toks, ln)?;
    if d1 == 0 || d2 == 0 {
        return Err(Error::parse(ln, "dimensions must be positive"));
    }

    let mut indices = Vec::with_capacity(m.min(MAX_PREALLOC));
    let mut values = Vec::with_capacity(m.min(MAX_PREALLOC));
    for (ln, line) in lines {
        if indices.len() == m {
            return Err(Error::parse(ln, format!("more than the declared {m} entries")));
        }
        let mut toks = line.split_whitespace();
        let i = parse_usize(toks.next(), ln, "row index")?;
        let j = parse_usize(toks.next(), ln, "column index")?;
        let v = parse_f64(toks.next(), ln)?;
        no_trailing(toks, ln)?;
        if i == 0 || i > d1 || j == 0 || j > d2 {
            return Err(Error::parse(ln, format!("index ({i}, {j}) outside {d1}x{d2}")));
        }
        indices.push((i - 1, j - 1));
        values.push(v);
    }
    if indices.len() != m {
        return Err(Error::parse(
            text.lines().count(),
            format!("declared {m} entries, found {}", indices.len()),
        ));
    }
    Ok((ObservationSet::new(d1, d2, indices)?, ObservationVector(values)))
}

pub fn write_coordinate(omega: &ObservationSet, y: &ObservationVector) -> Result<String> {
    if omega.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "|Ω| = {} but {} values",
            omega.len(),
            y.len()
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{COORD_HEADER}");
    let _ = writeln!(out, "{} {} {}", omega.d1(), omega.d2(), omega.len());
    for (&(i, j), v) in omega.indices().iter().zip(y.values()) {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, Num(*v));
    }
    Ok(out)
}

/// Parses a dense matrix in MatrixMarket array format (column-major values).
pub fn parse_array(text: &str) -> Result<DenseMatrix> {
    let first = text.lines().next().ok_or_else(|| Error::parse(1, "empty input"))?;
    if parse_header(first)? != Layout::Array {
        return Err(Error::parse(1, "expected array layout"));
    }
    let mut lines = data_lines(text);
    let (ln, size) = lines.next().ok_or_else(|| Error::parse(2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let rows = parse_usize(toks.next(), ln, "row count")?;
    let cols = parse_usize(toks.next(), ln, "column count")?;
    no_trailing(toks, ln)?;
    if rows == 0 || cols == 0 {
        return Err(Error::parse(ln, "dimensions must be positive"));
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::parse(ln, "dimensions overflow"))?;

    let mut col_major = Vec::with_capacity(n.min(MAX_PREALLOC));
    for (ln, line) in lines {
        for tok in line.split_whitespace() {
            if col_major.len() == n {
                return Err(Error::parse(ln, format!("more than the declared {n} values")));
            }
            col_major.push(parse_f64(Some(tok), ln)?);
        }
    }
    if col_major.len() != n {
        return Err(Error::parse(
            text.lines().count(),
            format!("declared {n} values, found {}", col_major.len()),
        ));
    }
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| col_major[j * rows + i]))
}

pub fn write_array(x: &DenseMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{ARRAY_HEADER}");
    let _ = writeln!(out, "{} {}", x.rows(), x.cols());
    for j in 0..x.cols() {
        for i in 0..x.rows() {
            let _ = writeln!(out, "{}", Num(x.get(i, j)));
        }
    }
    out
}

/// Parses a headerless CSV, one matrix row per line.
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    for (n, line) in text.lines().enumerate() {
        let ln = n + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = data.len();
        for tok in line.split(',') {
            data.push(parse_f64(Some(tok.trim()), ln)?);
        }
        let width = data.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => return Err(Error::parse(ln, format!("row has {width} fields, expected {c}"))),
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::parse(1, "empty input"))?;
    DenseMatrix::new(rows, cols, data)
}

pub fn write_csv(x: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", Num(x.get(i, j)));
        }
        out.push('\n');
    }
    out
}

pub fn read_observations(path: &Path) -> Result<(ObservationSet, ObservationVector)> {
    parse_coordinate(&std::fs::read_to_string(path)?)
}

pub fn write_observations(path: &Path, omega: &ObservationSet, y: &ObservationVector) -> Result<()> {
    std::fs::write(path, write_coordinate(omega, y)?)?;
    Ok(())
}

/// Reads a dense matrix; `.csv` files are CSV, everything else MatrixMarket.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_csv(&text)
    } else {
        parse_array(&text)
    }
}

pub fn write_matrix(path: &Path, x: &DenseMatrix) -> Result<()> {
    let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(x)
    } else {
        write_array(x)
    };
    std::fs::write(path, text)?;
    Ok(())
}
