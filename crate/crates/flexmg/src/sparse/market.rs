//! Matrix Market coordinate I/O (1-based indices, `real general`).
//! Values are written in shortest round-trip form so that
//! write → read reproduces the matrix exactly.

use super::CsrMatrix;
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write_matrix_market<W: Write>(w: &mut W, a: &CsrMatrix) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {}", i + 1, c + 1, v)?;
        }
    }
    Ok(())
}

pub fn read_matrix_market<R: Read>(r: R) -> Result<CsrMatrix> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidCsr("empty Matrix Market file".into()))??;
    if header.trim() != HEADER {
        return Err(Error::InvalidCsr(format!(
            "unsupported Matrix Market header: {header}"
        )));
    }
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        if dims.is_none() {
            let nrows = parse_field(it.next(), lineno + 2)?;
            let ncols = parse_field(it.next(), lineno + 2)?;
            let nnz = parse_field(it.next(), lineno + 2)?;
            dims = Some((nrows, ncols, nnz));
            continue;
        }
        let i: usize = parse_field(it.next(), lineno + 2)?;
        let j: usize = parse_field(it.next(), lineno + 2)?;
        let v: f64 = it
            .next()
            .ok_or_else(|| Error::InvalidCsr(format!("line {}: missing value", lineno + 2)))?
            .parse()
            .map_err(|e| Error::InvalidCsr(format!("line {}: {e}", lineno + 2)))?;
        if i == 0 || j == 0 {
            return Err(Error::InvalidCsr(format!(
                "line {}: Matrix Market indices are 1-based",
                lineno + 2
            )));
        }
        triplets.push((i - 1, j - 1, v));
    }
    let (nrows, ncols, nnz) =
        dims.ok_or_else(|| Error::InvalidCsr("missing dimension line".into()))?;
    if triplets.len() != nnz {
        return Err(Error::InvalidCsr(format!(
            "expected {nnz} entries, found {}",
            triplets.len()
        )));
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, lineno: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .ok_or_else(|| Error::InvalidCsr(format!("line {lineno}: missing field")))?
        .parse()
        .map_err(|e| Error::InvalidCsr(format!("line {lineno}: {e}")))
}

pub fn write_matrix_market_file<P: AsRef<Path>>(path: P, a: &CsrMatrix) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix_market(&mut f, a)
}

pub fn read_matrix_market_file<P: AsRef<Path>>(path: P) -> Result<CsrMatrix> {
    read_matrix_market(std::fs::File::open(path)?)
}
