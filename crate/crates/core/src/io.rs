//! Flat field layouts.
//!
//! Binary: little-endian `u32 n`, `u32 points`, then row-major `f64` values.
//! Matrix fields store the `n*n` entries of each point row-major as
//! interleaved `(re, im)` pairs.
//!
//! CSV: a `n,points` header row, one row with the two integers, then one row
//! per grid point (`value` or `re,im,re,im,...`), printed with 17 significant
//! digits.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{HermitianField, ScalarField, TorusGrid};

fn write_header<W: Write>(w: &mut W, grid: &TorusGrid) -> Result<()> {
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&(grid.points() as u32).to_le_bytes())?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<TorusGrid> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    let n = u32::from_le_bytes(b) as usize;
    r.read_exact(&mut b)?;
    let points = u32::from_le_bytes(b) as usize;
    TorusGrid::new(n, points)
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_scalar_bin<W: Write>(w: &mut W, f: &ScalarField) -> Result<()> {
    write_header(w, f.grid())?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_scalar_bin<R: Read>(r: &mut R) -> Result<ScalarField> {
    let grid = read_header(r)?;
    let values = read_f64s(r, grid.len())?;
    ScalarField::new(&grid, values)
}

pub fn write_hermitian_bin<W: Write>(w: &mut W, h: &HermitianField) -> Result<()> {
    write_header(w, h.grid())?;
    for z in h.data() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_hermitian_bin<R: Read>(r: &mut R) -> Result<HermitianField> {
    let grid = read_header(r)?;
    let nn = grid.n() * grid.n();
    let raw = read_f64s(r, 2 * grid.len() * nn)?;
    let data = raw
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    HermitianField::new(&grid, data)
}

/// Full-precision float formatting shared by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_scalar_csv<W: Write>(w: &mut W, f: &ScalarField) -> Result<()> {
    writeln!(w, "n,points")?;
    writeln!(w, "{},{}", f.grid().n(), f.grid().points())?;
    for &v in f.values() {
        writeln!(w, "{}", fmt_f64(v))?;
    }
    Ok(())
}

pub fn write_hermitian_csv<W: Write>(w: &mut W, h: &HermitianField) -> Result<()> {
    writeln!(w, "n,points")?;
    writeln!(w, "{},{}", h.grid().n(), h.grid().points())?;
    for m in h.matrices() {
        let row: Vec<String> = m
            .iter()
            .flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)])
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn csv_rows<R: BufRead>(r: R) -> Result<(TorusGrid, Vec<Vec<f64>>)> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing {what}")))?
            .map_err(Error::from)
    };
    let head = next("header")?;
    if head.trim() != "n,points" {
        return Err(Error::Format(format!("unexpected header {head:?}")));
    }
    let dims = next("dimensions")?;
    let parts: Vec<usize> = dims
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format(format!("bad dimensions row: {e}")))?;
    if parts.len() != 2 {
        return Err(Error::Format("dimensions row needs two integers".into()));
    }
    let grid = TorusGrid::new(parts[0], parts[1])?;
    let mut rows = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 3)))?;
        rows.push(row);
    }
    Ok((grid, rows))
}

pub fn read_scalar_csv<R: BufRead>(r: R) -> Result<ScalarField> {
    let (grid, rows) = csv_rows(r)?;
    if rows.iter().any(|row| row.len() != 1) {
        return Err(Error::Format("scalar rows must have one value".into()));
    }
    ScalarField::new(&grid, rows.into_iter().map(|r| r[0]).collect())
}

pub fn read_hermitian_csv<R: BufRead>(r: R) -> Result<HermitianField> {
    let (grid, rows) = csv_rows(r)?;
    let width = 2 * grid.n() * grid.n();
    if rows.iter().any(|row| row.len() != width) {
        return Err(Error::Format(format!(
            "matrix rows must have {width} values"
        )));
    }
    let data = rows
        .iter()
        .flat_map(|row| {
            row.chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect::<Vec<_>>()
        })
        .collect();
    HermitianField::new(&grid, data)
}
