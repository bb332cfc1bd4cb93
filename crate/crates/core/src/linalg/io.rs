//! SLMX binary matrix files and a plain CSV form for debugging.
//!
//! SLMX layout (little-endian): magic `SLMX`, `u32` version, `u64` rows,
//! `u64` cols, then `rows * cols` `f64` values in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{LinalgError, Matrix, Result, Vector};

pub const SLMX_MAGIC: [u8; 4] = *b"SLMX";
pub const SLMX_VERSION: u32 = 1;

pub fn write_slmx<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    w.write_all(&SLMX_MAGIC)?;
    w.write_all(&SLMX_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            LinalgError::Format("truncated SLMX block".into())
        } else {
            LinalgError::Io(e)
        }
    })
}

pub fn read_slmx<R: Read>(mut r: R) -> Result<Matrix> {
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic)?;
    if magic != SLMX_MAGIC {
        return Err(LinalgError::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != SLMX_VERSION {
        return Err(LinalgError::Format(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    read_exact_or_truncated(&mut r, &mut b8)?;
    let rows = u64::from_le_bytes(b8);
    read_exact_or_truncated(&mut r, &mut b8)?;
    let cols = u64::from_le_bytes(b8);
    let count = rows
        .checked_mul(cols)
        .filter(|&c| c <= (1 << 32))
        .ok_or_else(|| LinalgError::Format(format!("implausible shape {rows}x{cols}")))?
        as usize;
    let mut raw = vec![0u8; count * 8];
    read_exact_or_truncated(&mut r, &mut raw)?;
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Matrix::new(rows as usize, cols as usize, data)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_slmx(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    read_slmx(BufReader::new(File::open(path)?))
}

/// Vectors are stored as single-column SLMX matrices.
pub fn save_vector(path: impl AsRef<Path>, v: &Vector) -> Result<()> {
    save_matrix(path, &Matrix::column_vector(v)?)
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vector> {
    let m = load_matrix(path)?;
    if m.cols() != 1 {
        return Err(LinalgError::Format(format!(
            "expected a single-column matrix, found {} columns",
            m.cols()
        )));
    }
    Vector::new(m.as_slice().to_vec())
}

pub fn write_csv<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| {
                    LinalgError::Format(format!("line {}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}
