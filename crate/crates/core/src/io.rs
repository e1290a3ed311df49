//! Matrix file formats.
//!
//! Two interchangeable on-disk layouts:
//!
//! * **LDMX** (binary): magic bytes `LDMX`, little-endian `u32` rows and
//!   cols, then `rows * cols` little-endian `f64` values, row-major.
//!   Round-trips `f64` matrices bit-exactly.
//! * **CSV** (text): a `rows,cols` header line, then one comma-separated
//!   line per row. Values are written in shortest round-trip form, so a
//!   `f64` matrix survives a CSV round trip exactly as well.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"LDMX";

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

pub fn save_ldmx<F: Scalar>(m: &Matrix<F>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| Error::io(path_str(path), e))
    };
    emit(MAGIC)?;
    emit(&(m.rows() as u32).to_le_bytes())?;
    emit(&(m.cols() as u32).to_le_bytes())?;
    for &v in m.data() {
        let v = v.to_f64().ok_or(Error::NonFinite("save_ldmx"))?;
        emit(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path_str(path), e))
}

pub fn load_ldmx<F: Scalar>(path: &Path) -> Result<Matrix<F>> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io(path_str(path), e))?;
    if &magic != MAGIC {
        return Err(Error::format(path_str(path), "bad magic bytes"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)
        .map_err(|e| Error::io(path_str(path), e))?;
    let rows = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)
        .map_err(|e| Error::io(path_str(path), e))?;
    let cols = u32::from_le_bytes(word) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(path_str(path), "zero dimension in header"));
    }

    let mut data = Vec::with_capacity(rows * cols);
    let mut buf = [0u8; 8];
    for _ in 0..rows * cols {
        r.read_exact(&mut buf).map_err(|e| {
            Error::format(path_str(path), format!("truncated payload: {e}"))
        })?;
        let v = f64::from_le_bytes(buf);
        data.push(F::from_f64(v).ok_or(Error::NonFinite("load_ldmx"))?);
    }
    // reject trailing garbage
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::format(
                path_str(path),
                "trailing bytes after payload",
            ))
        }
        Err(e) => return Err(Error::io(path_str(path), e)),
    }
    Matrix::new(rows, cols, data)
}

pub fn save_csv_matrix<F: Scalar>(m: &Matrix<F>, path: &Path) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("{},{}\n", m.rows(), m.cols()));
    for i in 0..m.rows() {
        let row: Vec<String> = m
            .row(i)
            .iter()
            .map(|v| format!("{}", v.to_f64().unwrap_or(f64::NAN)))
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path_str(path), e))
}

pub fn load_csv_matrix<F: Scalar>(path: &Path) -> Result<Matrix<F>> {
    let file = File::open(path).map_err(|e| Error::io(path_str(path), e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::format(path_str(path), "empty file"))?
        .map_err(|e| Error::io(path_str(path), e))?;
    let dims: Vec<&str> = header.trim().split(',').collect();
    if dims.len() != 2 {
        return Err(Error::format(path_str(path), "header must be `rows,cols`"));
    }
    let rows: usize = dims[0]
        .trim()
        .parse()
        .map_err(|_| Error::format(path_str(path), "bad row count in header"))?;
    let cols: usize = dims[1]
        .trim()
        .parse()
        .map_err(|_| Error::format(path_str(path), "bad col count in header"))?;

    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path_str(path), e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i >= rows {
            return Err(Error::format(
                path_str(path),
                format!("more than {rows} data rows"),
            ));
        }
        let mut count = 0usize;
        for field in line.trim().split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(path_str(path), format!("bad value `{field}` in row {i}"))
            })?;
            data.push(F::from_f64(v).ok_or(Error::NonFinite("load_csv_matrix"))?);
            count += 1;
        }
        if count != cols {
            return Err(Error::format(
                path_str(path),
                format!("row {i} has {count} values, expected {cols}"),
            ));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::format(
            path_str(path),
            format!("expected {} values, found {}", rows * cols, data.len()),
        ));
    }
    Matrix::new(rows, cols, data)
}

/// Dispatches on the file extension: `.ldmx` is binary, anything else CSV.
pub fn save_matrix<F: Scalar>(m: &Matrix<F>, path: &Path) -> Result<()> {
    if is_ldmx(path) {
        save_ldmx(m, path)
    } else {
        save_csv_matrix(m, path)
    }
}

pub fn load_matrix<F: Scalar>(path: &Path) -> Result<Matrix<F>> {
    if is_ldmx(path) {
        load_ldmx(path)
    } else {
        load_csv_matrix(path)
    }
}

fn is_ldmx(path: &Path) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case("ldmx"))
        .unwrap_or(false)
}
