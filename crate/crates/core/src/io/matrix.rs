use std::path::Path;

use super::{checksum, corrupt, fmt_f64, io_err, read_all, write_atomic, IoError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub(crate) const MATRIX_MAGIC: &[u8; 4] = b"FNMX";
const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 8 + 8;

pub(crate) fn encode_matrix<T: Scalar>(m: &Matrix<T>) -> Result<Vec<u8>, IoError> {
    let mut buf = Vec::with_capacity(HEADER + 8 * m.as_slice().len() + 8);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for (i, v) in m.as_slice().iter().enumerate() {
        let v = v.as_f64();
        if !v.is_finite() {
            return Err(IoError::NonFinite(i));
        }
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let sum = checksum(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    Ok(buf)
}

pub(crate) fn decode_matrix<T: Scalar>(path: &Path, bytes: &[u8]) -> Result<Matrix<T>, IoError> {
    if bytes.len() < HEADER + 8 {
        return Err(corrupt(path, format!("truncated: {} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MATRIX_MAGIC {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: "bad magic, not a matrix file".into(),
        });
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let (rows, cols) = (u64_at(8) as usize, u64_at(16) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|p| p.checked_add(HEADER + 8))
        .ok_or_else(|| corrupt(path, "shape overflows"))?;
    if bytes.len() != expected {
        return Err(corrupt(path, format!("expected {expected} bytes for {rows}x{cols}, found {}", bytes.len())));
    }
    let body = &bytes[..expected - 8];
    if checksum(body) != u64_at(expected - 8) {
        return Err(corrupt(path, "checksum mismatch"));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for k in 0..rows * cols {
        let v = f64::from_le_bytes(body[HEADER + 8 * k..HEADER + 8 * k + 8].try_into().unwrap());
        if !v.is_finite() {
            return Err(corrupt(path, format!("non-finite value at index {k}")));
        }
        data.push(T::lit(v));
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

/// Saves a matrix in the checksummed binary format.
pub fn save_matrix<T: Scalar>(m: &Matrix<T>, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_matrix(m)?)
}

/// Loads a binary matrix, verifying its length and checksum.
pub fn load_matrix<T: Scalar>(path: &Path) -> Result<Matrix<T>, IoError> {
    decode_matrix(path, &read_all(path)?)
}

/// CSV export: header `c0,c1,…`, one line per row.
pub fn save_matrix_csv<T: Scalar>(m: &Matrix<T>, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&(0..m.cols()).map(|j| format!("c{j}")).collect::<Vec<_>>().join(","));
    out.push('\n');
    for i in 0..m.rows() {
        out.push_str(&m.row(i).iter().map(|v| fmt_f64(v.as_f64())).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// CSV import of a header-row numeric table.
pub fn load_matrix_csv<T: Scalar>(path: &Path) -> Result<Matrix<T>, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let cols = reader.headers().map_err(|e| csv_error(path, e))?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let offset = record.position().map_or(0, |p| p.byte());
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| IoError::Format {
                path: path.to_path_buf(),
                offset,
                message: format!("not a number: {field:?}"),
            })?;
            data.push(T::lit(v));
        }
        rows += 1;
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> IoError {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path)(source),
        kind => IoError::Format { path: path.to_path_buf(), offset, message: format!("{kind:?}") },
    }
}
