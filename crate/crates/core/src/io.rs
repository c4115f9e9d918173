//! Matrix file formats.
//!
//! * CSV: headerless, one row per line, comma-separated, LF line ends. Values are
//!   written in shortest round-trip form, so write → read is value-exact.
//! * MAT1: magic `AWLS`, version byte `0x01`, rows and cols as little-endian
//!   `u64`, then `rows * cols` little-endian `f64` in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const MAT1_MAGIC: &[u8; 4] = b"AWLS";
pub const MAT1_VERSION: u8 = 0x01;
const MAT1_HEADER_LEN: usize = 4 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Mat1,
}

impl MatrixFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Mat1 => "mat1",
        }
    }
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "mat1" => Ok(MatrixFormat::Mat1),
            other => Err(Error::Parameter(format!("unknown matrix format {other:?}"))),
        }
    }
}

pub fn write_csv<W: Write>(m: &DenseMatrix, mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            // Debug formatting is the shortest round-trip form, switching to
            // exponent notation for very large or small magnitudes.
            line.push_str(&format!("{v:?}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn to_csv(m: &DenseMatrix) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(m, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn read_csv(bytes: &[u8]) -> Result<DenseMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format(e.valid_up_to() as u64, "CSV is not UTF-8"))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut offset = 0u64;
    for line in text.split('\n') {
        let line_start = offset;
        offset += line.len() as u64 + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let mut field_offset = line_start;
        let mut count = 0;
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::format(field_offset, format!("row {rows}: {:?} is not a number", field.trim()))
            })?;
            if !value.is_finite() {
                return Err(Error::format(field_offset, format!("row {rows}: non-finite value {value}")));
            }
            data.push(value);
            field_offset += field.len() as u64 + 1;
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::format(
                    line_start,
                    format!("row {rows} has {count} fields, expected {c}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(0, "CSV contains no rows"))?;
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn to_mat1(m: &DenseMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(MAT1_HEADER_LEN + 8 * m.len());
    buf.extend_from_slice(MAT1_MAGIC);
    buf.push(MAT1_VERSION);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn read_mat1(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 4 || &bytes[..4] != MAT1_MAGIC {
        return Err(Error::format(0, "missing AWLS magic"));
    }
    if bytes.len() < MAT1_HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated MAT1 header"));
    }
    if bytes[4] != MAT1_VERSION {
        return Err(Error::format(4, format!("unsupported MAT1 version {:#04x}", bytes[4])));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (read_u64(5), read_u64(13));
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::format(5, format!("MAT1 dimensions {rows}x{cols} overflow")))?;
    let payload = &bytes[MAT1_HEADER_LEN..];
    if payload.len() != count {
        return Err(Error::format(
            (MAT1_HEADER_LEN + payload.len().min(count)) as u64,
            format!("MAT1 payload has {} bytes, expected {count}", payload.len()),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format((MAT1_HEADER_LEN + 8 * pos) as u64, "non-finite value"));
    }
    DenseMatrix::from_vec(rows as usize, cols as usize, data)
}

/// Parses either format, sniffing the MAT1 magic.
pub fn read_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.starts_with(MAT1_MAGIC) {
        read_mat1(bytes)
    } else {
        read_csv(bytes)
    }
}

pub fn encode(m: &DenseMatrix, format: MatrixFormat) -> Vec<u8> {
    match format {
        MatrixFormat::Csv => to_csv(m),
        MatrixFormat::Mat1 => to_mat1(m),
    }
}

pub(crate) fn with_path(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(with_path(path))?;
    read_matrix(&bytes).map_err(|e| match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

pub fn save_matrix(m: &DenseMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    fs::write(path, encode(m, format)).map_err(with_path(path))?;
    Ok(())
}
