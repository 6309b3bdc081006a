//! Minimal reader/writer for 2-D NumPy `.npy` arrays.
//!
//! Reads little- and big-endian integer, float and bool dtypes in C or Fortran order; writes
//! C-ordered `<f8` and `|u1`.

use std::io::Write;
use std::path::Path;

use super::Plane;
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"\x93NUMPY";

fn invalid(path: &Path, reason: impl Into<String>) -> Error {
    Error::InvalidRaster {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

struct Header {
    descr: String,
    fortran: bool,
    shape: Vec<usize>,
}

fn dict_value<'a>(dict: &'a str, key: &str) -> Option<&'a str> {
    let pat = format!("'{key}'");
    let start = dict.find(&pat)? + pat.len();
    let rest = dict[start..].trim_start().strip_prefix(':')?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else if let Some(stripped) = rest.strip_prefix('\'') {
        stripped.find('\'')? + 2
    } else {
        rest.find([',', '}']).unwrap_or(rest.len())
    };
    Some(rest[..end].trim())
}

fn parse_header(path: &Path, text: &str) -> Result<Header> {
    let descr = dict_value(text, "descr")
        .and_then(|d| d.strip_prefix('\'')?.strip_suffix('\''))
        .ok_or_else(|| invalid(path, "npy header lacks 'descr'"))?
        .to_string();
    let fortran = match dict_value(text, "fortran_order") {
        Some("True") => true,
        Some("False") => false,
        _ => return Err(invalid(path, "npy header lacks 'fortran_order'")),
    };
    let shape_str = dict_value(text, "shape")
        .and_then(|s| s.strip_prefix('(')?.strip_suffix(')'))
        .ok_or_else(|| invalid(path, "npy header lacks 'shape'"))?;
    let shape = shape_str
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| invalid(path, format!("bad npy shape {shape_str:?}: {e}")))?;
    Ok(Header { descr, fortran, shape })
}

fn decode<const N: usize>(bytes: &[u8], big: bool, f: impl Fn([u8; N]) -> f64) -> Vec<f64> {
    bytes
        .chunks_exact(N)
        .map(|c| {
            let mut a: [u8; N] = c.try_into().expect("chunk size");
            if big {
                a.reverse();
            }
            f(a)
        })
        .collect()
}

/// Reads a 2-D array as `f64` values.
pub fn read_npy(path: &Path) -> Result<Plane<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(invalid(path, "not an npy file"));
    }
    let major = bytes[6];
    let (header_len, offset) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(invalid(path, "truncated npy header"));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => return Err(invalid(path, format!("unsupported npy version {v}"))),
    };
    let data_start = offset + header_len;
    if bytes.len() < data_start {
        return Err(invalid(path, "truncated npy header"));
    }
    let text = std::str::from_utf8(&bytes[offset..data_start]).map_err(|_| invalid(path, "npy header is not utf-8"))?;
    let header = parse_header(path, text)?;
    let (height, width) = match header.shape.as_slice() {
        [h, w] => (*h, *w),
        other => return Err(invalid(path, format!("expected a 2-D array, got shape {other:?}"))),
    };
    let descr = header.descr.as_str();
    let (big, kind) = match descr.as_bytes().first() {
        Some(b'>') => (true, &descr[1..]),
        Some(b'<') | Some(b'|') | Some(b'=') => (false, &descr[1..]),
        _ => (false, descr),
    };
    let data = &bytes[data_start..];
    let values = match kind {
        "f8" => decode::<8>(data, big, f64::from_le_bytes),
        "f4" => decode::<4>(data, big, |a| f32::from_le_bytes(a) as f64),
        "u1" | "b1" => data.iter().map(|&b| b as f64).collect(),
        "i1" => data.iter().map(|&b| b as i8 as f64).collect(),
        "u2" => decode::<2>(data, big, |a| u16::from_le_bytes(a) as f64),
        "i2" => decode::<2>(data, big, |a| i16::from_le_bytes(a) as f64),
        "u4" => decode::<4>(data, big, |a| u32::from_le_bytes(a) as f64),
        "i4" => decode::<4>(data, big, |a| i32::from_le_bytes(a) as f64),
        "u8" => decode::<8>(data, big, |a| u64::from_le_bytes(a) as f64),
        "i8" => decode::<8>(data, big, |a| i64::from_le_bytes(a) as f64),
        _ => return Err(invalid(path, format!("unsupported npy dtype {descr:?}"))),
    };
    if values.len() < width * height {
        return Err(invalid(
            path,
            format!("npy data holds {} values, shape needs {}", values.len(), width * height),
        ));
    }
    let mut values = values;
    values.truncate(width * height);
    if header.fortran {
        let col_major = values;
        values = (0..height * width)
            .map(|i| col_major[(i % width) * height + i / width])
            .collect();
    }
    Plane::from_vec(width, height, values)
}

fn write_with(path: &Path, descr: &str, width: usize, height: usize, body: &[u8]) -> Result<()> {
    let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': ({height}, {width}), }}");
    // magic(6) + version(2) + len(2) + header + '\n' padded to a multiple of 64
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(10 + header.len() + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(body);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn write_npy_f64(path: &Path, plane: &Plane<f64>) -> Result<()> {
    let body: Vec<u8> = plane.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_with(path, "<f8", plane.width(), plane.height(), &body)
}

pub fn write_npy_u8(path: &Path, plane: &Plane<u8>) -> Result<()> {
    write_with(path, "|u1", plane.width(), plane.height(), plane.as_slice())
}
