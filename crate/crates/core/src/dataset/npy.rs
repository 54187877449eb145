//! NPY v1.0 reader/writer for little-endian, C-order float arrays.
//!
//! Layout: magic `\x93NUMPY`, version bytes `1 0`, a little-endian `u16`
//! header length, an ASCII Python-dict header padded with spaces and a
//! trailing newline so the data starts on a 64-byte boundary, then the raw
//! array data.

use std::fs;
use std::path::Path;

use super::{numbered_classes, GestureDataset, GestureSample, FEATURES, FRAMES};
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

impl NpyArray {
    pub fn len(&self) -> usize {
        match &self.data {
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            NpyData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            NpyData::F64(v) => v.clone(),
        }
    }
}

fn format_err(field: &'static str, msg: impl Into<String>) -> Error {
    Error::Format {
        field,
        msg: msg.into(),
    }
}

/// Value text following `'key':` in the header dict.
fn header_value<'a>(header: &'a str, key: &'static str) -> Result<&'a str> {
    let pat = format!("'{key}':");
    let start = header
        .find(&pat)
        .ok_or_else(|| format_err(key, "missing from header"))?;
    Ok(header[start + pat.len()..].trim_start())
}

fn parse_header(header: &str) -> Result<(String, bool, Vec<usize>)> {
    let header = header.trim();
    if !header.starts_with('{') || !header.ends_with('}') {
        return Err(format_err("header", format!("not a dict literal: {header}")));
    }

    let descr = header_value(header, "descr")?;
    let quote = descr
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| format_err("descr", "expected a quoted dtype string"))?;
    let end = descr[1..]
        .find(quote)
        .ok_or_else(|| format_err("descr", "unterminated dtype string"))?;
    let descr = descr[1..1 + end].to_string();

    let fortran = header_value(header, "fortran_order")?;
    let fortran = if fortran.starts_with("False") {
        false
    } else if fortran.starts_with("True") {
        true
    } else {
        return Err(format_err("fortran_order", "expected True or False"));
    };

    let shape = header_value(header, "shape")?;
    if !shape.starts_with('(') {
        return Err(format_err("shape", "expected a tuple"));
    }
    let close = shape
        .find(')')
        .ok_or_else(|| format_err("shape", "unterminated tuple"))?;
    let dims = shape[1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| format_err("shape", format!("bad dimension `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((descr, fortran, dims))
}

/// Parses an NPY v1.0 byte buffer holding `<f4` or `<f8` data in C order.
pub fn parse_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(format_err("magic", "missing \\x93NUMPY prefix"));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(format_err(
            "version",
            format!("unsupported version {}.{}, only 1.0", bytes[6], bytes[7]),
        ));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = 10 + header_len;
    if bytes.len() < data_start {
        return Err(format_err("header", "truncated header"));
    }
    let header = std::str::from_utf8(&bytes[10..data_start])
        .map_err(|_| format_err("header", "header is not ASCII"))?;
    let (descr, fortran, shape) = parse_header(header)?;
    if fortran {
        return Err(format_err("fortran_order", "Fortran-ordered arrays are not supported"));
    }
    let width = match descr.as_str() {
        "<f4" => 4,
        "<f8" => 8,
        other => {
            return Err(format_err(
                "descr",
                format!("unsupported dtype `{other}`, expected '<f4' or '<f8'"),
            ))
        }
    };
    let count: usize = shape.iter().product();
    let payload = &bytes[data_start..];
    if payload.len() != count * width {
        return Err(format_err(
            "shape",
            format!(
                "shape {shape:?} needs {} data bytes, file has {}",
                count * width,
                payload.len()
            ),
        ));
    }
    let data = if width == 4 {
        NpyData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    } else {
        NpyData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    };
    Ok(NpyArray { shape, data })
}

/// Serializes `values` with `shape` as a `<f4` C-order NPY v1.0 buffer.
pub fn encode_npy_f32(shape: &[usize], values: &[f32]) -> Vec<u8> {
    assert_eq!(shape.iter().product::<usize>(), values.len());
    let dims = match shape {
        [single] => format!("({single},)"),
        _ => format!(
            "({})",
            shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = 10 + header.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.push_str(&" ".repeat(padding));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Interprets a `(n, 20, 63)` or `(20, 63)` array as gesture samples with one label.
pub fn read_npy_samples(bytes: &[u8], label: usize) -> Result<Vec<GestureSample>> {
    let arr = parse_npy(bytes)?;
    let n = match arr.shape.as_slice() {
        [FRAMES, FEATURES] => 1,
        [n, FRAMES, FEATURES] => *n,
        other => {
            return Err(format_err(
                "shape",
                format!("expected (n, {FRAMES}, {FEATURES}) or ({FRAMES}, {FEATURES}), got {other:?}"),
            ))
        }
    };
    let values = arr.to_f64();
    values
        .chunks_exact(FRAMES * FEATURES)
        .take(n)
        .map(|chunk| GestureSample::from_flat(chunk.to_vec(), label))
        .collect()
}

/// Loads an NPY file of gestures, all tagged with `label`.
pub fn import_npy(path: &Path, label: usize, num_classes: usize) -> Result<GestureDataset> {
    if label >= num_classes {
        return Err(Error::Config(format!(
            "label {label} outside the {num_classes}-class table"
        )));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let samples = read_npy_samples(&bytes, label)?;
    GestureDataset::new(samples, numbered_classes(num_classes))
}

/// Samples as a `(n, 20, 63)` float32 array; values are rounded to `f32`.
pub fn write_npy_samples(samples: &[GestureSample]) -> Vec<u8> {
    let values: Vec<f32> = samples
        .iter()
        .flat_map(|s| s.values().iter().map(|&v| v as f32))
        .collect();
    encode_npy_f32(&[samples.len(), FRAMES, FEATURES], &values)
}

pub fn export_npy(samples: &[GestureSample], path: &Path) -> Result<()> {
    fs::write(path, write_npy_samples(samples)).map_err(|e| Error::io(path, e))
}
