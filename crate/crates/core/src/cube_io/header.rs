//! Key/value raster headers in the style of common remote-sensing sidecars.
//!
//! ```text
//! ENVI
//! samples = 610
//! lines = 340
//! bands = 103
//! interleave = bsq
//! data_type = 4
//! byte_order = 0
//! wavelength = { 430.0, 434.0, ... }
//! ```
//!
//! Keys are case-insensitive and internal spaces fold to underscores, so
//! `data type` and `data_type` are the same key. Both `=` and `:` separate
//! keys from values. Brace-delimited values may span lines.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{IapError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interleave {
    Bsq,
    Bil,
    Bip,
}

impl FromStr for Interleave {
    type Err = IapError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bsq" => Ok(Interleave::Bsq),
            "bil" => Ok(Interleave::Bil),
            "bip" => Ok(Interleave::Bip),
            other => Err(IapError::invalid(format!("unknown interleave `{other}`"))),
        }
    }
}

impl fmt::Display for Interleave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        })
    }
}

/// Element types, numbered with the usual header codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    I32,
    F32,
    F64,
    U16,
}

impl DataType {
    pub fn code(&self) -> u32 {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::I32 => 3,
            DataType::F32 => 4,
            DataType::F64 => 5,
            DataType::U16 => 12,
        }
    }

    pub fn from_code(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "uint8" | "u8" => Ok(DataType::U8),
            "2" | "int16" | "i16" => Ok(DataType::I16),
            "3" | "int32" | "i32" => Ok(DataType::I32),
            "4" | "float32" | "f32" => Ok(DataType::F32),
            "5" | "float64" | "f64" => Ok(DataType::F64),
            "12" | "uint16" | "u16" => Ok(DataType::U16),
            other => Err(IapError::UnsupportedType(other.to_string())),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::I32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }

    pub(crate) fn decode(&self, bytes: &[u8], big_endian: bool) -> f64 {
        macro_rules! rd {
            ($t:ty) => {{
                let arr = bytes.try_into().unwrap();
                if big_endian {
                    <$t>::from_be_bytes(arr) as f64
                } else {
                    <$t>::from_le_bytes(arr) as f64
                }
            }};
        }
        match self {
            DataType::U8 => bytes[0] as f64,
            DataType::I16 => rd!(i16),
            DataType::I32 => rd!(i32),
            DataType::F32 => rd!(f32),
            DataType::F64 => rd!(f64),
            DataType::U16 => rd!(u16),
        }
    }

    /// Little-endian encoding; integer types round to nearest and saturate.
    pub(crate) fn encode(&self, v: f64, out: &mut Vec<u8>) {
        match self {
            DataType::U8 => out.push(v.round() as u8),
            DataType::I16 => out.extend_from_slice(&(v.round() as i16).to_le_bytes()),
            DataType::I32 => out.extend_from_slice(&(v.round() as i32).to_le_bytes()),
            DataType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            DataType::F64 => out.extend_from_slice(&v.to_le_bytes()),
            DataType::U16 => out.extend_from_slice(&(v.round() as u16).to_le_bytes()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RasterHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub interleave: Interleave,
    pub data_type: DataType,
    pub big_endian: bool,
    pub wavelengths: Option<Vec<f64>>,
}

impl RasterHeader {
    pub fn payload_len(&self) -> u64 {
        (self.samples * self.lines * self.bands * self.data_type.size()) as u64
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = parse_key_values(text, path)?;
        let err = |message: String| IapError::Header {
            path: path.to_path_buf(),
            message,
        };
        let count = |key: &str| -> Result<usize> {
            let raw = kv.get(key).ok_or_else(|| err(format!("missing `{key}`")))?;
            let n: usize = raw
                .parse()
                .map_err(|_| err(format!("`{key}` = `{raw}` is not a count")))?;
            if n == 0 {
                return Err(err(format!("`{key}` must be positive")));
            }
            Ok(n)
        };
        let samples = count("samples")?;
        let lines = count("lines")?;
        let bands = match kv.get("bands") {
            Some(_) => count("bands")?,
            None => 1,
        };
        let interleave = kv
            .get("interleave")
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(Interleave::Bsq);
        let data_type = DataType::from_code(kv.get("data_type").ok_or_else(|| err("missing `data_type`".into()))?)?;
        let big_endian = match kv.get("byte_order").map(|s| s.trim()) {
            None | Some("0") => false,
            Some("1") => true,
            Some(other) => return Err(err(format!("bad byte_order `{other}`"))),
        };
        let wavelengths = match kv.get("wavelength") {
            None => None,
            Some(raw) => {
                let vals: std::result::Result<Vec<f64>, _> = raw
                    .trim_matches(|c| c == '{' || c == '}')
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect();
                let vals = vals.map_err(|_| err("unparseable wavelength list".into()))?;
                if vals.len() != bands {
                    return Err(err(format!("{} wavelengths for {bands} bands", vals.len())));
                }
                Some(vals)
            }
        };
        Ok(Self {
            samples,
            lines,
            bands,
            interleave,
            data_type,
            big_endian,
            wavelengths,
        })
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "ENVI\nsamples = {}\nlines = {}\nbands = {}\ninterleave = {}\ndata_type = {}\nbyte_order = {}\n",
            self.samples,
            self.lines,
            self.bands,
            self.interleave,
            self.data_type.code(),
            u8::from(self.big_endian)
        );
        if let Some(w) = &self.wavelengths {
            let list: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("wavelength = {{ {} }}\n", list.join(", ")));
        }
        s
    }
}

fn normalize_key(k: &str) -> String {
    k.split_whitespace().collect::<Vec<_>>().join("_").to_ascii_lowercase()
}

/// Parses `key = value` / `key: value` lines into a map.
pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    while let Some((lineno, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.eq_ignore_ascii_case("envi") {
            continue;
        }
        let split = line.find(['=', ':']).ok_or_else(|| IapError::Header {
            path: path.to_path_buf(),
            message: format!("line {}: expected `key = value`", lineno + 1),
        })?;
        let key = normalize_key(&line[..split]);
        let mut value = line[split + 1..].trim().to_string();
        if value.starts_with('{') {
            while !value.contains('}') {
                let Some((_, more)) = lines.next() else {
                    return Err(IapError::Header {
                        path: path.to_path_buf(),
                        message: format!("line {}: unterminated `{{`", lineno + 1),
                    });
                };
                value.push(' ');
                value.push_str(more.trim());
            }
        }
        out.insert(key, value);
    }
    Ok(out)
}
