use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{IapError, Result};
use crate::io_util::write_atomic;

/// Which extraction stage produced a feature table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Osf,
    SifRcf,
    Sif,
    Fif,
    Iap,
    Reduced,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Osf => "OSF",
            Stage::SifRcf => "SIF-RCF",
            Stage::Sif => "SIF",
            Stage::Fif => "FIF",
            Stage::Iap => "IAP",
            Stage::Reduced => "REDUCED",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = IapError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "OSF" => Stage::Osf,
            "SIF-RCF" => Stage::SifRcf,
            "SIF" => Stage::Sif,
            "FIF" => Stage::Fif,
            "IAP" => Stage::Iap,
            "REDUCED" => Stage::Reduced,
            other => return Err(IapError::invalid(format!("unknown stage `{other}`"))),
        })
    }
}

/// Row-per-pixel feature table, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    stage: Stage,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, stage: Stage) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(IapError::dims(format!(
                "{rows}x{cols} feature matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(IapError::NonFinite(i));
        }
        Ok(Self {
            rows,
            cols,
            values,
            stage,
        })
    }

    /// Empty-width table; used for ablations that drop a block.
    pub fn empty(rows: usize, stage: Stage) -> Self {
        Self {
            rows,
            cols: 0,
            values: Vec::new(),
            stage,
        }
    }

    /// Builds a table from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>], stage: Stage) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(IapError::invalid("no columns"));
        };
        let rows = first.len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(IapError::dims("columns differ in length"));
        }
        let cols = columns.len();
        let mut values = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                values[i * cols + j] = v;
            }
        }
        Self::new(rows, cols, values, stage)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: indices.len(),
            cols: self.cols,
            values,
            stage: self.stage,
        }
    }

    /// Column-wise concatenation.
    pub fn hstack(blocks: &[&FeatureMatrix], stage: Stage) -> Result<FeatureMatrix> {
        let Some(first) = blocks.first() else {
            return Err(IapError::invalid("nothing to stack"));
        };
        let rows = first.rows;
        if let Some(b) = blocks.iter().find(|b| b.rows != rows) {
            return Err(IapError::dims(format!(
                "row mismatch while stacking: {} vs {}",
                rows, b.rows
            )));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for b in blocks {
                values.extend_from_slice(b.row(i));
            }
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            values,
            stage,
        })
    }

    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }
}

/// Paths for a persisted feature table: `<stem>.txt` sidecar and
/// `<stem>.f64` payload.
pub fn feature_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("txt"), stem.with_extension("f64"))
}

/// Writes the sidecar (`rows`, `cols`, `stage`, `config_hash`) and the raw
/// little-endian float64 payload.
pub fn save_features(stem: &Path, m: &FeatureMatrix, config_hash: &str) -> Result<()> {
    let (sidecar, payload) = feature_paths(stem);
    write_atomic(&payload, &m.payload_bytes())?;
    let text = format!(
        "rows = {}\ncols = {}\nstage = {}\nconfig_hash = {}\n",
        m.rows, m.cols, m.stage, config_hash
    );
    write_atomic(&sidecar, text.as_bytes())
}

/// Loads a feature table and the config hash it was written with.
pub fn load_features(stem: &Path) -> Result<(FeatureMatrix, String)> {
    let (sidecar, payload) = feature_paths(stem);
    let text = fs::read_to_string(&sidecar).map_err(|e| IapError::io(&sidecar, e))?;
    let fields = super::header::parse_key_values(&text, &sidecar)?;
    let get = |k: &str| {
        fields.get(k).ok_or_else(|| IapError::Header {
            path: sidecar.clone(),
            message: format!("missing `{k}`"),
        })
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| IapError::Header {
            path: sidecar.clone(),
            message: format!("`{k}` is not a count"),
        })
    };
    let rows = parse_usize("rows")?;
    let cols = parse_usize("cols")?;
    let stage: Stage = get("stage")?.parse()?;
    let hash = get("config_hash")?.clone();
    let bytes = fs::read(&payload).map_err(|e| IapError::io(&payload, e))?;
    let expected = (rows * cols * 8) as u64;
    if bytes.len() as u64 != expected {
        return Err(IapError::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let m = if cols == 0 {
        FeatureMatrix::empty(rows, stage)
    } else {
        FeatureMatrix::new(rows, cols, values, stage)?
    };
    Ok((m, hash))
}
