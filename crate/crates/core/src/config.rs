//! Pipeline configuration: a TOML document with the sections `data` or
//! `scene`, `iap`, `slic`, `forest`, `run` and optionally `sweep`.
//!
//! ```toml
//! [data]
//! header = "pavia.hdr"
//! raw = "pavia.raw"
//! samples = "pavia_samples.txt"
//!
//! [iap]
//! groups = 5
//! radii = [2, 4, 6]
//! orders = [0, 1, 2, 3]
//! reduced_dim = 30
//!
//! [run]
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::ForestParams;
use crate::cube_io::synth::SceneSpec;
use crate::error::{IapError, Result};
use crate::pipeline::SweepGrid;
use crate::profile::{IapConfig, SlicConfig};

/// Cube on disk plus optional ground truth and train/test manifest. Relative
/// paths are resolved against the directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub header: PathBuf,
    pub raw: PathBuf,
    #[serde(default)]
    pub labels_header: Option<PathBuf>,
    #[serde(default)]
    pub labels_raw: Option<PathBuf>,
    #[serde(default)]
    pub samples: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stage draws from a named substream of it.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: Option<DataConfig>,
    pub scene: Option<SceneSpec>,
    pub iap: IapConfig,
    pub slic: SlicConfig,
    pub forest: ForestParams,
    pub run: RunConfig,
    /// Parameter grid for `sweep`.
    pub sweep: Option<SweepGrid>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, for pointing validation errors at
/// the offending entry.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        if current == section && k.trim() == key {
            return Some(i + 1);
        }
    }
    None
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| IapError::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate_with(text)?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving data paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IapError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            IapError::Config { line, message } => IapError::Config {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        if let (Some(data), Some(dir)) = (cfg.data.as_mut(), path.parent()) {
            data.resolve(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with("")
    }

    fn validate_with(&self, text: &str) -> Result<()> {
        let err = |section: &str, key: &str, e: IapError| IapError::Config {
            line: locate(text, section, key),
            message: match e {
                IapError::InvalidParameter(m) => format!("[{section}] {key}: {m}"),
                other => format!("[{section}] {key}: {other}"),
            },
        };
        match (&self.data, &self.scene) {
            (Some(_), Some(_)) => {
                return Err(IapError::Config {
                    line: locate(text, "scene", "width"),
                    message: "give either [data] or [scene], not both".into(),
                })
            }
            (None, None) => {
                return Err(IapError::Config {
                    line: None,
                    message: "a [data] or [scene] section is required".into(),
                })
            }
            _ => {}
        }
        if let Some(scene) = &self.scene {
            scene.validate().map_err(|e| err("scene", "width", e))?;
        }
        if self.iap.groups == 0 {
            return Err(err("iap", "groups", IapError::invalid("must be >= 1")));
        }
        if self.iap.reduced_dim == 0 {
            return Err(err("iap", "reduced_dim", IapError::invalid("must be >= 1")));
        }
        if self.iap.ring_width.is_some_and(|w| w.is_nan() || w < 1.0) {
            return Err(err("iap", "ring_width", IapError::invalid("must be >= 1")));
        }
        if self.iap.radii.is_empty() || self.iap.radii.contains(&0) {
            return Err(err(
                "iap",
                "radii",
                IapError::invalid("must be a non-empty list of positive integers"),
            ));
        }
        self.iap.validate().map_err(|e| err("iap", "orders", e))?;
        if self.slic.segments == Some(0) {
            return Err(err("slic", "segments", IapError::invalid("must be >= 1")));
        }
        if self.slic.compactness.is_nan() || self.slic.compactness <= 0.0 {
            return Err(err("slic", "compactness", IapError::invalid("must be positive")));
        }
        if self.forest.trees == 0 {
            return Err(err("forest", "trees", IapError::invalid("must be >= 1")));
        }
        if self.forest.min_leaf == 0 {
            return Err(err("forest", "min_leaf", IapError::invalid("must be >= 1")));
        }
        if self.forest.max_features == Some(0) {
            return Err(err("forest", "max_features", IapError::invalid("must be >= 1")));
        }
        if self.run.threads == Some(0) {
            return Err(err("run", "threads", IapError::invalid("must be >= 1")));
        }
        Ok(())
    }

    /// SHA-256 over the parsed configuration, so formatting, comments and
    /// spelled-out defaults do not change it. The output directory, thread
    /// count and sweep grid do not affect extracted features and are left out.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.run.out = None;
        canon.run.threads = None;
        canon.sweep = None;
        let value = toml::Value::try_from(&canon).expect("config is representable as TOML");
        let text = toml::to_string(&value).expect("TOML value serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }

    /// Seed of the named random substream.
    pub fn substream(&self, name: &str) -> u64 {
        substream_seed(self.run.seed, name)
    }
}

impl DataConfig {
    fn resolve(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.header);
        fix(&mut self.raw);
        for p in [&mut self.labels_header, &mut self.labels_raw, &mut self.samples]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Independent seed for one named consumer of randomness (`grouping`,
/// `slic`, `forest`, `synth`), derived from the master seed.
pub fn substream_seed(master: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
