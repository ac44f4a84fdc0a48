//! Cubes, label rasters, sample manifests and feature tables on disk.

mod features;
mod header;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

pub use features::{feature_paths, load_features, save_features, FeatureMatrix, Stage};
pub use header::{parse_key_values, DataType, Interleave, RasterHeader};

use crate::error::{IapError, Result};
use crate::io_util::write_atomic;
use crate::numerics::plane::RealPlane;

/// `width × height × bands` reflectance cube held band-major: one contiguous
/// row-major plane per band.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperCube {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f64>,
    wavelengths: Option<Vec<f64>>,
}

impl HyperCube {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(IapError::dims(format!(
                "cube dimensions must be positive, got {width}x{height}x{bands}"
            )));
        }
        if data.len() != width * height * bands {
            return Err(IapError::dims(format!(
                "cube {width}x{height}x{bands} needs {} values, got {}",
                width * height * bands,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(IapError::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            bands,
            data,
            wavelengths: None,
        })
    }

    pub fn from_planes(planes: &[RealPlane]) -> Result<Self> {
        let Some(first) = planes.first() else {
            return Err(IapError::dims("no bands"));
        };
        let (w, h) = (first.width(), first.height());
        if planes.iter().any(|p| p.width() != w || p.height() != h) {
            return Err(IapError::dims("bands differ in size"));
        }
        let mut data = Vec::with_capacity(w * h * planes.len());
        for p in planes {
            data.extend_from_slice(p.data());
        }
        Self::new(w, h, planes.len(), data)
    }

    pub fn with_wavelengths(mut self, wl: Vec<f64>) -> Result<Self> {
        if wl.len() != self.bands {
            return Err(IapError::dims(format!(
                "{} wavelengths for {} bands",
                wl.len(),
                self.bands
            )));
        }
        self.wavelengths = Some(wl);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn band(&self, k: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn band_plane(&self, k: usize) -> RealPlane {
        RealPlane::new(self.width, self.height, self.band(k).to_vec()).expect("band shape")
    }

    pub fn planes(&self) -> Vec<RealPlane> {
        (0..self.bands).map(|k| self.band_plane(k)).collect()
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize, band: usize) -> f64 {
        self.data[band * self.pixels() + y * self.width + x]
    }

    /// Per-pixel spectra as an `N × D` table (original spectral features).
    pub fn spectra(&self) -> FeatureMatrix {
        let n = self.pixels();
        let d = self.bands;
        let mut values = vec![0.0; n * d];
        for k in 0..d {
            for (i, &v) in self.band(k).iter().enumerate() {
                values[i * d + k] = v;
            }
        }
        FeatureMatrix::new(n, d, values, Stage::Osf).expect("finite cube")
    }

    /// Applies `f` to every band plane; all outputs must share one shape.
    pub fn map_planes(&self, f: impl Fn(&RealPlane) -> Result<RealPlane>) -> Result<Self> {
        let planes = self.planes().iter().map(f).collect::<Result<Vec<_>>>()?;
        let mut cube = Self::from_planes(&planes)?;
        cube.wavelengths = self.wavelengths.clone();
        Ok(cube)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }

    /// Keeps the listed bands, in order.
    pub fn select_bands(&self, bands: &[usize]) -> Result<Self> {
        if let Some(&b) = bands.iter().find(|&&b| b >= self.bands) {
            return Err(IapError::invalid(format!("band {b} out of range")));
        }
        let mut data = Vec::with_capacity(bands.len() * self.pixels());
        for &b in bands {
            data.extend_from_slice(self.band(b));
        }
        Self::new(self.width, self.height, bands.len(), data)
    }
}

fn read_header(path: &Path) -> Result<RasterHeader> {
    let text = fs::read_to_string(path).map_err(|e| IapError::io(path, e))?;
    RasterHeader::parse(&text, path)
}

fn read_payload(header: &RasterHeader, raw_path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(raw_path).map_err(|e| IapError::io(raw_path, e))?;
    let expected = header.payload_len();
    if bytes.len() as u64 != expected {
        return Err(IapError::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let sz = header.data_type.size();
    let (w, h, d) = (header.samples, header.lines, header.bands);
    let n = w * h;
    let mut out = vec![0.0; n * d];
    for (idx, chunk) in bytes.chunks_exact(sz).enumerate() {
        let v = header.data_type.decode(chunk, header.big_endian);
        let (b, y, x) = match header.interleave {
            Interleave::Bsq => (idx / n, (idx % n) / w, idx % w),
            Interleave::Bil => {
                let y = idx / (d * w);
                let r = idx % (d * w);
                (r / w, y, r % w)
            }
            Interleave::Bip => {
                let p = idx / d;
                (idx % d, p / w, p % w)
            }
        };
        out[b * n + y * w + x] = v;
    }
    Ok(out)
}

/// Reads a cube in any interleave and returns it band-major. Floating-point
/// (32/64-bit) and unsigned 16-bit payloads are accepted.
pub fn load_cube(header_path: &Path, raw_path: &Path) -> Result<HyperCube> {
    let header = read_header(header_path)?;
    if !matches!(header.data_type, DataType::F32 | DataType::F64 | DataType::U16) {
        return Err(IapError::UnsupportedType(format!(
            "data_type {} for a reflectance cube",
            header.data_type.code()
        )));
    }
    let data = read_payload(&header, raw_path)?;
    let cube = HyperCube::new(header.samples, header.lines, header.bands, data)?;
    match header.wavelengths {
        Some(wl) => cube.with_wavelengths(wl),
        None => Ok(cube),
    }
}

pub fn save_cube(
    cube: &HyperCube,
    header_path: &Path,
    raw_path: &Path,
    data_type: DataType,
    interleave: Interleave,
) -> Result<()> {
    let header = RasterHeader {
        samples: cube.width,
        lines: cube.height,
        bands: cube.bands,
        interleave,
        data_type,
        big_endian: false,
        wavelengths: cube.wavelengths.clone(),
    };
    let (w, h, d) = (cube.width, cube.height, cube.bands);
    let mut bytes = Vec::with_capacity(w * h * d * data_type.size());
    match interleave {
        Interleave::Bsq => cube.data.iter().for_each(|&v| data_type.encode(v, &mut bytes)),
        Interleave::Bil => {
            for y in 0..h {
                for b in 0..d {
                    for x in 0..w {
                        data_type.encode(cube.value(x, y, b), &mut bytes);
                    }
                }
            }
        }
        Interleave::Bip => {
            for y in 0..h {
                for x in 0..w {
                    for b in 0..d {
                        data_type.encode(cube.value(x, y, b), &mut bytes);
                    }
                }
            }
        }
    }
    write_atomic(raw_path, &bytes)?;
    write_atomic(header_path, header.render().as_bytes())
}

/// Ground-truth raster: 0 is unlabeled, classes are `1..=C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    /// `source_ids[c - 1]` is the id class `c` carried in the source raster.
    source_ids: Vec<i64>,
}

impl LabelMap {
    /// Re-indexes arbitrary non-negative ids onto `1..=C` in ascending order.
    pub fn from_raw(width: usize, height: usize, raw: &[i64]) -> Result<Self> {
        if raw.len() != width * height {
            return Err(IapError::dims(format!(
                "label raster {width}x{height} needs {} values, got {}",
                width * height,
                raw.len()
            )));
        }
        if let Some(&neg) = raw.iter().find(|&&v| v < 0) {
            return Err(IapError::NegativeLabel(neg));
        }
        let ids: BTreeSet<i64> = raw.iter().copied().filter(|&v| v != 0).collect();
        let source_ids: Vec<i64> = ids.into_iter().collect();
        let index: BTreeMap<i64, u32> = source_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32 + 1))
            .collect();
        let labels = raw.iter().map(|v| if *v == 0 { 0 } else { index[v] }).collect();
        Ok(Self {
            width,
            height,
            labels,
            source_ids,
        })
    }

    /// Wraps labels that are already contiguous.
    pub fn from_classes(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        let raw: Vec<i64> = labels.iter().map(|&v| v as i64).collect();
        let map = Self::from_raw(width, height, &raw)?;
        if map.labels != labels {
            return Err(IapError::invalid("class ids are not contiguous 1..C"));
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.source_ids.len()
    }

    pub fn source_ids(&self) -> &[i64] {
        &self.source_ids
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }
}

pub fn load_labels(header_path: &Path, raw_path: &Path) -> Result<LabelMap> {
    let header = read_header(header_path)?;
    if header.bands != 1 {
        return Err(IapError::dims(format!(
            "label raster must have one band, found {}",
            header.bands
        )));
    }
    if matches!(header.data_type, DataType::F32 | DataType::F64) {
        return Err(IapError::UnsupportedType("floating-point label raster".into()));
    }
    let data = read_payload(&header, raw_path)?;
    let raw: Vec<i64> = data.iter().map(|&v| v as i64).collect();
    LabelMap::from_raw(header.samples, header.lines, &raw)
}

/// Writes contiguous labels as a single-band 32-bit integer raster.
pub fn save_labels(labels: &[u32], width: usize, height: usize, header_path: &Path, raw_path: &Path) -> Result<()> {
    if labels.len() != width * height {
        return Err(IapError::dims("label count does not match raster size"));
    }
    let header = RasterHeader {
        samples: width,
        lines: height,
        bands: 1,
        interleave: Interleave::Bsq,
        data_type: DataType::I32,
        big_endian: false,
        wavelengths: None,
    };
    let mut bytes = Vec::with_capacity(labels.len() * 4);
    for &l in labels {
        bytes.extend_from_slice(&(l as i32).to_le_bytes());
    }
    write_atomic(raw_path, &bytes)?;
    write_atomic(header_path, header.render().as_bytes())
}

/// Fixed train/test split: `(pixel index, class id)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleSet {
    pub train: Vec<(usize, u32)>,
    pub test: Vec<(usize, u32)>,
}

impl SampleSet {
    pub fn validate(&self, pixels: usize) -> Result<()> {
        let train: BTreeSet<usize> = self.train.iter().map(|s| s.0).collect();
        if train.len() != self.train.len() {
            return Err(IapError::invalid("duplicate pixel in training set"));
        }
        if let Some(s) = self.test.iter().find(|s| train.contains(&s.0)) {
            return Err(IapError::invalid(format!("pixel {} is in both train and test", s.0)));
        }
        if let Some(s) = self.train.iter().chain(&self.test).find(|s| s.0 >= pixels || s.1 == 0) {
            return Err(IapError::invalid(format!(
                "sample ({}, {}) is out of range or unlabeled",
                s.0, s.1
            )));
        }
        let train_classes: BTreeSet<u32> = self.train.iter().map(|s| s.1).collect();
        if let Some(s) = self.test.iter().find(|s| !train_classes.contains(&s.1)) {
            return Err(IapError::invalid(format!(
                "test class {} never appears in training",
                s.1
            )));
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# split pixel class\n");
        for (name, set) in [("train", &self.train), ("test", &self.test)] {
            for (p, c) in set {
                s.push_str(&format!("{name} {p} {c}\n"));
            }
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut out = SampleSet::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || IapError::Header {
                path: path.to_path_buf(),
                message: format!("line {}: expected `train|test <pixel> <class>`", i + 1),
            };
            let parts: Vec<&str> = line.split([' ', '\t', ',']).filter(|s| !s.is_empty()).collect();
            let [split, pixel, class] = parts[..] else {
                return Err(bad());
            };
            let pixel: usize = pixel.parse().map_err(|_| bad())?;
            let class: u32 = class.parse().map_err(|_| bad())?;
            match split {
                "train" => out.train.push((pixel, class)),
                "test" => out.test.push((pixel, class)),
                _ => return Err(bad()),
            }
        }
        Ok(out)
    }
}

pub fn load_samples(path: &Path) -> Result<SampleSet> {
    let text = fs::read_to_string(path).map_err(|e| IapError::io(path, e))?;
    SampleSet::parse(&text, path)
}

pub fn save_samples(samples: &SampleSet, path: &Path) -> Result<()> {
    write_atomic(path, samples.render().as_bytes())
}
