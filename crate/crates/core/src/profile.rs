//! Invariant attribute profiles: the spectra, the SIFs and the FIFs stacked
//! side by side (each block standardized on its own), then reduced by PCA.

use serde::{Deserialize, Serialize};

use crate::cube_io::{FeatureMatrix, HyperCube, Stage};
use crate::error::{IapError, Result};
use crate::fif::{default_ring_width, extract_fif, FifColumn, FifLayout, FifPart};
use crate::grouping::{group_bands, BandGrouping};
use crate::numerics::pca::{pca_fit, pca_fit_of, PcaModel};
use crate::numerics::standardize::{column_stats, ColumnStats};
use crate::sif::{extract_sif, SlicParams, SuperpixelMap, DEFAULT_COMPACTNESS};

/// Extraction parameters. Defaults: 5 groups, radii `[2, 4, 6]`, orders
/// `0..4`, 30 reduced dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IapConfig {
    pub groups: usize,
    pub radii: Vec<usize>,
    pub orders: Vec<i32>,
    /// Ring width of the angular kernels; the radius spacing when unset.
    pub ring_width: Option<f64>,
    pub reduced_dim: usize,
}

impl Default for IapConfig {
    fn default() -> Self {
        Self {
            groups: 5,
            radii: vec![2, 4, 6],
            orders: vec![0, 1, 2, 3],
            ring_width: None,
            reduced_dim: 30,
        }
    }
}

impl IapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return Err(IapError::invalid("groups must be >= 1"));
        }
        if self.orders.iter().enumerate().any(|(i, &m)| m != i as i32) {
            return Err(IapError::invalid(format!(
                "orders must be consecutive from 0, got {:?}",
                self.orders
            )));
        }
        if self.reduced_dim == 0 {
            return Err(IapError::invalid("reduced_dim must be >= 1"));
        }
        self.layout().map(|_| ())
    }

    pub fn layout(&self) -> Result<FifLayout> {
        let width = self.ring_width.unwrap_or_else(|| default_ring_width(&self.radii));
        FifLayout::new(self.orders.len(), self.radii.clone(), width)
    }

    /// SIF, FIF and stacked widths for a cube with `bands` bands.
    pub fn widths(&self, bands: usize) -> Result<BlockWidths> {
        let fif = self.layout()?.width(self.groups);
        Ok(BlockWidths {
            osf: bands,
            sif: bands,
            fif,
        })
    }
}

/// Superpixel settings; segment count defaults to one per 256 pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlicConfig {
    pub segments: Option<usize>,
    pub compactness: f64,
    pub max_iter: usize,
}

impl Default for SlicConfig {
    fn default() -> Self {
        Self {
            segments: None,
            compactness: DEFAULT_COMPACTNESS,
            max_iter: 10,
        }
    }
}

impl SlicConfig {
    pub fn params(&self, width: usize, height: usize) -> SlicParams {
        let mut p = SlicParams::for_scene(width, height);
        if let Some(k) = self.segments {
            p.segments = k.min(width * height);
        }
        p.compactness = self.compactness;
        p.max_iter = self.max_iter;
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockWidths {
    pub osf: usize,
    pub sif: usize,
    pub fif: usize,
}

impl BlockWidths {
    pub fn stacked(&self) -> usize {
        self.osf + self.sif + self.fif
    }
}

/// What column `j` of an IAP matrix holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IapColumn {
    Osf { band: usize },
    Sif { band: usize },
    Fif(FifColumn),
}

/// Every IAP column in storage order.
pub fn column_map(bands: usize, n_groups: usize, layout: &FifLayout) -> Vec<IapColumn> {
    (0..bands)
        .map(|band| IapColumn::Osf { band })
        .chain((0..bands).map(|band| IapColumn::Sif { band }))
        .chain(layout.columns(n_groups).into_iter().map(IapColumn::Fif))
        .collect()
}

/// Direct lookup of a single column; `None` past the end.
pub fn iap_column(j: usize, bands: usize, n_groups: usize, layout: &FifLayout) -> Option<IapColumn> {
    if j < bands {
        return Some(IapColumn::Osf { band: j });
    }
    if j < 2 * bands {
        return Some(IapColumn::Sif { band: j - bands });
    }
    let q = j - 2 * bands;
    if q >= layout.width(n_groups) {
        return None;
    }
    let k = layout.orders().len();
    let group = q / layout.group_width();
    let rem = q % layout.group_width();
    let scale = rem / layout.per_scale_width();
    let p = rem % layout.per_scale_width();
    let (part, order) = if p < k {
        (FifPart::Magnitude, p as i32)
    } else if p < 2 * k {
        (FifPart::Absolute, (p - k) as i32)
    } else {
        (FifPart::Relative, layout.coupling_orders().0)
    };
    Some(IapColumn::Fif(FifColumn {
        group,
        scale,
        part,
        order,
    }))
}

/// `[OSF | SIF | FIF]`, each block standardized on its own. Empty blocks are
/// allowed (ablations).
pub fn assemble_iap(osf: &FeatureMatrix, sif: &FeatureMatrix, fif: &FeatureMatrix) -> Result<FeatureMatrix> {
    stack_standardized(&[osf, sif, fif])
}

/// Column-wise stack of independently standardized blocks, tagged IAP.
pub fn stack_standardized(blocks: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
    let Some(first) = blocks.first() else {
        return Err(IapError::invalid("nothing to stack"));
    };
    let rows = first.rows();
    if let Some(b) = blocks.iter().find(|b| b.rows() != rows) {
        return Err(IapError::dims(format!(
            "row mismatch while stacking: {rows} vs {}",
            b.rows()
        )));
    }
    let cols: usize = blocks.iter().map(|b| b.cols()).sum();
    let mut values = vec![0.0; rows * cols];
    let mut offset = 0;
    for b in blocks {
        if b.cols() == 0 {
            continue;
        }
        let stats = column_stats(b)?;
        for i in 0..rows {
            let dst = &mut values[i * cols + offset..i * cols + offset + b.cols()];
            for (j, (d, &v)) in dst.iter_mut().zip(b.row(i)).enumerate() {
                *d = stats.apply(j, v);
            }
        }
        offset += b.cols();
    }
    FeatureMatrix::new(rows, cols, values, Stage::Iap)
}

/// PCA over all rows down to `d` columns.
pub fn reduce(iap: &FeatureMatrix, d: usize) -> Result<(FeatureMatrix, PcaModel)> {
    if d == 0 || d > iap.cols() {
        return Err(IapError::invalid(format!(
            "reduced dimension {d} must lie in 1..={}",
            iap.cols()
        )));
    }
    let model = pca_fit(iap, d)?;
    let reduced = model.transform(iap)?;
    Ok((reduced, model))
}

/// Same result as [`stack_standardized`] followed by [`reduce`], without
/// holding the stacked matrix in memory.
pub fn reduce_stacked(blocks: &[&FeatureMatrix], d: usize) -> Result<(FeatureMatrix, PcaModel)> {
    let Some(first) = blocks.first() else {
        return Err(IapError::invalid("nothing to stack"));
    };
    let rows = first.rows();
    if let Some(b) = blocks.iter().find(|b| b.rows() != rows) {
        return Err(IapError::dims(format!(
            "row mismatch while stacking: {rows} vs {}",
            b.rows()
        )));
    }
    let cols: usize = blocks.iter().map(|b| b.cols()).sum();
    if d == 0 || d > cols {
        return Err(IapError::invalid(format!(
            "reduced dimension {d} must lie in 1..={cols}"
        )));
    }
    let parts: Vec<(&FeatureMatrix, ColumnStats)> = blocks
        .iter()
        .filter(|b| b.cols() > 0)
        .map(|b| Ok((*b, column_stats(b)?)))
        .collect::<Result<_>>()?;
    let row = |i: usize, out: &mut [f64]| {
        let mut offset = 0;
        for (b, stats) in &parts {
            for (j, (d, &v)) in out[offset..offset + b.cols()].iter_mut().zip(b.row(i)).enumerate() {
                *d = stats.apply(j, v);
            }
            offset += b.cols();
        }
    };
    let model = pca_fit_of(rows, cols, row, d)?;
    let reduced = model.transform_of(rows, row);
    Ok((reduced, model))
}

/// Intermediate products of one extraction run.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub grouping: BandGrouping,
    pub superpixels: SuperpixelMap,
    pub osf: FeatureMatrix,
    pub sif: FeatureMatrix,
    pub fif: FeatureMatrix,
}

/// Groups the bands (seeded), then computes the three feature blocks.
pub fn extract_blocks(cube: &HyperCube, cfg: &IapConfig, slic: &SlicConfig, grouping_seed: u64) -> Result<Extraction> {
    cfg.validate()?;
    if cfg.groups > cube.bands() {
        return Err(IapError::invalid(format!(
            "{} groups requested for {} bands",
            cfg.groups,
            cube.bands()
        )));
    }
    let layout = cfg.layout()?;
    let grouping = group_bands(cube, cfg.groups, grouping_seed)?;
    let (sif, superpixels) = extract_sif(cube, &cfg.radii, &slic.params(cube.width(), cube.height()))?;
    let fif = extract_fif(cube, &grouping, &layout)?;
    Ok(Extraction {
        grouping,
        superpixels,
        osf: cube.spectra(),
        sif,
        fif,
    })
}

/// Extraction through to the reduced matrix, keeping only what later stages need.
pub fn extract_reduced(
    cube: &HyperCube,
    cfg: &IapConfig,
    slic: &SlicConfig,
    grouping_seed: u64,
) -> Result<(FeatureMatrix, PcaModel)> {
    let ex = extract_blocks(cube, cfg, slic, grouping_seed)?;
    let width = ex.osf.cols() + ex.sif.cols() + ex.fif.cols();
    reduce_stacked(&[&ex.osf, &ex.sif, &ex.fif], cfg.reduced_dim.min(width))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random(rows: usize, cols: usize, seed: u64, stage: Stage) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-3.0..5.0)).collect(),
            stage,
        )
        .unwrap()
    }

    #[test]
    fn published_stacked_widths() {
        for (bands, groups, k, stacked) in [(103, 5, 4, 341), (144, 4, 4, 396), (50, 4, 3, 184)] {
            let cfg = IapConfig {
                groups,
                orders: (0..k).collect(),
                ..IapConfig::default()
            };
            assert_eq!(cfg.widths(bands).unwrap().stacked(), stacked);
        }
    }

    #[test]
    fn column_lookup_agrees_with_map() {
        for (bands, groups, k, radii) in [(7, 3, 4, vec![2, 4, 6]), (5, 2, 2, vec![1]), (3, 1, 3, vec![3, 5])] {
            let layout = FifLayout::new(k, radii, 2.0).unwrap();
            let map = column_map(bands, groups, &layout);
            assert_eq!(map.len(), 2 * bands + layout.width(groups));
            for (j, c) in map.iter().enumerate() {
                assert_eq!(iap_column(j, bands, groups, &layout), Some(*c), "column {j}");
            }
            assert_eq!(iap_column(map.len(), bands, groups, &layout), None);
        }
    }

    #[test]
    fn assembled_blocks_are_standardized() {
        let osf = random(40, 3, 1, Stage::Osf);
        let sif = random(40, 3, 2, Stage::Sif);
        let fif = random(40, 5, 3, Stage::Fif);
        let iap = assemble_iap(&osf, &sif, &fif).unwrap();
        assert_eq!(iap.cols(), 11);
        assert_eq!(iap.stage(), Stage::Iap);
        for j in 0..11 {
            let c = iap.column(j);
            let mean = c.iter().sum::<f64>() / 40.0;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 40.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
        // block order is preserved: column 3 is the first SIF column z-scored
        let s = sif.column(0);
        let m = s.iter().sum::<f64>() / 40.0;
        let sd = (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 40.0).sqrt();
        for (a, b) in iap.column(3).iter().zip(&s) {
            assert!((a - (b - m) / sd).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_fif_block_is_allowed() {
        let osf = random(10, 2, 1, Stage::Osf);
        let sif = random(10, 2, 2, Stage::Sif);
        let iap = assemble_iap(&osf, &sif, &FeatureMatrix::empty(10, Stage::Fif)).unwrap();
        assert_eq!(iap.cols(), 4);
    }

    #[test]
    fn row_mismatch_is_rejected() {
        let a = random(10, 2, 1, Stage::Osf);
        let b = random(11, 2, 2, Stage::Sif);
        assert!(assemble_iap(&a, &b, &FeatureMatrix::empty(10, Stage::Fif)).is_err());
    }

    #[test]
    fn full_width_reduction_is_invertible() {
        let x = random(30, 6, 4, Stage::Iap);
        let (y, model) = reduce(&x, 6).unwrap();
        assert_eq!(y.stage(), Stage::Reduced);
        let back = model.inverse_transform(&y).unwrap();
        for (a, b) in back.values().iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(reduce(&x, 7).is_err());
        assert!(reduce(&x, 0).is_err());
    }

    #[test]
    fn rank_five_matrix_is_fully_explained() {
        let factors = random(200, 5, 5, Stage::Iap);
        let loadings = random(5, 20, 6, Stage::Iap);
        let mut values = vec![0.0; 200 * 20];
        for i in 0..200 {
            for j in 0..20 {
                values[i * 20 + j] = (0..5).map(|t| factors.get(i, t) * loadings.get(t, j)).sum();
            }
        }
        let x = FeatureMatrix::new(200, 20, values, Stage::Iap).unwrap();
        let (_, model) = reduce(&x, 5).unwrap();
        let total: f64 = model.explained_variance_ratio().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn streamed_reduction_matches_materialized() {
        let a = random(5000, 4, 11, Stage::Osf);
        let b = random(5000, 0, 12, Stage::Sif);
        let c = random(5000, 6, 13, Stage::Fif);
        let (want, want_model) = reduce(&stack_standardized(&[&a, &b, &c]).unwrap(), 6).unwrap();
        let (got, got_model) = reduce_stacked(&[&a, &b, &c], 6).unwrap();
        assert_eq!(want.values(), got.values());
        assert_eq!(want_model, got_model);
        assert!(reduce_stacked(&[&a, &c], 11).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(IapConfig::default().validate().is_ok());
        let bad_orders = IapConfig {
            orders: vec![0, 2],
            ..IapConfig::default()
        };
        assert!(bad_orders.validate().is_err());
        let one_order = IapConfig {
            orders: vec![0],
            ..IapConfig::default()
        };
        assert!(one_order.validate().is_err());
        let no_groups = IapConfig {
            groups: 0,
            ..IapConfig::default()
        };
        assert!(no_groups.validate().is_err());
    }

    #[test]
    fn extraction_widths_on_a_small_cube() {
        let cube = crate::cube_io::synth::smooth_cube(20, 16, 8, 3).unwrap();
        let cfg = IapConfig {
            groups: 2,
            orders: vec![0, 1, 2],
            reduced_dim: 5,
            ..IapConfig::default()
        };
        let ex = extract_blocks(&cube, &cfg, &SlicConfig::default(), 7).unwrap();
        assert_eq!(ex.osf.cols(), 8);
        assert_eq!(ex.sif.cols(), 8);
        assert_eq!(ex.fif.cols(), 2 * 3 * 7);
        let (red, _) = extract_reduced(&cube, &cfg, &SlicConfig::default(), 7).unwrap();
        assert_eq!((red.rows(), red.cols()), (320, 5));
        let too_many = IapConfig { groups: 9, ..cfg };
        assert!(extract_blocks(&cube, &too_many, &SlicConfig::default(), 7).is_err());
    }
}
