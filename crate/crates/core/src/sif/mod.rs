//! Spatial invariant features: isotropic filtering of every band, averaged
//! within superpixels computed on the first three principal components.

mod slic;

pub use slic::{slic, SlicParams, SuperpixelMap, DEFAULT_COMPACTNESS};

use crate::cube_io::{FeatureMatrix, HyperCube, Stage};
use crate::error::{IapError, Result};
use crate::numerics::conv::{convolve2d, Boundary};
use crate::numerics::kernel::mean_isotropic_kernel;
use crate::numerics::pca::pca_fit;
use crate::numerics::plane::RealPlane;
use crate::par;

/// Every band filtered with the radial-triangle kernel at each radius, the
/// responses averaged across radii. Output width equals the band count.
pub fn rcf_cube(cube: &HyperCube, radii: &[usize]) -> Result<HyperCube> {
    if radii.is_empty() {
        return Err(IapError::invalid("at least one radius is required"));
    }
    // Averaging per-radius responses equals filtering once with the averaged kernel.
    let kernel = mean_isotropic_kernel(radii)?;
    let bands: Vec<usize> = (0..cube.bands()).collect();
    let planes = par::map_collect(&bands, |&b| convolve2d(&cube.band_plane(b), &kernel, Boundary::Reflect));
    HyperCube::from_planes(&planes.into_iter().collect::<Result<Vec<_>>>()?)
}

pub fn extract_rcf(cube: &HyperCube, radii: &[usize]) -> Result<FeatureMatrix> {
    Ok(rcf_cube(cube, radii)?.spectra().with_stage(Stage::SifRcf))
}

/// First three principal components of the pixel spectra, each rescaled to
/// `[0, 1]`. Components with no spread come back as all zeros.
pub fn pca3(cube: &HyperCube) -> Result<[RealPlane; 3]> {
    if cube.bands() < 3 {
        return Err(IapError::invalid(format!(
            "three principal components need at least 3 bands, got {}",
            cube.bands()
        )));
    }
    let spectra = cube.spectra();
    let model = pca_fit(&spectra, 3)?;
    let scores = model.transform(&spectra)?;
    let scale = scores.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let plane = |c: usize| {
        let col = scores.column(c);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let vals = if range > 1e-12 * scale.max(1e-300) {
            col.iter().map(|v| (v - lo) / range).collect()
        } else {
            vec![0.0; col.len()]
        };
        RealPlane::new(cube.width(), cube.height(), vals).expect("pixel count")
    };
    Ok([plane(0), plane(1), plane(2)])
}

/// Replaces each row by the mean of the rows in its superpixel.
///
/// Means are accumulated as `first + Σ(v - first) / n`, so a segment whose
/// rows already agree is returned unchanged, bit for bit.
pub fn aggregate(rcf: &FeatureMatrix, spmap: &SuperpixelMap) -> Result<FeatureMatrix> {
    let n = spmap.width() * spmap.height();
    if rcf.rows() != n {
        return Err(IapError::dims(format!(
            "{} feature rows for a {}x{} segmentation",
            rcf.rows(),
            spmap.width(),
            spmap.height()
        )));
    }
    let f = rcf.cols();
    let q = spmap.count();
    let mut first: Vec<Option<usize>> = vec![None; q];
    let mut sums = vec![0.0; q * f];
    for (i, &s) in spmap.ids().iter().enumerate() {
        let s = s as usize;
        let anchor = *first[s].get_or_insert(i);
        let base = rcf.row(anchor);
        for ((acc, v), b) in sums[s * f..(s + 1) * f].iter_mut().zip(rcf.row(i)).zip(base) {
            *acc += v - b;
        }
    }
    let means: Vec<f64> = (0..q)
        .flat_map(|s| {
            let anchor = first[s].expect("segments are non-empty");
            let size = spmap.sizes()[s] as f64;
            let base = rcf.row(anchor);
            let sums = &sums[s * f..(s + 1) * f];
            base.iter()
                .zip(sums)
                .map(move |(b, d)| b + d / size)
                .collect::<Vec<_>>()
        })
        .collect();
    let mut values = Vec::with_capacity(n * f);
    for &s in spmap.ids() {
        let s = s as usize;
        values.extend_from_slice(&means[s * f..(s + 1) * f]);
    }
    FeatureMatrix::new(n, f, values, Stage::Sif)
}

/// Full SIF extraction: RCF, PCA-3 superpixels, segment means.
pub fn extract_sif(cube: &HyperCube, radii: &[usize], params: &SlicParams) -> Result<(FeatureMatrix, SuperpixelMap)> {
    let rcf = extract_rcf(cube, radii)?;
    let planes = pca3(cube)?;
    let spmap = slic(&planes, params)?;
    let sif = aggregate(&rcf, &spmap)?;
    Ok((sif, spmap))
}
