//! Orientation-histogram baseline: hard-binned, magnitude-weighted unsigned
//! gradient orientations pooled with the isotropic triangle kernel. It is not
//! rotation invariant and serves as the reference the FIFs are compared to.

use std::f64::consts::PI;

use crate::cube_io::{FeatureMatrix, HyperCube, Stage};
use crate::error::{IapError, Result};
use crate::grouping::{max_gradient_field, BandGrouping, GradientField};
use crate::numerics::conv::{convolve2d, Boundary};
use crate::numerics::kernel::make_isotropic_kernel;
use crate::numerics::plane::RealPlane;

pub const HISTOGRAM_BINS: usize = 9;

/// Bin of an unsigned orientation in `[0°, 180°)`, 20° per bin.
pub fn orientation_bin(dx: f64, dy: f64) -> usize {
    let mut t = dy.atan2(dx);
    if t < 0.0 {
        t += PI;
    }
    if t >= PI {
        t -= PI;
    }
    ((t / (PI / HISTOGRAM_BINS as f64)) as usize).min(HISTOGRAM_BINS - 1)
}

/// Pooled histograms of one gradient field, one column per (radius, bin).
pub fn orientation_histograms(grad: &GradientField, radii: &[usize]) -> Result<Vec<Vec<f64>>> {
    let (w, h) = (grad.field.width(), grad.field.height());
    let mut bins = vec![RealPlane::filled(w, h, 0.0); HISTOGRAM_BINS];
    for (i, d) in grad.field.data().iter().enumerate() {
        let mag = d.norm();
        if mag > 0.0 {
            bins[orientation_bin(d.re, d.im)].data_mut()[i] = mag;
        }
    }
    let mut out = Vec::with_capacity(radii.len() * HISTOGRAM_BINS);
    for &r in radii {
        let k = make_isotropic_kernel(r)?;
        for b in &bins {
            out.push(convolve2d(b, &k, Boundary::Reflect)?.into_data());
        }
    }
    Ok(out)
}

/// Baseline features for every band group: `n_g · |radii| · 9` columns.
pub fn extract_histogram_baseline(cube: &HyperCube, grouping: &BandGrouping, radii: &[usize]) -> Result<FeatureMatrix> {
    if radii.is_empty() {
        return Err(IapError::invalid("at least one radius is required"));
    }
    let mut columns = Vec::new();
    for g in max_gradient_field(cube, grouping)? {
        columns.extend(orientation_histograms(&g, radii)?);
    }
    FeatureMatrix::from_columns(&columns, Stage::Fif)
}
