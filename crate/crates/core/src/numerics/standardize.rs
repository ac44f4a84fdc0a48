use crate::cube_io::FeatureMatrix;
use crate::error::{IapError, Result};

/// Columns whose population standard deviation is at or below this are
/// treated as constant and zero-filled.
pub const STD_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    /// Z-score of `v` in column `j`; constant columns map to zero.
    pub fn apply(&self, j: usize, v: f64) -> f64 {
        if self.std[j] > STD_EPSILON {
            (v - self.mean[j]) / self.std[j]
        } else {
            0.0
        }
    }
}

/// Column means and population standard deviations.
pub fn column_stats(x: &FeatureMatrix) -> Result<ColumnStats> {
    let (n, f) = (x.rows(), x.cols());
    if n < 2 {
        return Err(IapError::invalid("standardize needs at least two rows"));
    }
    if let Some(i) = x.values().iter().position(|v| !v.is_finite()) {
        return Err(IapError::NonFinite(i));
    }
    let mut mean = vec![0.0; f];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; f];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let std = var.iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(ColumnStats { mean, std })
}

/// Z-scores every column (population standard deviation).
pub fn standardize(x: &FeatureMatrix) -> Result<(FeatureMatrix, ColumnStats)> {
    let stats = column_stats(x)?;
    let (n, f) = (x.rows(), x.cols());
    let mut out = Vec::with_capacity(n * f);
    for i in 0..n {
        for (j, &v) in x.row(i).iter().enumerate() {
            out.push(stats.apply(j, v));
        }
    }
    let m = FeatureMatrix::new(n, f, out, x.stage())?;
    Ok((m, stats))
}
