//! Principal component analysis through the `F × F` covariance matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cube_io::{FeatureMatrix, Stage};
use crate::error::{IapError, Result};
use crate::par;

const CHUNK_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `components[c]` is the unit-length loading vector of component `c`.
    pub components: Vec<Vec<f64>>,
    /// Variance captured by each kept component, non-increasing.
    pub variances: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
}

/// Column means and the sample covariance (`N - 1` divisor).
pub fn covariance(x: &FeatureMatrix) -> Result<(Vec<f64>, DMatrix<f64>)> {
    covariance_of(x.rows(), x.cols(), |i, out| out.copy_from_slice(x.row(i)))
}

/// Covariance of `n` rows of width `f` produced on demand by `row`, so a
/// matrix that is only a view over other data never has to be materialized.
pub fn covariance_of<R>(n: usize, f: usize, row: R) -> Result<(Vec<f64>, DMatrix<f64>)>
where
    R: Fn(usize, &mut [f64]) + Sync,
{
    if n < 2 {
        return Err(IapError::invalid("PCA needs at least two rows"));
    }
    if f == 0 {
        return Err(IapError::invalid("PCA needs at least one column"));
    }
    let mut mean = vec![0.0; f];
    let mut buf = vec![0.0; f];
    for i in 0..n {
        row(i, &mut buf);
        for (m, v) in mean.iter_mut().zip(&buf) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let starts: Vec<usize> = (0..n).step_by(CHUNK_ROWS).collect();
    let partials = par::map_collect(&starts, |&s| {
        let centered = centered_chunk(s, (s + CHUNK_ROWS).min(n), &mean, &row);
        // `transpose() *` goes through the blocked GEMM; `tr_mul` does not.
        centered.transpose() * &centered
    });
    let mut cov = DMatrix::zeros(f, f);
    for p in partials {
        cov += p;
    }
    cov /= (n - 1) as f64;
    Ok((mean, cov))
}

fn centered_chunk<R: Fn(usize, &mut [f64])>(s: usize, e: usize, mean: &[f64], row: &R) -> DMatrix<f64> {
    let f = mean.len();
    let mut vals = vec![0.0; (e - s) * f];
    for (i, out) in vals.chunks_mut(f).enumerate() {
        row(s + i, out);
        for (v, m) in out.iter_mut().zip(mean) {
            *v -= m;
        }
    }
    DMatrix::from_row_slice(e - s, f, &vals)
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Fits the top `d` components. Components are sorted by decreasing
/// variance; near-ties (relative 1e-10) are ordered by the index of each
/// vector's largest-magnitude entry, and that entry is made positive.
pub fn pca_fit(x: &FeatureMatrix, d: usize) -> Result<PcaModel> {
    pca_fit_of(x.rows(), x.cols(), |i, out| out.copy_from_slice(x.row(i)), d)
}

/// [`pca_fit`] over rows produced on demand.
pub fn pca_fit_of<R>(n: usize, f: usize, row: R, d: usize) -> Result<PcaModel>
where
    R: Fn(usize, &mut [f64]) + Sync,
{
    if d == 0 || d > f {
        return Err(IapError::invalid(format!("reduced dimension {d} must lie in 1..={f}")));
    }
    let (mean, cov) = covariance_of(n, f, row)?;
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..f)
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            if v[argmax_abs(&v)] < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            (eig.eigenvalues[c].max(0.0), v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tol = 1e-10 * pairs[0].0.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[start].0 - pairs[end].0).abs() <= tol {
            end += 1;
        }
        pairs[start..end].sort_by_key(|p| argmax_abs(&p.1));
        start = end;
    }
    pairs.truncate(d);
    let (variances, components) = pairs.into_iter().unzip();
    Ok(PcaModel {
        mean,
        components,
        variances,
        total_variance,
    })
}

impl PcaModel {
    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn input_dims(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.dims()];
        }
        self.variances.iter().map(|v| v / self.total_variance).collect()
    }

    fn basis(&self) -> DMatrix<f64> {
        let f = self.input_dims();
        DMatrix::from_fn(f, self.dims(), |i, c| self.components[c][i])
    }

    /// Projects mean-centered rows onto the kept components.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let f = self.input_dims();
        if x.cols() != f {
            return Err(IapError::dims(format!("PCA expects {f} columns, got {}", x.cols())));
        }
        Ok(self.transform_of(x.rows(), |i, out| out.copy_from_slice(x.row(i))))
    }

    /// [`PcaModel::transform`] over rows produced on demand; `row` must
    /// fill `input_dims()` values.
    pub fn transform_of<R>(&self, n: usize, row: R) -> FeatureMatrix
    where
        R: Fn(usize, &mut [f64]) + Sync,
    {
        let basis = self.basis();
        let d = self.dims();
        let starts: Vec<usize> = (0..n).step_by(CHUNK_ROWS).collect();
        let parts = par::map_collect(&starts, |&s| {
            let e = (s + CHUNK_ROWS).min(n);
            let proj = centered_chunk(s, e, &self.mean, &row) * &basis;
            let mut rows = Vec::with_capacity((e - s) * d);
            for i in 0..e - s {
                rows.extend(proj.row(i).iter().copied());
            }
            rows
        });
        FeatureMatrix::new(n, d, parts.concat(), Stage::Reduced).expect("projection has n x d values")
    }

    /// Maps projected rows back to the input space.
    pub fn inverse_transform(&self, y: &FeatureMatrix) -> Result<FeatureMatrix> {
        let d = self.dims();
        if y.cols() != d {
            return Err(IapError::dims(format!(
                "inverse PCA expects {d} columns, got {}",
                y.cols()
            )));
        }
        let f = self.input_dims();
        let mut out = Vec::with_capacity(y.rows() * f);
        for i in 0..y.rows() {
            let row = y.row(i);
            for j in 0..f {
                let mut acc = self.mean[j];
                for (c, comp) in self.components.iter().enumerate() {
                    acc += row[c] * comp[j];
                }
                out.push(acc);
            }
        }
        FeatureMatrix::new(y.rows(), f, out, Stage::Iap)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random(n: usize, f: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMatrix::new(n, f, vals, Stage::Iap).unwrap()
    }

    #[test]
    fn diagonal_line_has_one_component() {
        let vals: Vec<f64> = (0..6).flat_map(|i| [i as f64, i as f64]).collect();
        let x = FeatureMatrix::new(6, 2, vals, Stage::Iap).unwrap();
        let m = pca_fit(&x, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.components[0][0] - s).abs() < 1e-12);
        assert!((m.components[0][1] - s).abs() < 1e-12);
        assert!(m.variances[1].abs() < 1e-12);
    }

    #[test]
    fn square_cloud_tie_follows_index_order() {
        // covariance is a multiple of the identity
        let x = FeatureMatrix::new(4, 2, vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0], Stage::Iap).unwrap();
        let m = pca_fit(&x, 2).unwrap();
        assert!((m.variances[0] - m.variances[1]).abs() < 1e-15);
        assert!((m.variances[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(argmax_abs(&m.components[0]), 0);
        assert_eq!(argmax_abs(&m.components[1]), 1);
        assert!(m.components[0][0] > 0.0 && m.components[1][1] > 0.0);
    }

    #[test]
    fn full_rank_round_trip() {
        let x = random(40, 5, 3);
        let m = pca_fit(&x, 5).unwrap();
        let back = m.inverse_transform(&m.transform(&x).unwrap()).unwrap();
        let scale = x.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in x.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn components_are_orthonormal_and_variances_sorted() {
        let x = random(200, 7, 5);
        let m = pca_fit(&x, 7).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                let dot: f64 = m.components[a].iter().zip(&m.components[b]).map(|(p, q)| p * q).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
        assert!(m.variances.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn dimension_bounds() {
        let x = random(10, 3, 1);
        assert!(pca_fit(&x, 0).is_err());
        assert!(pca_fit(&x, 4).is_err());
    }
}
