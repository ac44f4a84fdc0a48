//! Band grouping and per-group maximum-response gradients.
//!
//! Gradients use central differences with the vertical axis pointing up:
//! `dx = (I[x+1] - I[x-1]) / 2` and `dy = (I[y-1] - I[y+1]) / 2` with `y` the
//! row index. A screen-counterclockwise rotation of the image by `g` thus
//! adds `g` to every gradient phase.

use num_complex::Complex64;

use crate::cube_io::HyperCube;
use crate::error::{IapError, Result};
use crate::numerics::kmeans::kmeans;
use crate::numerics::plane::{ComplexPlane, RealPlane};
use crate::par;

/// Pixels sampled for band signatures: every `SUBSAMPLE`-th in row-major order.
pub const SUBSAMPLE: usize = 4;
const KMEANS_MAX_ITER: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandGrouping {
    n_groups: usize,
    /// Group id per band. Ids are numbered by each group's lowest band.
    assignment: Vec<usize>,
}

impl BandGrouping {
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let n_groups = assignment.iter().max().map_or(0, |m| m + 1);
        if n_groups == 0 {
            return Err(IapError::invalid("empty band grouping"));
        }
        for g in 0..n_groups {
            if !assignment.contains(&g) {
                return Err(IapError::invalid(format!("group {g} has no bands")));
            }
        }
        Ok(Self {
            n_groups,
            assignment: canonical(&assignment),
        })
    }

    /// Every band in one group.
    pub fn single(bands: usize) -> Self {
        Self {
            n_groups: 1,
            assignment: vec![0; bands],
        }
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn bands(&self) -> usize {
        self.assignment.len()
    }

    /// Member bands of each group, ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_groups];
        for (b, &g) in self.assignment.iter().enumerate() {
            out[g].push(b);
        }
        out
    }
}

/// Renumbers labels in order of first appearance.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Standardized values of each band over the subsampled pixels; `D × M`
/// row-major.
pub fn band_signatures(cube: &HyperCube) -> (Vec<f64>, usize) {
    let idx: Vec<usize> = (0..cube.pixels()).step_by(SUBSAMPLE).collect();
    let m = idx.len();
    let mut out = Vec::with_capacity(cube.bands() * m);
    for b in 0..cube.bands() {
        let band = cube.band(b);
        let vals: Vec<f64> = idx.iter().map(|&i| band[i]).collect();
        let mean = vals.iter().sum::<f64>() / m as f64;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
        out.extend(vals.iter().map(|v| if std > 1e-12 { (v - mean) / std } else { 0.0 }));
    }
    (out, m)
}

/// Clusters bands into `n_groups` by k-means over their standardized
/// value profiles.
pub fn group_bands(cube: &HyperCube, n_groups: usize, seed: u64) -> Result<BandGrouping> {
    let d = cube.bands();
    if n_groups == 0 || n_groups > d {
        return Err(IapError::invalid(format!("group count {n_groups} must lie in 1..={d}")));
    }
    if n_groups == 1 {
        return Ok(BandGrouping::single(d));
    }
    let (sig, m) = band_signatures(cube);
    let result = kmeans(&sig, m, n_groups, seed, KMEANS_MAX_ITER)?;
    BandGrouping::from_assignment(result.assignments)
}

/// Complex gradient `D = dx + i·dy` of one band group.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub group: usize,
    pub field: ComplexPlane,
}

impl GradientField {
    pub fn magnitude(&self) -> RealPlane {
        self.field.norm()
    }

    /// Phase in `(-π, π]`.
    pub fn phase(&self) -> RealPlane {
        self.field.map(|c| {
            let t = c.im.atan2(c.re);
            if t <= -std::f64::consts::PI {
                std::f64::consts::PI
            } else {
                t
            }
        })
    }
}

/// Central-difference gradient of one plane with reflect boundary.
pub fn band_gradient(plane: &RealPlane) -> ComplexPlane {
    let (w, h) = (plane.width(), plane.height());
    ComplexPlane::from_fn(w, h, |x, y| {
        let (xi, yi) = (x as isize, y as isize);
        let dx = (plane.get_reflect(xi + 1, yi) - plane.get_reflect(xi - 1, yi)) / 2.0;
        let dy = (plane.get_reflect(xi, yi - 1) - plane.get_reflect(xi, yi + 1)) / 2.0;
        Complex64::new(dx, dy)
    })
}

/// Per pixel and group, keeps the gradient of the member band with the
/// largest magnitude (lowest band index on ties).
pub fn max_gradient_field(cube: &HyperCube, grouping: &BandGrouping) -> Result<Vec<GradientField>> {
    if grouping.bands() != cube.bands() {
        return Err(IapError::dims(format!(
            "grouping covers {} bands, cube has {}",
            grouping.bands(),
            cube.bands()
        )));
    }
    let groups = grouping.groups();
    let fields = par::map_collect(&groups, |members| {
        let mut best = ComplexPlane::filled(cube.width(), cube.height(), Complex64::new(0.0, 0.0));
        let mut best_sq = vec![-1.0; cube.pixels()];
        for &b in members {
            let g = band_gradient(&cube.band_plane(b));
            for ((dst, bsq), &d) in best.data_mut().iter_mut().zip(best_sq.iter_mut()).zip(g.data()) {
                let sq = d.norm_sqr();
                if sq > *bsq {
                    *bsq = sq;
                    *dst = d;
                }
            }
        }
        best
    });
    Ok(fields
        .into_iter()
        .enumerate()
        .map(|(group, field)| GradientField { group, field })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rotate::{rotate_plane, RotationOp};

    fn cube_from(planes: Vec<RealPlane>) -> HyperCube {
        HyperCube::from_planes(&planes).unwrap()
    }

    #[test]
    fn identical_bands_single_group() {
        let p = RealPlane::from_fn(6, 6, |x, y| (x * y) as f64);
        let cube = cube_from(vec![p.clone(), p.clone(), p]);
        let g = group_bands(&cube, 1, 0).unwrap();
        assert_eq!(g.groups(), vec![vec![0, 1, 2]]);
    }

    /// Best 2-partition by brute force over band signatures.
    fn brute_force_partition(sig: &[f64], m: usize, d: usize) -> Vec<usize> {
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << d) - 1 {
            let labels: Vec<usize> = (0..d).map(|b| ((mask >> b) & 1) as usize).collect();
            let mut cost = 0.0;
            for c in 0..2 {
                let members: Vec<usize> = (0..d).filter(|&b| labels[b] == c).collect();
                for j in 0..m {
                    let mean = members.iter().map(|&b| sig[b * m + j]).sum::<f64>() / members.len() as f64;
                    cost += members.iter().map(|&b| (sig[b * m + j] - mean).powi(2)).sum::<f64>();
                }
            }
            if cost < best.0 {
                best = (cost, labels);
            }
        }
        canonical(&best.1)
    }

    #[test]
    fn two_band_families_are_separated() {
        // family A follows a horizontal pattern, family B a vertical one
        let a = |k: f64| RealPlane::from_fn(8, 8, move |x, _| (x as f64 * 0.7).sin() * (1.0 + 0.1 * k) + 5.0);
        let b = |k: f64| RealPlane::from_fn(8, 8, move |_, y| (y as f64 * 0.5).cos() * (1.0 + 0.1 * k) + 50.0);
        let cube = cube_from(vec![a(0.0), b(0.0), a(1.0), b(1.0), b(2.0), a(2.0), a(3.0), b(3.0)]);
        let (sig, m) = band_signatures(&cube);
        let oracle = brute_force_partition(&sig, m, 8);
        for seed in 0..4 {
            let g = group_bands(&cube, 2, seed).unwrap();
            assert_eq!(g.assignment(), oracle.as_slice());
        }
        assert_eq!(oracle, vec![0, 1, 0, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn one_band_per_group_when_count_equals_bands() {
        let planes: Vec<RealPlane> = (0..4)
            .map(|k| RealPlane::from_fn(5, 5, move |x, y| ((x + 2 * y) as f64 * (k as f64 + 1.0)).sin()))
            .collect();
        let cube = cube_from(planes);
        let g = group_bands(&cube, 4, 3).unwrap();
        assert_eq!(g.n_groups(), 4);
        assert!(g.groups().iter().all(|m| m.len() == 1));
        assert!(group_bands(&cube, 5, 3).is_err());
        assert!(group_bands(&cube, 0, 3).is_err());
    }

    #[test]
    fn band_permutation_keeps_partition() {
        let planes: Vec<RealPlane> = (0..6)
            .map(|k| {
                let family = k % 2;
                RealPlane::from_fn(8, 8, move |x, y| {
                    if family == 0 {
                        x as f64 + 0.05 * k as f64 * y as f64
                    } else {
                        (y as f64).powi(2) - 0.05 * k as f64 * x as f64
                    }
                })
            })
            .collect();
        let perm = [3, 0, 5, 1, 4, 2];
        let cube = cube_from(planes.clone());
        let permuted = cube_from(perm.iter().map(|&i| planes[i].clone()).collect());
        let a = group_bands(&cube, 2, 9).unwrap();
        let b = group_bands(&permuted, 2, 9).unwrap();
        let as_sets = |g: &BandGrouping, map: &dyn Fn(usize) -> usize| {
            let mut s: Vec<Vec<usize>> = g
                .groups()
                .into_iter()
                .map(|m| {
                    let mut v: Vec<usize> = m.into_iter().map(map).collect();
                    v.sort();
                    v
                })
                .collect();
            s.sort();
            s
        };
        assert_eq!(as_sets(&a, &|b| b), as_sets(&b, &|i| perm[i]));
    }

    #[test]
    fn constant_cube_has_zero_gradients() {
        let cube = cube_from(vec![RealPlane::filled(5, 4, 2.0); 3]);
        let f = max_gradient_field(&cube, &BandGrouping::single(3)).unwrap();
        assert!(f[0].field.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn ramp_gives_unit_horizontal_gradient() {
        let cube = cube_from(vec![RealPlane::from_fn(6, 5, |x, _| x as f64)]);
        let f = max_gradient_field(&cube, &BandGrouping::single(1)).unwrap();
        for y in 0..5 {
            for x in 1..5 {
                assert_eq!(f[0].field.get(x, y), Complex64::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn strongest_band_wins_pointwise() {
        let s1 = RealPlane::from_fn(7, 7, |x, y| x as f64 + 0.3 * y as f64);
        let s3 = RealPlane::from_fn(7, 7, |x, y| 3.0 * y as f64 - 0.2 * x as f64);
        let cube = cube_from(vec![s1.clone(), s3.clone()]);
        let f = max_gradient_field(&cube, &BandGrouping::single(2)).unwrap();
        let (g1, g3) = (band_gradient(&s1), band_gradient(&s3));
        for i in 0..49 {
            let want = if g3.data()[i].norm_sqr() > g1.data()[i].norm_sqr() {
                g3.data()[i]
            } else {
                g1.data()[i]
            };
            assert_eq!(f[0].field.data()[i], want);
        }
        let m = f[0].magnitude();
        assert!((m.get(3, 3) - (9.0f64 + 0.04).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_rotates_magnitude_and_shifts_phase() {
        let p = RealPlane::from_fn(9, 9, |x, y| {
            ((x * x + 3 * y) as f64 * 0.37).sin() + 0.1 * (x * y) as f64
        });
        let q = rotate_plane(&p, RotationOp::exact(90.0)).unwrap();
        let f = max_gradient_field(&cube_from(vec![p]), &BandGrouping::single(1)).unwrap();
        let g = max_gradient_field(&cube_from(vec![q]), &BandGrouping::single(1)).unwrap();
        let rot_mag = rotate_plane(&f[0].magnitude(), RotationOp::exact(90.0)).unwrap();
        assert_eq!(rot_mag, g[0].magnitude());
        let (pf, pg) = (f[0].phase(), g[0].phase());
        let op = RotationOp::exact(90.0);
        for y in 1..8 {
            for x in 1..8 {
                if f[0].magnitude().get(x, y) < 1e-9 {
                    continue;
                }
                let (nx, ny) = op.map_exact(x, y, 9, 9).unwrap();
                let diff = (pg.get(nx, ny) - pf.get(x, y) - std::f64::consts::FRAC_PI_2)
                    .rem_euclid(2.0 * std::f64::consts::PI);
                assert!(diff < 1e-12 || (2.0 * std::f64::consts::PI - diff) < 1e-12);
            }
        }
    }
}
