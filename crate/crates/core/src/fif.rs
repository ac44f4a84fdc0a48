//! Frequency invariant features: polarized Fourier representations of the
//! group gradients, pooled with steerable ring kernels and coupled into
//! rotation-invariant scalars.

use num_complex::Complex64;

use crate::cube_io::{FeatureMatrix, HyperCube, Stage};
use crate::error::{IapError, Result};
use crate::grouping::{max_gradient_field, BandGrouping, GradientField};
use crate::numerics::conv::{convolve2d, Boundary};
use crate::numerics::kernel::{make_angular_kernel, Kernel2D};
use crate::numerics::plane::ComplexPlane;
use crate::par;

/// Regularizer under the square root of the cross-radius coupling.
pub const COUPLING_EPSILON: f64 = 1e-12;

/// `F_m = |D|·e^{-imθ}` for one group.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    pub group: usize,
    pub order: i32,
    pub field: ComplexPlane,
}

/// Order-`m` representation of a gradient field. Pixels with `D = 0` map to
/// zero for every order.
pub fn fourier_field(grad: &GradientField, m: i32) -> Result<FourierField> {
    if m < 0 {
        return Err(IapError::invalid(format!("Fourier order must be >= 0, got {m}")));
    }
    let field = grad.field.map(|d| {
        let mag = d.norm();
        if mag == 0.0 {
            Complex64::new(0.0, 0.0)
        } else if m == 0 {
            Complex64::new(mag, 0.0)
        } else {
            Complex64::from_polar(mag, -(m as f64) * d.im.atan2(d.re))
        }
    });
    Ok(FourierField {
        group: grad.group,
        order: m,
        field,
    })
}

/// Pools `field` with the order-`j` ring kernel of radius `r`.
pub fn regional_coeff(field: &FourierField, j: i32, r: usize, width: f64) -> Result<ComplexPlane> {
    let kernel = make_angular_kernel(j, r, width)?;
    pool(&field.field, &kernel)
}

fn pool(field: &ComplexPlane, kernel: &Kernel2D<Complex64>) -> Result<ComplexPlane> {
    if kernel.order() == 0 {
        // Order-0 taps are real; skip the complex products.
        let real = Kernel2D::from_taps(kernel.radius(), 0, kernel.taps().iter().map(|t| t.re).collect())?;
        convolve2d(field, &real, Boundary::Reflect)
    } else {
        convolve2d(field, kernel, Boundary::Reflect)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FifPart {
    /// `|coeff(F_m, 0, r)|`
    Magnitude,
    /// `Re coeff(F_m, -m, r)`
    Absolute,
    /// Normalized coupling of two neighbouring radii.
    Relative,
}

impl FifPart {
    pub fn as_str(&self) -> &'static str {
        match self {
            FifPart::Magnitude => "magnitude",
            FifPart::Absolute => "absolute",
            FifPart::Relative => "relative",
        }
    }
}

/// What one FIF column holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FifColumn {
    pub group: usize,
    pub scale: usize,
    pub part: FifPart,
    /// Fourier order for parts 1 and 2; the field order for part 3.
    pub order: i32,
}

/// Orders, radii and ring width. Per scale the layout holds `k` magnitude
/// features, `k` absolute invariants and one relative invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct FifLayout {
    orders: Vec<i32>,
    radii: Vec<usize>,
    ring_width: f64,
}

impl FifLayout {
    /// Orders `0..k`.
    pub fn new(k: usize, radii: Vec<usize>, ring_width: f64) -> Result<Self> {
        if k < 2 {
            return Err(IapError::invalid(format!(
                "the relative invariant needs at least 2 Fourier orders, got {k}"
            )));
        }
        if radii.is_empty() || radii.contains(&0) {
            return Err(IapError::invalid("radii must be a non-empty list of positive integers"));
        }
        if !ring_width.is_finite() || ring_width < 1.0 {
            return Err(IapError::invalid(format!("ring width must be >= 1, got {ring_width}")));
        }
        Ok(Self {
            orders: (0..k as i32).collect(),
            radii,
            ring_width,
        })
    }

    /// Ring width equal to the spacing of the radii (2 for a single radius).
    pub fn with_default_width(k: usize, radii: Vec<usize>) -> Result<Self> {
        let width = default_ring_width(&radii);
        Self::new(k, radii, width)
    }

    pub fn orders(&self) -> &[i32] {
        &self.orders
    }

    pub fn radii(&self) -> &[usize] {
        &self.radii
    }

    pub fn ring_width(&self) -> f64 {
        self.ring_width
    }

    /// Field order and kernel order of the relative invariant: `(1, 2)` when
    /// three or more orders exist, otherwise the two largest orders.
    pub fn coupling_orders(&self) -> (i32, i32) {
        let k = self.orders.len();
        if k >= 3 {
            (1, 2)
        } else {
            (self.orders[k - 2], self.orders[k - 1])
        }
    }

    pub fn per_scale_width(&self) -> usize {
        2 * self.orders.len() + 1
    }

    pub fn group_width(&self) -> usize {
        self.radii.len() * self.per_scale_width()
    }

    pub fn width(&self, n_groups: usize) -> usize {
        n_groups * self.group_width()
    }

    /// Column descriptors in storage order: group, then scale, then part.
    pub fn columns(&self, n_groups: usize) -> Vec<FifColumn> {
        let mut out = Vec::with_capacity(self.width(n_groups));
        for group in 0..n_groups {
            for scale in 0..self.radii.len() {
                for &order in &self.orders {
                    out.push(FifColumn {
                        group,
                        scale,
                        part: FifPart::Magnitude,
                        order,
                    });
                }
                for &order in &self.orders {
                    out.push(FifColumn {
                        group,
                        scale,
                        part: FifPart::Absolute,
                        order,
                    });
                }
                out.push(FifColumn {
                    group,
                    scale,
                    part: FifPart::Relative,
                    order: self.coupling_orders().0,
                });
            }
        }
        out
    }
}

/// Spacing between consecutive sorted radii, or 2 when it is undefined.
pub fn default_ring_width(radii: &[usize]) -> f64 {
    let mut r = radii.to_vec();
    r.sort_unstable();
    r.dedup();
    r.windows(2)
        .map(|p| (p[1] - p[0]) as f64)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
        .unwrap_or(2.0)
        .max(1.0)
}

/// Coupling of two coefficients: `Re(A·conj(B) / sqrt(|A·conj(B)| + ε))`.
pub fn couple(a: Complex64, b: Complex64) -> f64 {
    let p = a * b.conj();
    (p / (p.norm() + COUPLING_EPSILON).sqrt()).re
}

/// Stacks the pixel-wise Fourier features of every group. `fields` must hold
/// each layout order for groups `0..n` (any order of entries).
pub fn pwff_features(fields: &[FourierField], layout: &FifLayout) -> Result<FeatureMatrix> {
    let n_groups = fields.iter().map(|f| f.group + 1).max().unwrap_or(0);
    if n_groups == 0 {
        return Err(IapError::invalid("no Fourier fields given"));
    }
    let (w, h) = (fields[0].field.width(), fields[0].field.height());
    if fields.iter().any(|f| f.field.width() != w || f.field.height() != h) {
        return Err(IapError::dims("Fourier fields differ in size"));
    }
    let lookup = |g: usize, m: i32| -> Result<&ComplexPlane> {
        fields
            .iter()
            .find(|f| f.group == g && f.order == m)
            .map(|f| &f.field)
            .ok_or_else(|| IapError::invalid(format!("missing Fourier field of order {m} for group {g}")))
    };
    for g in 0..n_groups {
        for &m in layout.orders() {
            lookup(g, m)?;
        }
    }

    let n_scales = layout.radii().len();
    let (cm, cj) = layout.coupling_orders();
    // One job per (group, scale): parts 1 and 2, and the coupling coefficient.
    let jobs: Vec<(usize, usize)> = (0..n_groups).flat_map(|g| (0..n_scales).map(move |s| (g, s))).collect();
    let per_job = par::map_collect(&jobs, |&(g, s)| -> Result<(Vec<Vec<f64>>, ComplexPlane)> {
        let r = layout.radii()[s];
        let k0 = make_angular_kernel(0, r, layout.ring_width())?;
        let mut magnitude = Vec::with_capacity(layout.orders().len());
        let mut absolute = Vec::with_capacity(layout.orders().len());
        for &m in layout.orders() {
            let f = lookup(g, m)?;
            let c0 = pool(f, &k0)?;
            magnitude.push(c0.data().iter().map(|c| c.norm()).collect::<Vec<f64>>());
            if m == 0 {
                absolute.push(c0.data().iter().map(|c| c.re).collect());
            } else {
                let c = pool(f, &make_angular_kernel(-m, r, layout.ring_width())?)?;
                absolute.push(c.data().iter().map(|c| c.re).collect());
            }
        }
        let coupling = pool(lookup(g, cm)?, &make_angular_kernel(cj, r, layout.ring_width())?)?;
        magnitude.extend(absolute);
        Ok((magnitude, coupling))
    });
    let per_job = per_job.into_iter().collect::<Result<Vec<_>>>()?;

    let mut columns = Vec::with_capacity(layout.width(n_groups));
    for (idx, &(g, s)) in jobs.iter().enumerate() {
        let (parts, a) = &per_job[idx];
        columns.extend(parts.iter().cloned());
        let next = g * n_scales + (s + 1) % n_scales;
        let b = &per_job[next].1;
        columns.push(a.data().iter().zip(b.data()).map(|(&a, &b)| couple(a, b)).collect());
    }
    FeatureMatrix::from_columns(&columns, Stage::Fif)
}

/// All Fourier fields a layout needs for the given gradients.
pub fn fourier_fields(grads: &[GradientField], layout: &FifLayout) -> Result<Vec<FourierField>> {
    let mut out = Vec::with_capacity(grads.len() * layout.orders().len());
    for g in grads {
        for &m in layout.orders() {
            out.push(fourier_field(g, m)?);
        }
    }
    Ok(out)
}

/// Gradients per band group, then the stacked Fourier features.
pub fn extract_fif(cube: &HyperCube, grouping: &BandGrouping, layout: &FifLayout) -> Result<FeatureMatrix> {
    let grads = max_gradient_field(cube, grouping)?;
    pwff_features(&fourier_fields(&grads, layout)?, layout)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::numerics::plane::RealPlane;
    use crate::numerics::rotate::{rotate_plane, RotationOp};

    fn grad_of(d: Vec<Complex64>, w: usize, h: usize) -> GradientField {
        GradientField {
            group: 0,
            field: ComplexPlane::new(w, h, d).unwrap(),
        }
    }

    #[test]
    fn fourier_field_closed_form() {
        let g = grad_of(
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
            ],
            3,
            1,
        );
        for m in 0..4 {
            let f = fourier_field(&g, m).unwrap();
            assert!((f.field.data()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            assert_eq!(f.field.data()[2], Complex64::new(0.0, 0.0));
            for v in f.field.data().iter().take(2) {
                assert!((v.norm() - 1.0).abs() < 1e-15);
            }
        }
        let f1 = fourier_field(&g, 1).unwrap();
        assert!((f1.field.data()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(fourier_field(&g, -1).is_err());
    }

    #[test]
    fn order_zero_is_the_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d: Vec<Complex64> = (0..20)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = fourier_field(&grad_of(d.clone(), 5, 4), 0).unwrap();
        for (a, b) in f.field.data().iter().zip(&d) {
            assert_eq!(a.im, 0.0);
            assert_eq!(a.re, b.norm());
        }
    }

    #[test]
    fn order_zero_pooling_of_constant_is_constant() {
        let g = grad_of(vec![Complex64::new(0.6, 0.8); 81], 9, 9);
        let f = fourier_field(&g, 0).unwrap();
        let c = regional_coeff(&f, 0, 2, 2.0).unwrap();
        assert!(c
            .data()
            .iter()
            .all(|v| (v.re - 1.0).abs() < 1e-14 && v.im.abs() < 1e-14));
    }

    #[test]
    fn published_widths() {
        let l4 = FifLayout::with_default_width(4, vec![2, 4, 6]).unwrap();
        let l3 = FifLayout::with_default_width(3, vec![2, 4, 6]).unwrap();
        assert_eq!(l4.width(5), 135);
        assert_eq!(l4.width(4), 108);
        assert_eq!(l3.width(4), 84);
        assert_eq!(l4.columns(5).len(), 135);
    }

    #[test]
    fn layout_validation() {
        assert!(FifLayout::new(1, vec![2], 2.0).is_err());
        assert!(FifLayout::new(3, vec![], 2.0).is_err());
        assert!(FifLayout::new(3, vec![0, 2], 2.0).is_err());
        assert!(FifLayout::new(3, vec![2], 0.5).is_err());
        assert_eq!(FifLayout::new(2, vec![2], 2.0).unwrap().coupling_orders(), (0, 1));
        assert_eq!(FifLayout::new(4, vec![2], 2.0).unwrap().coupling_orders(), (1, 2));
    }

    #[test]
    fn default_width_is_radius_spacing() {
        assert_eq!(default_ring_width(&[2, 4, 6]), 2.0);
        assert_eq!(default_ring_width(&[6, 3]), 3.0);
        assert_eq!(default_ring_width(&[5]), 2.0);
    }

    fn test_cube(w: usize, h: usize, bands: usize, seed: u64) -> HyperCube {
        crate::cube_io::synth::smooth_cube(w, h, bands, seed).unwrap()
    }

    #[test]
    fn zero_gradient_gives_zero_features() {
        let cube = HyperCube::new(8, 8, 2, vec![0.3; 128]).unwrap();
        let layout = FifLayout::with_default_width(3, vec![1, 2]).unwrap();
        let x = extract_fif(&cube, &BandGrouping::single(2), &layout).unwrap();
        assert_eq!(x.cols(), 14);
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn part_two_order_zero_equals_part_one() {
        let cube = test_cube(12, 10, 3, 4);
        let layout = FifLayout::with_default_width(3, vec![2, 4]).unwrap();
        let x = extract_fif(&cube, &BandGrouping::single(3), &layout).unwrap();
        let cols = layout.columns(1);
        for s in 0..2 {
            let p1 = cols
                .iter()
                .position(|c| c.scale == s && c.part == FifPart::Magnitude && c.order == 0)
                .unwrap();
            let p2 = cols
                .iter()
                .position(|c| c.scale == s && c.part == FifPart::Absolute && c.order == 0)
                .unwrap();
            assert_eq!(x.column(p1), x.column(p2));
        }
    }

    #[test]
    fn coefficient_phase_law_under_quarter_turn() {
        let (w, h) = (24usize, 24usize);
        let cube = test_cube(w, h, 1, 9);
        let rot = RotationOp::exact(90.0);
        let rotated = cube.map_planes(|p| rotate_plane(p, rot)).unwrap();
        let g0 = &max_gradient_field(&cube, &BandGrouping::single(1)).unwrap()[0];
        let g1 = &max_gradient_field(&rotated, &BandGrouping::single(1)).unwrap()[0];
        let (r, width) = (3usize, 2.0);
        let margin = r + 3;
        for m in 0..3 {
            for j in -2..=2 {
                let a = regional_coeff(&fourier_field(g0, m).unwrap(), j, r, width).unwrap();
                let b = regional_coeff(&fourier_field(g1, m).unwrap(), j, r, width).unwrap();
                let phase = Complex64::from_polar(1.0, -((m + j) as f64) * PI / 2.0);
                for y in margin..h - margin {
                    for x in margin..w - margin {
                        let (xr, yr) = rot.map_exact(x, y, w, h).unwrap();
                        let expect = a.get(x, y) * phase;
                        let got = b.get(xr, yr);
                        assert!((expect - got).norm() < 1e-12, "m={m} j={j} at ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn features_invariant_under_quarter_turn() {
        let (w, h) = (32usize, 28usize);
        let cube = test_cube(w, h, 4, 11);
        let grouping = BandGrouping::from_assignment(vec![0, 1, 0, 1]).unwrap();
        let layout = FifLayout::with_default_width(4, vec![2, 4]).unwrap();
        let x0 = extract_fif(&cube, &grouping, &layout).unwrap();
        for quarter in [90.0, 180.0, 270.0] {
            let rot = RotationOp::exact(quarter);
            let x1 = extract_fif(&cube.map_planes(|p| rotate_plane(p, rot)).unwrap(), &grouping, &layout).unwrap();
            let (w1, h1) = if quarter == 180.0 { (w, h) } else { (h, w) };
            let margin = 4 + 2 + 1;
            for y in margin..h - margin {
                for x in margin..w - margin {
                    let (xr, yr) = rot.map_exact(x, y, w, h).unwrap();
                    let (i0, i1) = (y * w + x, yr * w1 + xr);
                    assert!(yr < h1);
                    for (a, b) in x0.row(i0).iter().zip(x1.row(i1)) {
                        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{quarter}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn parts_one_two_scale_linearly() {
        let cube = test_cube(16, 16, 2, 2);
        let layout = FifLayout::with_default_width(3, vec![2, 4]).unwrap();
        let g = BandGrouping::single(2);
        let x = extract_fif(&cube, &g, &layout).unwrap();
        let y = extract_fif(&cube.scaled(3.0), &g, &layout).unwrap();
        for (j, c) in layout.columns(1).iter().enumerate() {
            if c.part == FifPart::Relative {
                continue;
            }
            for (a, b) in x.column(j).iter().zip(y.column(j)) {
                assert!((3.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn coupling_is_invariant_to_common_phase() {
        let a = Complex64::new(0.3, -0.4);
        let b = Complex64::new(-0.1, 0.7);
        let u = Complex64::from_polar(1.0, 1.234);
        assert!((couple(a, b) - couple(a * u, b * u)).abs() < 1e-15);
        assert_eq!(couple(Complex64::new(0.0, 0.0), b), 0.0);
    }

    #[test]
    fn missing_order_is_an_error() {
        let g = grad_of(vec![Complex64::new(1.0, 0.0); 16], 4, 4);
        let layout = FifLayout::new(3, vec![1], 2.0).unwrap();
        let fields = vec![fourier_field(&g, 0).unwrap(), fourier_field(&g, 1).unwrap()];
        assert!(pwff_features(&fields, &layout).is_err());
    }

    #[test]
    fn parallel_layout_matches_column_descriptors() {
        // a scene with a single horizontal ramp: D is real and positive, so
        // every F_m equals |D| and the absolute parts equal pooled |D| rings
        let plane = RealPlane::from_fn(10, 10, |x, _| x as f64);
        let cube = HyperCube::from_planes(&[plane]).unwrap();
        let layout = FifLayout::new(3, vec![1, 2], 1.0).unwrap();
        let x = extract_fif(&cube, &BandGrouping::single(1), &layout).unwrap();
        let cols = layout.columns(1);
        assert_eq!(x.cols(), cols.len());
        for (j, c) in cols.iter().enumerate() {
            if c.part == FifPart::Magnitude {
                // interior gradient is exactly 1
                assert!((x.get(55, j) - 1.0).abs() < 1e-12, "{c:?}");
            }
        }
    }
}
