use num_complex::Complex64;

use crate::error::{IapError, Result};

/// Square filter on the `(2r+1)²` offset grid, stored row-major by
/// `(v, u)` with `v` the row offset and `u` the column offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D<T> {
    radius: usize,
    order: i32,
    taps: Vec<T>,
}

pub type RealKernel = Kernel2D<f64>;
pub type ComplexKernel = Kernel2D<Complex64>;

/// Per-tap operations the convolution needs.
pub trait TapValue: Copy {
    fn is_finite_tap(&self) -> bool;
    fn is_zero_tap(&self) -> bool;
}

impl TapValue for f64 {
    fn is_finite_tap(&self) -> bool {
        self.is_finite()
    }
    fn is_zero_tap(&self) -> bool {
        *self == 0.0
    }
}

impl TapValue for Complex64 {
    fn is_finite_tap(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn is_zero_tap(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

impl<T: Copy> Kernel2D<T> {
    pub fn from_taps(radius: usize, order: i32, taps: Vec<T>) -> Result<Self> {
        let side = 2 * radius + 1;
        if taps.len() != side * side {
            return Err(IapError::dims(format!(
                "kernel of radius {radius} needs {} taps, got {}",
                side * side,
                taps.len()
            )));
        }
        Ok(Self { radius, order, taps })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Angular order `j`; zero for isotropic kernels.
    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn tap(&self, u: isize, v: isize) -> T {
        let r = self.radius as isize;
        let side = self.side() as isize;
        self.taps[((v + r) * side + (u + r)) as usize]
    }
}

/// Radial triangle `max(0, 1 - ρ/(r+1))`, normalized to unit sum.
pub fn make_isotropic_kernel(radius: usize) -> Result<RealKernel> {
    if radius == 0 {
        return Err(IapError::invalid("isotropic kernel radius must be >= 1"));
    }
    let r = radius as isize;
    let scale = radius as f64 + 1.0;
    let mut taps = Vec::with_capacity((2 * radius + 1).pow(2));
    for v in -r..=r {
        for u in -r..=r {
            let rho = ((u * u + v * v) as f64).sqrt();
            taps.push((1.0 - rho / scale).max(0.0));
        }
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Kernel2D::from_taps(radius, 0, taps)
}

/// Arithmetic mean of isotropic kernels at several radii, padded to the
/// largest radius. Convolving with it equals averaging the per-radius
/// responses.
pub fn mean_isotropic_kernel(radii: &[usize]) -> Result<RealKernel> {
    let Some(&max_r) = radii.iter().max() else {
        return Err(IapError::invalid("at least one radius is required"));
    };
    let side = 2 * max_r + 1;
    let mut taps = vec![0.0; side * side];
    for &r in radii {
        let k = make_isotropic_kernel(r)?;
        let off = max_r - r;
        for v in 0..k.side() {
            for u in 0..k.side() {
                taps[(v + off) * side + (u + off)] += k.taps[v * k.side() + u];
            }
        }
    }
    let n = radii.len() as f64;
    taps.iter_mut().for_each(|t| *t /= n);
    Kernel2D::from_taps(max_r, 0, taps)
}

/// Steerable ring kernel `T(ρ)·e^{ijφ}` with `T(ρ) = max(0, 1 - |ρ - r| / w)`
/// and `φ = atan2(v, u)` measured in raster offsets (row offset `v` grows
/// downward). Normalized so that `Σ|taps| = 1`; the origin tap is zero for
/// `j ≠ 0`.
pub fn make_angular_kernel(order: i32, radius: usize, width: f64) -> Result<ComplexKernel> {
    if radius == 0 {
        return Err(IapError::invalid("angular kernel radius must be >= 1"));
    }
    if !width.is_finite() || width < 1.0 {
        return Err(IapError::invalid("angular kernel ring width must be >= 1"));
    }
    let ring = radius as f64;
    // Support is ρ < r + w.
    let half = ((ring + width).ceil() as usize).saturating_sub(1).max(1);
    let h = half as isize;
    let mut taps = Vec::with_capacity((2 * half + 1).pow(2));
    for v in -h..=h {
        for u in -h..=h {
            let rho = ((u * u + v * v) as f64).sqrt();
            let profile = (1.0 - (rho - ring).abs() / width).max(0.0);
            let tap = if u == 0 && v == 0 {
                if order == 0 {
                    Complex64::new(profile, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else if order == 0 {
                Complex64::new(profile, 0.0)
            } else {
                let phi = (v as f64).atan2(u as f64);
                Complex64::from_polar(profile, order as f64 * phi)
            };
            taps.push(tap);
        }
    }
    let total: f64 = taps.iter().map(|t| t.norm()).sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Kernel2D::from_taps(half, order, taps)
}
