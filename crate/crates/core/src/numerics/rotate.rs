//! Image rotation used to probe rotation invariance.
//!
//! Rotations are counterclockwise as seen on screen (row index grows
//! downward). A rotation by `g` therefore adds `g` to the mathematical
//! (y-up) angle of every gradient vector.

use std::ops::{Add, Mul};

use super::plane::Plane;
use crate::error::{IapError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// Lossless pixel permutation; only multiples of 90°.
    Exact90,
    Bilinear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationOp {
    pub degrees: f64,
    pub interpolation: Interpolation,
}

impl RotationOp {
    pub fn exact(degrees: f64) -> Self {
        Self {
            degrees,
            interpolation: Interpolation::Exact90,
        }
    }

    pub fn bilinear(degrees: f64) -> Self {
        Self {
            degrees,
            interpolation: Interpolation::Bilinear,
        }
    }

    /// Number of quarter turns in `0..4`, or `None` if not a multiple of 90°.
    pub fn quarter_turns(&self) -> Option<usize> {
        let q = self.degrees / 90.0;
        if (q - q.round()).abs() > 1e-9 {
            return None;
        }
        Some((q.round() as i64).rem_euclid(4) as usize)
    }

    /// Destination of source pixel `(x, y)` under an exact rotation of a
    /// `width × height` plane.
    pub fn map_exact(&self, x: usize, y: usize, width: usize, height: usize) -> Option<(usize, usize)> {
        let turns = self.quarter_turns()?;
        let (mut x, mut y, mut w, mut h) = (x, y, width, height);
        for _ in 0..turns {
            let nx = y;
            let ny = w - 1 - x;
            x = nx;
            y = ny;
            std::mem::swap(&mut w, &mut h);
        }
        Some((x, y))
    }
}

pub fn rotate_plane<T>(plane: &Plane<T>, op: RotationOp) -> Result<Plane<T>>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    match op.interpolation {
        Interpolation::Exact90 => {
            let turns = op.quarter_turns().ok_or_else(|| {
                IapError::invalid(format!(
                    "exact rotation needs a multiple of 90 degrees, got {}",
                    op.degrees
                ))
            })?;
            let mut out = plane.clone();
            for _ in 0..turns {
                out = quarter_turn(&out);
            }
            Ok(out)
        }
        Interpolation::Bilinear => Ok(rotate_bilinear(plane, op.degrees)),
    }
}

fn quarter_turn<T: Copy>(p: &Plane<T>) -> Plane<T> {
    let (w, h) = (p.width(), p.height());
    // Destination is h wide and w tall; source (x, y) lands on (y, w-1-x).
    Plane::from_fn(h, w, |nx, ny| p.get(w - 1 - ny, nx))
}

fn rotate_bilinear<T>(p: &Plane<T>, degrees: f64) -> Plane<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let (w, h) = (p.width(), p.height());
    let (s, c) = degrees.to_radians().sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    Plane::from_fn(w, h, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        // inverse of the screen-counterclockwise rotation
        let sx = c * dx - s * dy + cx;
        let sy = s * dx + c * dy + cy;
        sample_bilinear(p, sx, sy)
    })
}

/// Bilinear sample of the reflect-extended plane.
pub fn sample_bilinear<T>(p: &Plane<T>, x: f64, y: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (xi, yi) = (x0 as isize, y0 as isize);
    let a = p.get_reflect(xi, yi);
    let b = p.get_reflect(xi + 1, yi);
    let c = p.get_reflect(xi, yi + 1);
    let d = p.get_reflect(xi + 1, yi + 1);
    a * ((1.0 - fx) * (1.0 - fy)) + b * (fx * (1.0 - fy)) + c * ((1.0 - fx) * fy) + d * (fx * fy)
}
