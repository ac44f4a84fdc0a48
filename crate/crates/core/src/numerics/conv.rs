use std::ops::{AddAssign, Mul};

use num_traits::Zero;

use super::kernel::{Kernel2D, TapValue};
use super::plane::{reflect_index, Plane};
use crate::error::{IapError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    #[default]
    Reflect,
    Zero,
}

/// Correlation-style filtering: `out(x, y) = Σ k(u, v) · p(x + u, y + v)`.
///
/// Each output pixel accumulates the nonzero taps in row-major offset order,
/// so the result does not depend on how callers split work across planes.
pub fn convolve2d<T, K>(
    plane: &Plane<T>,
    kernel: &Kernel2D<K>,
    boundary: Boundary,
) -> Result<Plane<<K as Mul<T>>::Output>>
where
    T: Copy + Zero,
    K: TapValue + Mul<T>,
    <K as Mul<T>>::Output: Copy + Zero + AddAssign,
{
    if let Some(i) = kernel.taps().iter().position(|t| !t.is_finite_tap()) {
        return Err(IapError::Numeric(format!("kernel tap {i} is not finite")));
    }
    let (w, h) = (plane.width(), plane.height());
    let r = kernel.radius();
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut padded = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let y = py as isize - r as isize;
        for px in 0..pw {
            let x = px as isize - r as isize;
            let inside = x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h;
            let v = match (inside, boundary) {
                (true, _) => plane.get(x as usize, y as usize),
                (false, Boundary::Zero) => T::zero(),
                (false, Boundary::Reflect) => plane.get(reflect_index(x, w), reflect_index(y, h)),
            };
            padded.push(v);
        }
    }

    let side = kernel.side();
    let taps: Vec<(usize, usize, K)> = kernel
        .taps()
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_zero_tap())
        .map(|(i, &t)| (i / side, i % side, t))
        .collect();

    let mut out = vec![<K as Mul<T>>::Output::zero(); w * h];
    for (y, row) in out.chunks_exact_mut(w).enumerate() {
        for &(dv, du, tap) in &taps {
            let src = &padded[(y + dv) * pw + du..(y + dv) * pw + du + w];
            for (o, &s) in row.iter_mut().zip(src) {
                *o += tap * s;
            }
        }
    }
    Plane::new(w, h, out)
}
