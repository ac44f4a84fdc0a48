//! Browser demo: how FIFs and orientation histograms react to rotation, what
//! the superpixel stage sees, and what the steerable ring kernels look like.
//!
//! Every export has a plain Rust counterpart so the logic is testable natively.

use iap_core::baseline::extract_histogram_baseline;
use iap_core::cube_io::synth::{generate_synthetic, rotation_benchmark, smooth_cube};
use iap_core::cube_io::{FeatureMatrix, HyperCube};
use iap_core::fif::{extract_fif, FifLayout};
use iap_core::grouping::BandGrouping;
use iap_core::numerics::kernel::make_angular_kernel;
use iap_core::numerics::rotate::sample_bilinear;
use iap_core::numerics::{rotate_plane, RealPlane, RotationOp};
use iap_core::sif::{pca3, slic, SlicParams};
use wasm_bindgen::prelude::*;

const SCENE: usize = 48;
const BANDS: usize = 4;
const RADII: [usize; 3] = [2, 4, 6];

/// Row-major RGBA pixels.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct RgbaImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

#[wasm_bindgen]
impl RgbaImage {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }
}

fn js(e: iap_core::IapError) -> JsError {
    JsError::new(&e.to_string())
}

/// Relative mean deviation of FIF and histogram features under a bilinear
/// rotation of a smooth random scene, as `[fif, histogram]`. Rotated
/// features are compared with the original features sampled at each
/// pixel's pre-image, inside a disk clear of the borders.
pub fn deviation_under_rotation(seed: u64, degrees: f64) -> iap_core::Result<[f64; 2]> {
    let cube = smooth_cube(SCENE, SCENE, BANDS, seed)?;
    let planes = cube
        .planes()
        .iter()
        .map(|p| rotate_plane(p, RotationOp::bilinear(degrees)))
        .collect::<iap_core::Result<Vec<_>>>()?;
    let rotated = HyperCube::from_planes(&planes)?;
    let grouping = BandGrouping::from_assignment(vec![0, 0, 1, 1])?;
    let layout = FifLayout::with_default_width(4, RADII.to_vec())?;
    let fif = relative_deviation(
        &extract_fif(&cube, &grouping, &layout)?,
        &extract_fif(&rotated, &grouping, &layout)?,
        degrees,
    )?;
    let hist = relative_deviation(
        &extract_histogram_baseline(&cube, &grouping, &RADII)?,
        &extract_histogram_baseline(&rotated, &grouping, &RADII)?,
        degrees,
    )?;
    Ok([fif, hist])
}

fn relative_deviation(orig: &FeatureMatrix, rot: &FeatureMatrix, degrees: f64) -> iap_core::Result<f64> {
    let n = SCENE;
    let (s, c) = degrees.to_radians().sin_cos();
    let center = (n as f64 - 1.0) / 2.0;
    let keep = n as f64 / 2.0 - (RADII[2] + 4) as f64;
    let mut pixels = Vec::new();
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 - center, y as f64 - center);
            if dx.hypot(dy) <= keep {
                pixels.push((y * n + x, c * dx - s * dy + center, s * dx + c * dy + center));
            }
        }
    }
    let (mut diff, mut mag) = (0.0, 0.0);
    for j in 0..orig.cols() {
        let plane = RealPlane::new(n, n, orig.column(j))?;
        for &(i, sx, sy) in &pixels {
            let want = sample_bilinear(&plane, sx, sy);
            diff += (rot.get(i, j) - want).abs();
            mag += want.abs();
        }
    }
    Ok(if mag > 0.0 { diff / mag } else { 0.0 })
}

/// False-color view of a rotated-duplicate scene (its first three principal
/// components) with superpixel boundaries drawn in white.
pub fn superpixel_view(seed: u64, segments: usize, compactness: f64) -> iap_core::Result<RgbaImage> {
    let spec = rotation_benchmark(4, 12, 0.03, seed);
    let (cube, _, _) = generate_synthetic(&spec, seed)?;
    let planes = pca3(&cube)?;
    let params = SlicParams {
        segments: segments.max(1),
        compactness,
        max_iter: 10,
    };
    let map = slic(&planes, &params)?;
    let (w, h) = (cube.width(), cube.height());
    let ids = map.ids();
    let mut pixels = Vec::with_capacity(w * h * 4);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let edge = (x + 1 < w && ids[i + 1] != ids[i]) || (y + 1 < h && ids[i + w] != ids[i]);
            if edge {
                pixels.extend_from_slice(&[255, 255, 255, 255]);
            } else {
                for p in &planes {
                    pixels.push((p.get(x, y).clamp(0.0, 1.0) * 255.0).round() as u8);
                }
                pixels.push(255);
            }
        }
    }
    Ok(RgbaImage {
        width: w as u32,
        height: h as u32,
        pixels,
    })
}

/// A ring kernel drawn with hue for phase and brightness for magnitude,
/// each tap blown up to a `scale × scale` block.
pub fn kernel_view(order: i32, radius: usize, width: f64, scale: usize) -> iap_core::Result<RgbaImage> {
    let k = make_angular_kernel(order, radius, width)?;
    let side = k.side();
    let scale = scale.clamp(1, 64);
    let peak = k
        .taps()
        .iter()
        .map(|t| t.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let size = side * scale;
    let mut pixels = Vec::with_capacity(size * size * 4);
    for py in 0..size {
        for px in 0..size {
            let t = k.taps()[(py / scale) * side + px / scale];
            let hue = (t.arg().to_degrees() + 360.0) % 360.0;
            let [r, g, b] = hsv(hue, 0.85, t.norm() / peak);
            pixels.extend_from_slice(&[r, g, b, 255]);
        }
    }
    Ok(RgbaImage {
        width: size as u32,
        height: size as u32,
        pixels,
    })
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

#[wasm_bindgen(js_name = rotationDeviation)]
pub fn rotation_deviation(seed: u32, degrees: f64) -> Result<Vec<f64>, JsError> {
    deviation_under_rotation(seed as u64, degrees)
        .map(|d| d.to_vec())
        .map_err(js)
}

#[wasm_bindgen(js_name = superpixels)]
pub fn superpixels(seed: u32, segments: u32, compactness: f64) -> Result<RgbaImage, JsError> {
    superpixel_view(seed as u64, segments as usize, compactness).map_err(js)
}

#[wasm_bindgen(js_name = ringKernel)]
pub fn ring_kernel(order: i32, radius: u32, width: f64, scale: u32) -> Result<RgbaImage, JsError> {
    kernel_view(order, radius as usize, width, scale as usize).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fif_beats_histograms_at_small_angles() {
        let [fif, hist] = deviation_under_rotation(3, 15.0).unwrap();
        assert!(fif < hist, "fif {fif} histogram {hist}");
    }

    #[test]
    fn no_rotation_no_deviation() {
        let [fif, hist] = deviation_under_rotation(1, 0.0).unwrap();
        assert!(fif < 1e-12 && hist < 1e-12);
    }

    #[test]
    fn superpixel_view_has_boundaries() {
        let img = superpixel_view(2, 24, 0.1).unwrap();
        assert_eq!(img.pixels.len(), (img.width * img.height * 4) as usize);
        let white = img.pixels.chunks(4).filter(|p| p == &[255, 255, 255, 255]).count();
        assert!(white > 0 && white < (img.width * img.height) as usize / 2);
    }

    #[test]
    fn kernel_view_size_and_dark_center() {
        let img = kernel_view(2, 3, 2.0, 4).unwrap();
        assert_eq!(img.width, 9 * 4);
        let c = (img.width / 2) as usize;
        let i = (c * img.width as usize + c) * 4;
        assert_eq!(&img.pixels[i..i + 3], &[0, 0, 0]);
        assert!(kernel_view(1, 0, 2.0, 4).is_err());
    }
}
