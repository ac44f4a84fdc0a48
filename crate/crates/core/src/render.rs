//! Class maps as 8-bit color images. Class 0 (unlabeled) is black; other
//! classes get fixed colors, so a map renders identically on every run.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{IapError, Result};
use crate::io_util::write_atomic;

pub const MAX_CLASSES: u32 = 255;

const BASE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
];

/// Color of a class id. Ids past the fixed table walk the hue circle by the
/// golden angle.
pub fn palette(class: u32) -> [u8; 3] {
    if class == 0 {
        return [0, 0, 0];
    }
    let i = class as usize - 1;
    if i < BASE.len() {
        return BASE[i];
    }
    let hue = (i as f64 * 137.507_764) % 360.0;
    let band = (i / 7) % 3;
    let value = [0.95, 0.75, 0.55][band];
    hsv(hue, 0.8, value)
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
    let q = |t: f64| ((t + m) * 255.0).round().clamp(1.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Row-major RGBA bytes of a class map.
pub fn render_rgba(labels: &[u32], width: usize, height: usize) -> Result<Vec<u8>> {
    check(labels, width, height)?;
    let mut out = Vec::with_capacity(labels.len() * 4);
    for &l in labels {
        let [r, g, b] = palette(l);
        out.extend_from_slice(&[r, g, b, 255]);
    }
    Ok(out)
}

fn check(labels: &[u32], width: usize, height: usize) -> Result<()> {
    if labels.len() != width * height {
        return Err(IapError::dims(format!(
            "{} labels for a {width}x{height} map",
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > MAX_CLASSES) {
        return Err(IapError::invalid(format!(
            "class id {l} exceeds the {MAX_CLASSES}-class palette"
        )));
    }
    Ok(())
}

pub fn render_image(labels: &[u32], width: usize, height: usize) -> Result<RgbImage> {
    check(labels, width, height)?;
    let mut img = RgbImage::new(width as u32, height as u32);
    for (i, &l) in labels.iter().enumerate() {
        img.put_pixel((i % width) as u32, (i / width) as u32, image::Rgb(palette(l)));
    }
    Ok(img)
}

/// Encoded PNG bytes of a class map.
pub fn render_png(labels: &[u32], width: usize, height: usize) -> Result<Vec<u8>> {
    let img = render_image(labels, width, height)?;
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| IapError::Numeric(format!("PNG encoding failed: {e}")))?;
    Ok(buf.into_inner())
}

pub fn save_png(labels: &[u32], width: usize, height: usize, path: &Path) -> Result<()> {
    write_atomic(path, &render_png(labels, width, height)?)
}
