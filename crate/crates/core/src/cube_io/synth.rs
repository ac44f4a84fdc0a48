//! Deterministic synthetic scenes.
//!
//! A scene is a background spectrum plus labeled shapes, each carrying a class
//! signature and optionally an oriented stripe texture. Transforms stamp rigid
//! copies (shift + rotation about the shape's center) of existing shapes; the
//! copies keep the class of their source. Originals form the training split
//! and copies form the test split.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{HyperCube, LabelMap, SampleSet};
use crate::error::{IapError, Result};
use crate::numerics::plane::RealPlane;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Texture {
    /// Relative modulation depth.
    pub amplitude: f64,
    /// Stripe period in pixels.
    pub period: f64,
    /// Stripe normal direction, degrees.
    #[serde(default)]
    pub angle: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub signature: Vec<f64>,
    #[serde(default)]
    pub texture: Option<Texture>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    /// Pixels `x..x+w` by `y..y+h`.
    Rect {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
    },
    Disk {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Polygon {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
// `deny_unknown_fields` does not combine with `flatten`; the shape enum rejects strays.
pub struct ShapeSpec {
    pub class: u32,
    #[serde(flatten)]
    pub shape: Shape,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    /// Index into `shapes`.
    pub shape: usize,
    #[serde(default)]
    pub dx: f64,
    #[serde(default)]
    pub dy: f64,
    /// Screen-counterclockwise rotation about the shape center, degrees.
    #[serde(default)]
    pub angle: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub background: Option<Vec<f64>>,
    pub classes: Vec<ClassSpec>,
    #[serde(default)]
    pub shapes: Vec<ShapeSpec>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
}

impl Shape {
    /// Membership of a continuous point; pixel `(i, j)` covers
    /// `[i - 0.5, i + 0.5) × [j - 0.5, j + 0.5)`.
    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Rect { x: x0, y: y0, w, h } => {
                let (x0, y0) = (*x0 as f64 - 0.5, *y0 as f64 - 0.5);
                x >= x0 && x < x0 + *w as f64 && y >= y0 && y < y0 + *h as f64
            }
            Shape::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape::Polygon { points } => {
                let mut inside = false;
                let n = points.len();
                for i in 0..n {
                    let [xi, yi] = points[i];
                    let [xj, yj] = points[(i + n - 1) % n];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }

    /// Continuous bounding box `(xmin, ymin, xmax, ymax)`.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Rect { x, y, w, h } => (
                *x as f64 - 0.5,
                *y as f64 - 0.5,
                (*x + *w) as f64 - 0.5,
                (*y + *h) as f64 - 0.5,
            ),
            Shape::Disk { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Shape::Polygon { points } => points.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |b, p| (b.0.min(p[0]), b.1.min(p[1]), b.2.max(p[0]), b.3.max(p[1])),
            ),
        }
    }

    /// Rotation pivot: the bounding-box center.
    pub fn center(&self) -> (f64, f64) {
        let b = self.bounds();
        ((b.0 + b.2) / 2.0, (b.1 + b.3) / 2.0)
    }

    /// Pixels whose centers fall inside the shape.
    pub fn pixels(&self, width: usize, height: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if self.contains(x as f64, y as f64) {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

/// `(sin, cos)` with exact values at multiples of 90°.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let q = deg / 90.0;
    if (q - q.round()).abs() < 1e-12 {
        match (q.round() as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

struct Placement<'a> {
    shape: &'a Shape,
    class: u32,
    center: (f64, f64),
    shift: (f64, f64),
    sin: f64,
    cos: f64,
    duplicate: bool,
}

impl Placement<'_> {
    /// Source-frame coordinate of destination pixel `(x, y)`.
    fn source(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.center.0 - self.shift.0;
        let dy = y - self.center.1 - self.shift.1;
        (
            self.cos * dx - self.sin * dy + self.center.0,
            self.sin * dx + self.cos * dy + self.center.1,
        )
    }

    fn forward(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (
            self.cos * dx + self.sin * dy + self.center.0 + self.shift.0,
            -self.sin * dx + self.cos * dy + self.center.1 + self.shift.1,
        )
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.bands == 0 {
            return Err(IapError::invalid("scene dimensions must be positive"));
        }
        if self.num_classes > self.classes.len() {
            return Err(IapError::invalid(format!(
                "{} classes requested but only {} signatures given",
                self.num_classes,
                self.classes.len()
            )));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if c.signature.len() != self.bands {
                return Err(IapError::invalid(format!(
                    "signature {i} has {} bands, scene has {}",
                    c.signature.len(),
                    self.bands
                )));
            }
        }
        if let Some(bg) = &self.background {
            if bg.len() != self.bands {
                return Err(IapError::invalid("background spectrum has the wrong band count"));
            }
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return Err(IapError::invalid("noise must be non-negative"));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if s.class == 0 || s.class as usize > self.num_classes {
                return Err(IapError::invalid(format!(
                    "shape {i} has class {} outside 1..={}",
                    s.class, self.num_classes
                )));
            }
            let b = s.shape.bounds();
            if b.0 < -0.5 || b.1 < -0.5 || b.2 > self.width as f64 - 0.5 || b.3 > self.height as f64 - 0.5 {
                return Err(IapError::invalid(format!("shape {i} exceeds the image bounds")));
            }
        }
        for (i, t) in self.transforms.iter().enumerate() {
            let Some(src) = self.shapes.get(t.shape) else {
                return Err(IapError::invalid(format!(
                    "transform {i} references missing shape {}",
                    t.shape
                )));
            };
            let p = self.placement(src, t);
            for (x, y) in src.shape.pixels(self.width, self.height) {
                let (fx, fy) = p.forward(x as f64, y as f64);
                let (fx, fy) = (fx.round(), fy.round());
                if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
                    return Err(IapError::invalid(format!(
                        "transformed copy {i} exceeds the image bounds"
                    )));
                }
            }
        }
        Ok(())
    }

    fn placement<'a>(&self, spec: &'a ShapeSpec, t: &TransformSpec) -> Placement<'a> {
        let (sin, cos) = sin_cos_deg(t.angle);
        Placement {
            shape: &spec.shape,
            class: spec.class,
            center: spec.shape.center(),
            shift: (t.dx, t.dy),
            sin,
            cos,
            duplicate: true,
        }
    }

    /// Pixel set covered by transformed copy `t`.
    pub fn copy_pixels(&self, t: &TransformSpec) -> Vec<(usize, usize)> {
        let p = self.placement(&self.shapes[t.shape], t);
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, sy) = p.source(x as f64, y as f64);
                if p.shape.contains(sx, sy) {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

/// Renders the scene. Identical `(spec, seed)` give bit-identical output.
pub fn generate_synthetic(spec: &SceneSpec, seed: u64) -> Result<(HyperCube, LabelMap, SampleSet)> {
    spec.validate()?;
    let (w, h, d) = (spec.width, spec.height, spec.bands);
    let n = w * h;
    let background = spec.background.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut data = vec![0.0; n * d];
    for (b, &v) in background.iter().enumerate() {
        data[b * n..(b + 1) * n].fill(v);
    }
    let mut labels = vec![0i64; n];
    // 0 = background, 1 = original, 2 = copy
    let mut role = vec![0u8; n];

    let mut placements: Vec<Placement> = spec
        .shapes
        .iter()
        .map(|s| Placement {
            shape: &s.shape,
            class: s.class,
            center: s.shape.center(),
            shift: (0.0, 0.0),
            sin: 0.0,
            cos: 1.0,
            duplicate: false,
        })
        .collect();
    placements.extend(spec.transforms.iter().map(|t| spec.placement(&spec.shapes[t.shape], t)));

    for p in &placements {
        let class = &spec.classes[p.class as usize - 1];
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = p.source(x as f64, y as f64);
                if !p.shape.contains(sx, sy) {
                    continue;
                }
                let modulation = class.texture.as_ref().map_or(1.0, |t| {
                    let (s, c) = t.angle.to_radians().sin_cos();
                    let along = (sx - p.center.0) * c + (sy - p.center.1) * s;
                    1.0 + t.amplitude * (2.0 * PI * along / t.period).sin()
                });
                let i = y * w + x;
                for b in 0..d {
                    data[b * n + i] = class.signature[b] * modulation;
                }
                labels[i] = p.class as i64;
                role[i] = if p.duplicate { 2 } else { 1 };
            }
        }
    }

    if spec.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, spec.noise).map_err(|e| IapError::invalid(e.to_string()))?;
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let cube = HyperCube::new(w, h, d, data)?;
    let label_map = LabelMap::from_raw(w, h, &labels)?;
    let mut samples = SampleSet::default();
    for (i, r) in role.iter().enumerate().take(n) {
        let class = label_map.labels()[i];
        match r {
            1 => samples.train.push((i, class)),
            2 => samples.test.push((i, class)),
            _ => {}
        }
    }
    Ok((cube, label_map, samples))
}

/// Rotated-duplicate benchmark: one textured square per class along the top
/// row (training), and rotated, shifted copies of each below it (testing).
/// Class spectra differ only slightly relative to the noise, so the spatial
/// blocks carry most of the discriminative signal.
pub fn rotation_benchmark(classes: usize, bands: usize, noise: f64, seed: u64) -> SceneSpec {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const CELL: usize = 24;
    const SIDE: usize = 14;
    const COPY_ROWS: usize = 3;
    let (width, height) = (classes * CELL, (COPY_ROWS + 1) * CELL);
    let base: Vec<f64> = (0..bands)
        .map(|b| 0.5 + 0.25 * (b as f64 / bands.max(2) as f64 * PI).sin())
        .collect();
    let class_specs = (0..classes)
        .map(|c| {
            let tilt = rng.random_range(-1.0..1.0);
            let signature = base
                .iter()
                .enumerate()
                .map(|(b, v)| v + 0.04 * tilt * (b as f64 / bands as f64 - 0.5) + 0.02 * rng.random_range(-1.0..1.0))
                .collect();
            ClassSpec {
                signature,
                texture: Some(Texture {
                    amplitude: 0.35,
                    period: 3.0 + 1.5 * (c % 4) as f64,
                    angle: rng.random_range(0.0..180.0),
                }),
            }
        })
        .collect();
    let off = (CELL - SIDE) / 2;
    let shapes: Vec<ShapeSpec> = (0..classes)
        .map(|c| ShapeSpec {
            class: c as u32 + 1,
            shape: Shape::Rect {
                x: c * CELL + off,
                y: off,
                w: SIDE,
                h: SIDE,
            },
        })
        .collect();
    let mut transforms = Vec::new();
    for row in 1..=COPY_ROWS {
        // each row holds a shuffled copy of every class
        let mut order: Vec<usize> = (0..classes).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for (slot, &c) in order.iter().enumerate() {
            transforms.push(TransformSpec {
                shape: c,
                dx: (slot as f64 - c as f64) * CELL as f64,
                dy: (row * CELL) as f64,
                angle: rng.random_range(0.0..360.0),
            });
        }
    }
    SceneSpec {
        width,
        height,
        bands,
        num_classes: classes,
        noise,
        background: Some(base.iter().map(|v| v * 0.8).collect()),
        classes: class_specs,
        shapes,
        transforms,
    }
}

/// Smooth random cube: each band is a sum of a few broad Gaussian bumps.
pub fn smooth_cube(width: usize, height: usize, bands: usize, seed: u64) -> Result<HyperCube> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = width.min(height) as f64;
    let planes: Vec<RealPlane> = (0..bands)
        .map(|_| {
            let bumps: Vec<(f64, f64, f64, f64)> = (0..6)
                .map(|_| {
                    (
                        rng.random_range(0.0..width as f64),
                        rng.random_range(0.0..height as f64),
                        rng.random_range(0.06..0.16) * scale,
                        rng.random_range(0.5..1.5),
                    )
                })
                .collect();
            RealPlane::from_fn(width, height, |x, y| {
                bumps
                    .iter()
                    .map(|&(cx, cy, s, a)| {
                        let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                        a * (-r2 / (2.0 * s * s)).exp()
                    })
                    .sum()
            })
        })
        .collect();
    HyperCube::from_planes(&planes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_class(noise: f64) -> SceneSpec {
        SceneSpec {
            width: 8,
            height: 6,
            bands: 3,
            num_classes: 1,
            noise,
            background: Some(vec![1.0, 2.0, 3.0]),
            classes: vec![ClassSpec {
                signature: vec![1.0, 2.0, 3.0],
                texture: None,
            }],
            shapes: vec![ShapeSpec {
                class: 1,
                shape: Shape::Rect { x: 1, y: 1, w: 3, h: 2 },
            }],
            transforms: vec![],
        }
    }

    #[test]
    fn noiseless_single_class_is_constant() {
        let (cube, labels, samples) = generate_synthetic(&one_class(0.0), 1).unwrap();
        for b in 0..3 {
            assert!(cube.band(b).iter().all(|&v| v == (b + 1) as f64));
        }
        assert!(labels.labels().iter().all(|&l| l <= 1));
        assert_eq!(labels.labeled_count(), 6);
        assert_eq!(samples.train.len(), 6);
        assert!(samples.test.is_empty());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = one_class(0.5);
        let a = generate_synthetic(&spec, 42).unwrap();
        let b = generate_synthetic(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&spec, 43).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn quarter_turn_copy_is_the_integer_rotated_set() {
        let mut spec = one_class(0.0);
        spec.width = 20;
        spec.height = 12;
        spec.background = None;
        // 3x3 square centered at (3, 3); rotate by 90 about it and shift 10 right
        spec.shapes[0].shape = Shape::Polygon {
            points: vec![[1.6, 1.6], [4.4, 1.6], [4.4, 2.6], [2.6, 2.6], [2.6, 4.4], [1.6, 4.4]],
        };
        spec.transforms.push(TransformSpec {
            shape: 0,
            dx: 10.0,
            dy: 2.0,
            angle: 90.0,
        });
        let (_, labels, samples) = generate_synthetic(&spec, 0).unwrap();
        let original = spec.shapes[0].shape.pixels(20, 12);
        let c = spec.shapes[0].shape.center();
        // oracle: integer coordinate rotation (x, y) -> (y', -x') about the center
        let mut expected: Vec<(usize, usize)> = original
            .iter()
            .map(|&(x, y)| {
                let (dx, dy) = (x as f64 - c.0, y as f64 - c.1);
                ((dy + c.0 + 10.0) as usize, (-dx + c.1 + 2.0) as usize)
            })
            .collect();
        expected.sort_by_key(|&(x, y)| (y, x));
        let got: Vec<(usize, usize)> = samples.test.iter().map(|&(i, _)| (i % 20, i / 20)).collect();
        assert_eq!(got, expected);
        assert!(samples.test.iter().all(|&(i, cl)| cl == 1 && labels.labels()[i] == 1));
        assert_eq!(original.len(), 5);
    }

    #[test]
    fn too_many_classes_is_an_error() {
        let mut spec = one_class(0.0);
        spec.num_classes = 2;
        assert!(generate_synthetic(&spec, 0).is_err());
    }

    #[test]
    fn out_of_bounds_shapes_are_errors() {
        let mut spec = one_class(0.0);
        spec.shapes[0].shape = Shape::Rect { x: 6, y: 0, w: 3, h: 1 };
        assert!(generate_synthetic(&spec, 0).is_err());
        let mut spec = one_class(0.0);
        spec.transforms.push(TransformSpec {
            shape: 0,
            dx: 6.0,
            dy: 0.0,
            angle: 0.0,
        });
        assert!(generate_synthetic(&spec, 0).is_err());
    }

    #[test]
    fn splits_are_disjoint() {
        let mut spec = one_class(0.1);
        spec.width = 16;
        spec.transforms.push(TransformSpec {
            shape: 0,
            dx: 8.0,
            dy: 1.0,
            angle: 180.0,
        });
        let (cube, _, samples) = generate_synthetic(&spec, 3).unwrap();
        samples.validate(cube.pixels()).unwrap();
        assert_eq!(samples.test.len(), 6);
    }
}
