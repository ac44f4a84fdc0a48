//! SLIC superpixels on a three-channel image.

use std::collections::VecDeque;

use crate::cube_io::LabelMap;
use crate::error::{IapError, Result};
use crate::numerics::plane::RealPlane;

#[derive(Clone, Debug, PartialEq)]
pub struct SlicParams {
    /// Target number of segments.
    pub segments: usize,
    pub compactness: f64,
    pub max_iter: usize,
}

impl SlicParams {
    /// Defaults for a `width × height` scene: one segment per ~256 pixels.
    pub fn for_scene(width: usize, height: usize) -> Self {
        Self {
            segments: (width * height).div_ceil(256).max(1),
            compactness: DEFAULT_COMPACTNESS,
            max_iter: 10,
        }
    }
}

/// Colour channels are the rescaled principal components in `[0, 1]`.
pub const DEFAULT_COMPACTNESS: f64 = 0.1;

/// Partition of the image into 4-connected segments `0..Q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperpixelMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
    sizes: Vec<usize>,
}

impl SuperpixelMap {
    /// Wraps arbitrary per-pixel ids, renumbering them in scan order.
    pub fn from_ids(width: usize, height: usize, ids: &[u32]) -> Result<Self> {
        if ids.len() != width * height || ids.is_empty() {
            return Err(IapError::dims("segment ids do not match the raster"));
        }
        let mut map = std::collections::HashMap::new();
        let mut out = Vec::with_capacity(ids.len());
        let mut sizes = Vec::new();
        for &id in ids {
            let next = map.len() as u32;
            let s = *map.entry(id).or_insert(next);
            if s as usize == sizes.len() {
                sizes.push(0);
            }
            sizes[s as usize] += 1;
            out.push(s);
        }
        Ok(Self {
            width,
            height,
            ids: out,
            sizes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// True when every segment is a single 4-connected component.
    pub fn is_connected(&self) -> bool {
        let (comp, _) = components(&self.ids, self.width, self.height);
        let n_comp = comp.iter().max().map_or(0, |m| m + 1);
        n_comp == self.count()
    }

    /// Segment ids shifted by one, so they fit the label-raster convention
    /// where 0 means unlabeled.
    pub fn to_label_map(&self) -> LabelMap {
        let labels = self.ids.iter().map(|&i| i + 1).collect();
        LabelMap::from_classes(self.width, self.height, labels).expect("contiguous ids")
    }
}

#[derive(Clone, Copy, Debug)]
struct Center {
    x: f64,
    y: f64,
    color: [f64; 3],
}

fn color_at(planes: &[RealPlane; 3], i: usize) -> [f64; 3] {
    [planes[0].data()[i], planes[1].data()[i], planes[2].data()[i]]
}

fn color_dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn gradient2(planes: &[RealPlane; 3], x: usize, y: usize) -> f64 {
    let (xi, yi) = (x as isize, y as isize);
    planes
        .iter()
        .map(|p| {
            let gx = p.get_reflect(xi + 1, yi) - p.get_reflect(xi - 1, yi);
            let gy = p.get_reflect(xi, yi + 1) - p.get_reflect(xi, yi - 1);
            gx * gx + gy * gy
        })
        .sum()
}

/// Segments the image. Centers start on a regular grid of spacing
/// `S = √(N/K)` (`round(W/S)` columns, `round(K/columns)` rows) and, when the grid step is at least 3 pixels, move to the
/// lowest-gradient pixel of their 3×3 neighborhood. Each round assigns every
/// pixel within `2S` of a center to the center minimizing
/// `d_color² + (d_xy / S)² · compactness²`, then moves centers to the mean of
/// their pixels. Finally, fragments disconnected from the main body of their
/// segment are merged into the largest adjacent segment.
pub fn slic(planes: &[RealPlane; 3], params: &SlicParams) -> Result<SuperpixelMap> {
    let (w, h) = (planes[0].width(), planes[0].height());
    if planes.iter().any(|p| p.width() != w || p.height() != h) {
        return Err(IapError::dims("SLIC channels differ in size"));
    }
    let n = w * h;
    if params.segments == 0 || params.segments > n {
        return Err(IapError::invalid(format!(
            "segment count {} must lie in 1..={n}",
            params.segments
        )));
    }
    if params.compactness.is_nan() || params.compactness <= 0.0 {
        return Err(IapError::invalid("compactness must be positive"));
    }
    let step = (n as f64 / params.segments as f64).sqrt();
    let cols = ((w as f64 / step).round() as usize).clamp(1, w);
    let rows = ((params.segments as f64 / cols as f64).round() as usize).clamp(1, h);
    let (cell_w, cell_h) = (w as f64 / cols as f64, h as f64 / rows as f64);
    let perturb = cell_w >= 3.0 && cell_h >= 3.0;

    let mut centers = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut x = (((c as f64 + 0.5) * cell_w - 0.5).round() as usize).min(w - 1);
            let mut y = (((r as f64 + 0.5) * cell_h - 0.5).round() as usize).min(h - 1);
            if perturb {
                let mut best = gradient2(planes, x, y);
                let (x0, y0) = (x, y);
                for ny in y0.saturating_sub(1)..=(y0 + 1).min(h - 1) {
                    for nx in x0.saturating_sub(1)..=(x0 + 1).min(w - 1) {
                        let g = gradient2(planes, nx, ny);
                        if g < best {
                            best = g;
                            x = nx;
                            y = ny;
                        }
                    }
                }
            }
            centers.push(Center {
                x: x as f64,
                y: y as f64,
                color: color_at(planes, y * w + x),
            });
        }
    }

    let spatial_weight = (params.compactness / step).powi(2);
    let window = (2.0 * step).ceil() as isize;
    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.max_iter.max(1) {
        labels.fill(u32::MAX);
        dist.fill(f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
            let y_lo = (cy - window).max(0) as usize;
            let y_hi = ((cy + window) as usize).min(h - 1);
            let x_lo = (cx - window).max(0) as usize;
            let x_hi = ((cx + window) as usize).min(w - 1);
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let i = y * w + x;
                    let dxy = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = color_dist2(&color_at(planes, i), &c.color) + dxy * spatial_weight;
                    if d < dist[i] {
                        dist[i] = d;
                        labels[i] = k as u32;
                    }
                }
            }
        }
        // pixels outside every window go to the nearest center
        for (i, label) in labels.iter_mut().enumerate() {
            if *label == u32::MAX {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let col = color_at(planes, i);
                let mut best = (f64::INFINITY, 0);
                for (k, c) in centers.iter().enumerate() {
                    let d = color_dist2(&col, &c.color) + ((x - c.x).powi(2) + (y - c.y).powi(2)) * spatial_weight;
                    if d < best.0 {
                        best = (d, k);
                    }
                }
                *label = best.1 as u32;
            }
        }
        let mut acc = vec![[0.0f64; 6]; centers.len()];
        for i in 0..n {
            let a = &mut acc[labels[i] as usize];
            let col = color_at(planes, i);
            a[0] += (i % w) as f64;
            a[1] += (i / w) as f64;
            a[2] += col[0];
            a[3] += col[1];
            a[4] += col[2];
            a[5] += 1.0;
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a[5] > 0.0 {
                c.x = a[0] / a[5];
                c.y = a[1] / a[5];
                c.color = [a[2] / a[5], a[3] / a[5], a[4] / a[5]];
            }
        }
    }

    merge_orphans(&mut labels, w, h);
    SuperpixelMap::from_ids(w, h, &labels)
}

/// 4-connected components of equal labels; returns component id per pixel
/// and the label of each component.
fn components(labels: &[u32], w: usize, h: usize) -> (Vec<usize>, Vec<u32>) {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut comp_label = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let lab = labels[start];
        comp_label.push(lab);
        comp[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && labels[j] == lab {
                    comp[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }
    (comp, comp_label)
}

fn merge_orphans(labels: &mut [u32], w: usize, h: usize) {
    loop {
        let (comp, comp_label) = components(labels, w, h);
        let mut comp_size = vec![0usize; comp_label.len()];
        for &c in &comp {
            comp_size[c] += 1;
        }
        let max_label = comp_label.iter().copied().max().unwrap_or(0) as usize;
        let mut main = vec![usize::MAX; max_label + 1];
        let mut seg_size = vec![0usize; max_label + 1];
        for (c, &l) in comp_label.iter().enumerate() {
            let l = l as usize;
            seg_size[l] += comp_size[c];
            if main[l] == usize::MAX || comp_size[c] > comp_size[main[l]] {
                main[l] = c;
            }
        }
        let orphans: Vec<usize> = (0..comp_label.len())
            .filter(|&c| main[comp_label[c] as usize] != c)
            .collect();
        if orphans.is_empty() {
            return;
        }
        // neighbors of every orphan component: (is main, segment size, label)
        let mut best: Vec<Option<(bool, usize, u32)>> = vec![None; comp_label.len()];
        for i in 0..w * h {
            let c = comp[i];
            if main[comp_label[c] as usize] == c {
                continue;
            }
            let (x, y) = (i % w, i / w);
            let mut nbrs = [usize::MAX; 4];
            if x > 0 {
                nbrs[0] = i - 1;
            }
            if x + 1 < w {
                nbrs[1] = i + 1;
            }
            if y > 0 {
                nbrs[2] = i - w;
            }
            if y + 1 < h {
                nbrs[3] = i + w;
            }
            for j in nbrs.into_iter().filter(|&j| j != usize::MAX) {
                let nc = comp[j];
                if nc == c {
                    continue;
                }
                let nl = comp_label[nc];
                let cand = (main[nl as usize] == nc, seg_size[nl as usize], nl);
                let better = match best[c] {
                    None => true,
                    Some(b) => (cand.0, cand.1, std::cmp::Reverse(cand.2)) > (b.0, b.1, std::cmp::Reverse(b.2)),
                };
                if better {
                    best[c] = Some(cand);
                }
            }
        }
        let target: Vec<Option<u32>> = best.iter().map(|b| b.map(|b| b.2)).collect();
        let mut changed = false;
        for i in 0..w * h {
            if let Some(t) = target[comp[i]] {
                if orphans.binary_search(&comp[i]).is_ok() {
                    labels[i] = t;
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}
