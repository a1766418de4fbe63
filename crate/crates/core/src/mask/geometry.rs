//! Overlap scores, 4-connected components, morphology and distance transforms
//! on [`BinaryMask`]s.

use std::collections::VecDeque;

use super::types::{BBox, BinaryMask};
use crate::error::{Error, Result};

/// `2|a∩b| / (|a|+|b|)`, or 1 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_count(b)?;
    let total = a.count() + b.count();
    Ok(if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 })
}

/// `|a∩b| / |a∪b|`, or 1 when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_count(b)?;
    let union = a.count() + b.count() - inter;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// 4-connected components ordered by their first pixel in row-major order.
pub fn connected_components(m: &BinaryMask) -> Vec<BinaryMask> {
    let (w, h) = m.dims();
    let mut label = vec![usize::MAX; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in m.indices() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = BinaryMask::empty(w, h);
        label[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            comp.set_index(i, true);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if m.bits()[j] && label[j] == usize::MAX {
                    label[j] = id;
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
        out.push(comp);
    }
    out
}

/// Tight box around set pixels using the pixel-extent convention: a pixel at
/// column `x` spans `[x/width, (x+1)/width]`.
pub fn bbox_of(m: &BinaryMask) -> Result<BBox> {
    let (w, h) = m.dims();
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for i in m.indices() {
        let (x, y) = (i % w, i / w);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x0 == usize::MAX {
        return Err(Error::invalid("bbox of an empty mask"));
    }
    BBox::new(x0 as f64 / w as f64, y0 as f64 / h as f64, (x1 + 1) as f64 / w as f64, (y1 + 1) as f64 / h as f64)
}

/// Set pixels having at least one unset 4-neighbour or touching the image border.
pub fn boundary(m: &BinaryMask) -> BinaryMask {
    let (w, h) = m.dims();
    let mut out = BinaryMask::empty(w, h);
    for i in m.indices() {
        let (x, y) = (i % w, i / w);
        let edge = x == 0
            || y == 0
            || x + 1 == w
            || y + 1 == h
            || !m.bits()[i - 1]
            || !m.bits()[i + 1]
            || !m.bits()[i - w]
            || !m.bits()[i + w];
        if edge {
            out.set_index(i, true);
        }
    }
    out
}

/// One step of 4-neighbourhood dilation (`grow = true`) or erosion.
fn morph_step(m: &BinaryMask, grow: bool) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        let here = m.get(x, y);
        let neigh = [
            (x > 0).then(|| m.get(x - 1, y)),
            (x + 1 < w).then(|| m.get(x + 1, y)),
            (y > 0).then(|| m.get(x, y - 1)),
            (y + 1 < h).then(|| m.get(x, y + 1)),
        ];
        if grow {
            here || neigh.contains(&Some(true))
        } else {
            // pixels outside the image count as unset
            here && neigh.iter().all(|n| *n == Some(true))
        }
    })
}

/// Dilates for positive `steps`, erodes for negative ones.
pub fn morph(m: &BinaryMask, steps: i32) -> BinaryMask {
    let mut out = m.clone();
    for _ in 0..steps.unsigned_abs() {
        out = morph_step(&out, steps > 0);
    }
    out
}

/// Squared Euclidean distance from each set pixel to the nearest unset pixel,
/// where everything outside the image counts as unset. Unset pixels get 0.
///
/// Separable exact transform (lower envelope of parabolas per row, then per column).
pub fn distance_to_boundary_sq(m: &BinaryMask) -> Vec<f64> {
    let (w, h) = m.dims();
    // Pad by one ring of unset pixels so the border acts as background.
    let (pw, ph) = (w + 2, h + 2);
    let inf = 1e20;
    let mut grid = vec![0.0f64; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if m.get(x, y) {
                grid[(y + 1) * pw + x + 1] = inf;
            }
        }
    }
    edt_2d(&mut grid, pw, ph);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(grid[(y + 1) * pw + x + 1]);
        }
    }
    out
}

/// Squared Euclidean distance from each pixel to the nearest set pixel;
/// `1e20` everywhere when the mask is empty.
pub fn distance_to_set_sq(m: &BinaryMask) -> Vec<f64> {
    let (w, h) = m.dims();
    let mut grid: Vec<f64> = m.bits().iter().map(|&b| if b { 0.0 } else { 1e20 }).collect();
    edt_2d(&mut grid, w, h);
    grid
}

fn edt_2d(grid: &mut [f64], w: usize, h: usize) {
    let n = w.max(h);
    let mut scratch = Envelope::new(n);
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for x in 0..w {
        for y in 0..h {
            line[y] = grid[y * w + x];
        }
        scratch.transform(&line[..h], &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        line[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        scratch.transform(&line[..w], &mut out[..w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
}

/// Buffers for the 1-D lower envelope of parabolas.
struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self { v: vec![0; n], z: vec![0.0; n + 1] }
    }

    fn transform(&mut self, f: &[f64], d: &mut [f64]) {
        let (v, z) = (&mut self.v, &mut self.z);
        let n = f.len();
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        let intersect =
            |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
        for q in 1..n {
            let mut s = intersect(q, v[k]);
            while s <= z[k] {
                k -= 1;
                s = intersect(q, v[k]);
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for (q, out) in d.iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let dq = q as f64 - v[k] as f64;
            *out = dq * dq + f[v[k]];
        }
    }
}
