//! Coarse-to-fine Horn–Schunck estimation of backward flow.

use serde::{Deserialize, Serialize};

use super::field::FlowField;
use crate::error::{check_dims, Result};
use crate::mask::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HornSchunckParams {
    /// Smoothness weight; the regulariser is `alpha²`.
    pub alpha: f32,
    /// Jacobi iterations per warp and pyramid level.
    pub iterations: usize,
    /// Number of pyramid levels (1 = single scale).
    pub pyramid_levels: usize,
    /// Re-linearisations per level.
    pub warps: usize,
}

impl Default for HornSchunckParams {
    fn default() -> Self {
        Self { alpha: 10.0, iterations: 100, pyramid_levels: 3, warps: 2 }
    }
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Plane {
    fn at(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.data[y * self.w + x]
    }

    fn bilinear(&self, x: f32, y: f32) -> f32 {
        let x = x.clamp(0.0, (self.w - 1) as f32);
        let y = y.clamp(0.0, (self.h - 1) as f32);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x0 + 1, y0) * fx;
        let bottom = self.at(x0, y0 + 1) * (1.0 - fx) + self.at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    fn downsample(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = (2 * x as isize, 2 * y as isize);
                data.push(
                    0.25 * (self.at(sx, sy) + self.at(sx + 1, sy) + self.at(sx, sy + 1) + self.at(sx + 1, sy + 1)),
                );
            }
        }
        Plane { w, h, data }
    }
}

fn pyramid(base: Plane, levels: usize) -> Vec<Plane> {
    let mut out = vec![base];
    while out.len() < levels {
        let last = out.last().expect("nonempty");
        if last.w < 16 || last.h < 16 {
            break;
        }
        out.push(last.downsample());
    }
    out
}

/// Flow `(u, v)` on the finer grid from the coarser one.
fn upsample(u: &Plane, v: &Plane, w: usize, h: usize) -> (Plane, Plane) {
    let sx = u.w as f32 / w as f32;
    let sy = u.h as f32 / h as f32;
    let mut du = Vec::with_capacity(w * h);
    let mut dv = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let cx = (x as f32 + 0.5) * sx - 0.5;
            let cy = (y as f32 + 0.5) * sy - 0.5;
            du.push(u.bilinear(cx, cy) / sx);
            dv.push(v.bilinear(cx, cy) / sy);
        }
    }
    (Plane { w, h, data: du }, Plane { w, h, data: dv })
}

/// Weighted neighbourhood mean (1/6 edge, 1/12 corner neighbours).
fn local_mean(p: &Plane, x: isize, y: isize) -> f32 {
    (p.at(x - 1, y) + p.at(x + 1, y) + p.at(x, y - 1) + p.at(x, y + 1)) / 6.0
        + (p.at(x - 1, y - 1) + p.at(x + 1, y - 1) + p.at(x - 1, y + 1) + p.at(x + 1, y + 1)) / 12.0
}

fn refine(reference: &Plane, source: &Plane, u: &mut Plane, v: &mut Plane, params: &HornSchunckParams) {
    let (w, h) = (reference.w, reference.h);
    let alpha2 = params.alpha * params.alpha;
    for _ in 0..params.warps {
        // source resampled at p + (u, v), so it aligns with the reference
        let mut warped = Plane { w, h, data: vec![0.0; w * h] };
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                warped.data[i] = source.bilinear(x as f32 + u.data[i], y as f32 + v.data[i]);
            }
        }
        let mut ix = vec![0.0; w * h];
        let mut iy = vec![0.0; w * h];
        let mut it = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let i = y as usize * w + x as usize;
                let gx = |p: &Plane| 0.5 * (p.at(x + 1, y) - p.at(x - 1, y));
                let gy = |p: &Plane| 0.5 * (p.at(x, y + 1) - p.at(x, y - 1));
                ix[i] = 0.5 * (gx(&warped) + gx(reference));
                iy[i] = 0.5 * (gy(&warped) + gy(reference));
                it[i] = warped.data[i] - reference.data[i];
            }
        }
        // increments around the current linearisation point
        let u0 = u.data.clone();
        let v0 = v.data.clone();
        let mut du = Plane { w, h, data: vec![0.0; w * h] };
        let mut dv = Plane { w, h, data: vec![0.0; w * h] };
        for _ in 0..params.iterations {
            let mut nu = vec![0.0; w * h];
            let mut nv = vec![0.0; w * h];
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let i = y as usize * w + x as usize;
                    // smoothness acts on the total flow u0 + du
                    let ubar = local_mean(&du, x, y) + local_mean(u, x, y) - u0[i];
                    let vbar = local_mean(&dv, x, y) + local_mean(v, x, y) - v0[i];
                    let r = (ix[i] * ubar + iy[i] * vbar + it[i]) / (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
                    nu[i] = ubar - ix[i] * r;
                    nv[i] = vbar - iy[i] * r;
                }
            }
            du.data = nu;
            dv.data = nv;
        }
        for i in 0..w * h {
            u.data[i] = u0[i] + du.data[i];
            v.data[i] = v0[i] + dv.data[i];
        }
    }
}

/// Backward flow referenced at `next`: `next(p) ≈ prev(p + f(p))`.
pub fn estimate_flow(prev: &Frame, next: &Frame, params: &HornSchunckParams) -> Result<FlowField> {
    check_dims(prev.dims(), next.dims())?;
    let (w, h) = next.dims();
    if params.iterations == 0 || params.warps == 0 {
        return Ok(FlowField::zeros(w, h));
    }
    let levels = params.pyramid_levels.max(1);
    let reference = pyramid(Plane { w, h, data: next.to_gray() }, levels);
    let source = pyramid(Plane { w, h, data: prev.to_gray() }, levels);
    let coarsest = reference.last().expect("nonempty");
    let mut u = Plane { w: coarsest.w, h: coarsest.h, data: vec![0.0; coarsest.w * coarsest.h] };
    let mut v = u.clone();
    for level in (0..reference.len()).rev() {
        let (r, s) = (&reference[level], &source[level]);
        if u.w != r.w || u.h != r.h {
            (u, v) = upsample(&u, &v, r.w, r.h);
        }
        refine(r, s, &mut u, &mut v, params);
    }
    let vectors = u.data.iter().zip(&v.data).map(|(&a, &b)| [a, b]).collect();
    FlowField::new(w, h, vectors, vec![true; w * h])
}
