use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::Scenario;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::mask::{ClassSet, Frame, SegMask, BACKGROUND};

const TEXTURE_WAVES: usize = 6;

/// Sum of seeded plane waves sampled in texture coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Texture {
    waves: Vec<([f64; 2], f64, f64)>,
}

impl Texture {
    pub(crate) fn new(seed: u64, scale: f64, contrast: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x7e47);
        let waves = (0..TEXTURE_WAVES)
            .map(|_| {
                let wavelength = scale * rng.random_range(1.0..4.0);
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / wavelength;
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                ([k * theta.cos(), k * theta.sin()], phase, contrast / 3.0)
            })
            .collect();
        Self { waves }
    }

    pub(crate) fn sample(&self, u: f64, v: f64) -> u8 {
        let value: f64 =
            128.0 + self.waves.iter().map(|(k, phase, amp)| amp * (k[0] * u + k[1] * v + phase).sin()).sum::<f64>();
        value.round().clamp(8.0, 247.0) as u8
    }
}

impl Scenario {
    fn check_frame(&self, t: usize) -> Result<()> {
        if t >= self.num_frames() {
            return Err(Error::invalid(format!("frame {t} out of range for {} frames", self.num_frames())));
        }
        Ok(())
    }

    /// Index of the top-most entity covering each pixel at frame `t`.
    pub(crate) fn ownership(&self, t: usize) -> Vec<Option<usize>> {
        let (w, h) = self.dims();
        let mut own = vec![None; w * h];
        let mut order: Vec<usize> = (0..self.entities.len()).filter(|&i| self.entities[i].is_active(t)).collect();
        order.sort_by_key(|&i| (self.entities[i].z_order, i));
        for i in order {
            let e = &self.entities[i];
            let c = e.position(t);
            let r = e.reach() + 1.0;
            let x0 = (c[0] - r).floor().max(0.0) as usize;
            let y0 = (c[1] - r).floor().max(0.0) as usize;
            let x1 = ((c[0] + r).ceil().max(0.0) as usize).min(w);
            let y1 = ((c[1] + r).ceil().max(0.0) as usize).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    if e.covers(c, x as f64 + 0.5, y as f64 + 0.5) {
                        own[y * w + x] = Some(i);
                    }
                }
            }
        }
        own
    }

    fn texture(&self) -> Texture {
        let bg = &self.spec.background;
        Texture::new(self.spec.seed, bg.scale, bg.contrast)
    }

    fn background_drift(&self) -> [f64; 2] {
        self.spec.background.drift
    }

    /// Frame and ground-truth mask at `t`. Higher `z_order` occludes lower;
    /// equal `z_order` resolves in declaration order.
    pub fn render(&self, t: usize) -> Result<(Frame, SegMask)> {
        self.check_frame(t)?;
        let (w, h) = self.dims();
        let own = self.ownership(t);
        let tex = self.texture();
        let drift = self.background_drift();
        let mut rgb = Vec::with_capacity(3 * w * h);
        let mut mask = SegMask::background(w, h, self.labels.clone());
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                match own[i] {
                    Some(e) => {
                        let e = &self.entities[e];
                        rgb.extend_from_slice(&e.color);
                        mask.set_index(i, e.class_id);
                    }
                    None => {
                        let g = tex.sample(x as f64 + 0.5 - drift[0] * t as f64, y as f64 + 0.5 - drift[1] * t as f64);
                        rgb.extend_from_slice(&[g, g, g]);
                    }
                }
            }
        }
        Ok((Frame::new(w, h, rgb)?, mask))
    }

    /// Backward flow from frame `t + 1` to frame `t`. A pixel is valid when
    /// its source lies inside frame `t` and shows the same surface there.
    pub fn ground_truth_flow(&self, t: usize) -> Result<FlowField> {
        if t + 1 >= self.num_frames() {
            return Err(Error::invalid(format!(
                "flow needs frames {t} and {}, video has {}",
                t + 1,
                self.num_frames()
            )));
        }
        let (w, h) = self.dims();
        let before = self.ownership(t);
        let after = self.ownership(t + 1);
        let drift = self.background_drift();
        let mut vectors = Vec::with_capacity(w * h);
        let mut valid = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let owner = after[y * w + x];
                let disp = match owner {
                    Some(e) => {
                        let e = &self.entities[e];
                        let (a, b) = (e.position(t), e.position(t + 1));
                        [b[0] - a[0], b[1] - a[1]]
                    }
                    None => drift,
                };
                let (sx, sy) = ((x as f64 - disp[0]).round(), (y as f64 - disp[1]).round());
                let ok = sx >= 0.0
                    && sy >= 0.0
                    && (sx as usize) < w
                    && (sy as usize) < h
                    && before[sy as usize * w + sx as usize] == owner;
                vectors.push([-disp[0] as f32, -disp[1] as f32]);
                valid.push(ok);
            }
        }
        FlowField::new(w, h, vectors, valid)
    }

    /// Classes with at least one visible pixel per frame, background included.
    pub fn class_timeline(&self) -> Vec<ClassSet> {
        (0..self.num_frames())
            .map(|t| self.ownership(t).iter().map(|o| o.map_or(BACKGROUND, |e| self.entities[e].class_id)).collect())
            .collect()
    }
}

/// CSV with one row per frame: `frame,classes` where classes are space separated.
pub fn timeline_csv(timeline: &[ClassSet]) -> String {
    let mut out = String::from("frame,classes\n");
    for (t, set) in timeline.iter().enumerate() {
        let ids: Vec<String> = set.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("{t},{}\n", ids.join(" ")));
    }
    out
}
