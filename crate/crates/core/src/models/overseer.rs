use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::mask::{
    connected_components, morph, BBox, BinaryMask, ClassId, ClassSet, Frame, LabelSpace, SegMask, BACKGROUND,
};
use crate::metrics::Detection;
use crate::scene::Palette;

/// Per-frame overseer result: instances, their class set and the fused
/// semantic mask.
#[derive(Debug, Clone, PartialEq)]
pub struct OverseerOutput {
    pub detections: Vec<Detection>,
    pub class_set: ClassSet,
    pub semantic_mask: SegMask,
}

impl OverseerOutput {
    /// Fuses detections into a semantic mask; where masks overlap the higher
    /// score wins, and the earlier detection on equal scores.
    pub fn from_detections(
        detections: Vec<Detection>,
        width: usize,
        height: usize,
        labels: Arc<LabelSpace>,
    ) -> Result<Self> {
        let mut class_set = ClassSet::new();
        for d in &detections {
            check_dims((width, height), d.mask.dims())?;
            if d.class_probs.len() != labels.len() {
                return Err(Error::Model(format!(
                    "detection has {} class probabilities for {} classes",
                    d.class_probs.len(),
                    labels.len()
                )));
            }
            if d.class() == BACKGROUND {
                return Err(Error::Model("detection classified as background".into()));
            }
            class_set.insert(d.class());
        }
        let mut order: Vec<usize> = (0..detections.len()).collect();
        order.sort_by(|&a, &b| detections[a].score.total_cmp(&detections[b].score).then(b.cmp(&a)));
        let mut semantic_mask = SegMask::background(width, height, labels);
        for i in order {
            let class = detections[i].class();
            for p in detections[i].mask.indices() {
                semantic_mask.set_index(p, class);
            }
        }
        Ok(Self { detections, class_set, semantic_mask })
    }

    pub fn empty(width: usize, height: usize, labels: Arc<LabelSpace>) -> Self {
        Self {
            detections: Vec::new(),
            class_set: ClassSet::new(),
            semantic_mask: SegMask::background(width, height, labels),
        }
    }
}

/// Per-frame detector. Implementations are stateless, so one instance may be
/// queried from several threads.
pub trait Overseer: Send + Sync {
    fn label_space(&self) -> &Arc<LabelSpace>;

    /// Detects objects in frame `frame_index`. The index only seeds
    /// stochastic implementations; identical inputs give identical outputs.
    fn detect(&self, frame_index: usize, frame: &Frame) -> Result<OverseerOutput>;
}

impl<T: Overseer + ?Sized> Overseer for Box<T> {
    fn label_space(&self) -> &Arc<LabelSpace> {
        (**self).label_space()
    }

    fn detect(&self, frame_index: usize, frame: &Frame) -> Result<OverseerOutput> {
        (**self).detect(frame_index, frame)
    }
}

/// Corruption applied by [`OracleOverseer`], in this order: drop, class flip,
/// box jitter, morphology, spurious injection. Each stage draws from its own
/// generator seeded by `(seed, frame, stage)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub drop_prob: f64,
    pub spurious_prob: f64,
    pub class_flip_prob: f64,
    /// Maximum box-corner displacement, in pixels.
    pub box_jitter: f64,
    /// Maximum erosion/dilation, in 4-neighbour steps.
    pub mask_erode_dilate: u32,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            drop_prob: 0.0,
            spurious_prob: 0.0,
            class_flip_prob: 0.0,
            box_jitter: 0.0,
            mask_erode_dilate: 0,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("drop_prob", self.drop_prob),
            ("spurious_prob", self.spurious_prob),
            ("class_flip_prob", self.class_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if !(self.box_jitter >= 0.0 && self.box_jitter.is_finite()) {
            return Err(Error::invalid(format!("box_jitter = {} must be finite and nonnegative", self.box_jitter)));
        }
        Ok(())
    }

    pub fn is_noise_free(&self) -> bool {
        self.drop_prob == 0.0
            && self.spurious_prob == 0.0
            && self.class_flip_prob == 0.0
            && self.box_jitter == 0.0
            && self.mask_erode_dilate == 0
    }

    fn rng(&self, frame: usize, stage: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((frame as u64) << 3) | stage);
        rng
    }
}

/// Detects entities by their flat palette colour: one detection per
/// connected component of each class, then the configured corruption.
#[derive(Debug, Clone)]
pub struct OracleOverseer {
    colors: HashMap<[u8; 3], ClassId>,
    labels: Arc<LabelSpace>,
    noise: NoiseParams,
}

impl OracleOverseer {
    pub fn new(palette: &Palette, labels: Arc<LabelSpace>) -> Result<Self> {
        Self::with_noise(palette, labels, NoiseParams::default())
    }

    pub fn with_noise(palette: &Palette, labels: Arc<LabelSpace>, noise: NoiseParams) -> Result<Self> {
        noise.validate()?;
        let mut colors = HashMap::new();
        for &(rgb, class) in &palette.entries {
            if !labels.contains(class) || class == BACKGROUND {
                return Err(Error::invalid(format!("palette class {class} is not a foreground class")));
            }
            if colors.insert(rgb, class).is_some_and(|c| c != class) {
                return Err(Error::invalid(format!("palette colour {rgb:?} maps to two classes")));
            }
        }
        Ok(Self { colors, labels, noise })
    }

    pub fn noise(&self) -> &NoiseParams {
        &self.noise
    }

    fn clean_detections(&self, frame: &Frame) -> Vec<Detection> {
        let (w, h) = frame.dims();
        let mut sem = SegMask::background(w, h, self.labels.clone());
        for i in 0..w * h {
            if let Some(&c) = self.colors.get(&frame.pixel_at(i)) {
                sem.set_index(i, c);
            }
        }
        let mut out = Vec::new();
        for class in sem.foreground_classes() {
            for comp in connected_components(&sem.class_mask(class)) {
                out.push(Detection::one_hot(class, self.labels.len(), 1.0, comp).expect("valid component"));
            }
        }
        out
    }

    fn foreground_classes(&self) -> Vec<ClassId> {
        (1..self.labels.len()).map(|c| c as ClassId).collect()
    }

    fn corrupt(&self, frame_index: usize, dims: (usize, usize), mut dets: Vec<Detection>) -> Vec<Detection> {
        let n = &self.noise;
        let (w, h) = dims;
        let classes = self.foreground_classes();

        let mut rng = n.rng(frame_index, 0);
        dets.retain(|_| !rng.random_bool(n.drop_prob));

        let mut rng = n.rng(frame_index, 1);
        for d in &mut dets {
            if rng.random_bool(n.class_flip_prob) && classes.len() > 1 {
                let current = d.class();
                let others: Vec<ClassId> = classes.iter().copied().filter(|&c| c != current).collect();
                let to = others[rng.random_range(0..others.len())];
                d.class_probs.iter_mut().for_each(|p| *p = 0.0);
                d.class_probs[to as usize] = 1.0;
            }
        }

        if n.box_jitter > 0.0 {
            let mut rng = n.rng(frame_index, 2);
            for d in &mut dets {
                let [x0, y0, x1, y1] = d.bbox.coords();
                let mut j = |v: f64, scale: usize| {
                    (v + rng.random_range(-n.box_jitter..=n.box_jitter) / scale as f64).clamp(0.0, 1.0)
                };
                let (a, b, c, e) = (j(x0, w), j(y0, h), j(x1, w), j(y1, h));
                d.bbox = BBox::new(a.min(c), b.min(e), a.max(c), b.max(e)).expect("clamped box");
            }
        }

        if n.mask_erode_dilate > 0 {
            let k = n.mask_erode_dilate as i32;
            let mut rng = n.rng(frame_index, 3);
            for d in &mut dets {
                let steps = rng.random_range(-k..=k);
                d.mask = morph(&d.mask, steps);
            }
            dets.retain(|d| !d.mask.is_empty());
        }

        let mut rng = n.rng(frame_index, 4);
        if rng.random_bool(n.spurious_prob) && !classes.is_empty() {
            let present: ClassSet = dets.iter().map(Detection::class).collect();
            let absent: Vec<ClassId> = classes.iter().copied().filter(|c| !present.contains(c)).collect();
            let pool = if absent.is_empty() { &classes } else { &absent };
            let class = pool[rng.random_range(0..pool.len())];
            let bw = rng.random_range((w / 8).max(1)..=(w / 4).max(1));
            let bh = rng.random_range((h / 8).max(1)..=(h / 4).max(1));
            let x0 = rng.random_range(0..=w - bw);
            let y0 = rng.random_range(0..=h - bh);
            let mask = BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + bw && y >= y0 && y < y0 + bh);
            dets.push(Detection::one_hot(class, self.labels.len(), 0.5, mask).expect("nonempty blob"));
        }
        dets
    }
}

impl Overseer for OracleOverseer {
    fn label_space(&self) -> &Arc<LabelSpace> {
        &self.labels
    }

    fn detect(&self, frame_index: usize, frame: &Frame) -> Result<OverseerOutput> {
        let (w, h) = frame.dims();
        let mut dets = self.clean_detections(frame);
        if !self.noise.is_noise_free() {
            dets = self.corrupt(frame_index, (w, h), dets);
        }
        OverseerOutput::from_detections(dets, w, h, self.labels.clone())
    }
}

/// A scripted false positive: `class` covering `region` (pixel rectangle
/// `[x0, y0, x1, y1)`) on frames `start..start + duration`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub start: usize,
    pub duration: usize,
    pub class_id: ClassId,
    pub region: [usize; 4],
}

/// Wraps an overseer and adds scripted spurious detections.
pub struct InjectingOverseer<O> {
    inner: O,
    injections: Vec<Injection>,
}

impl<O: Overseer> InjectingOverseer<O> {
    pub fn new(inner: O, injections: Vec<Injection>) -> Result<Self> {
        for inj in &injections {
            if inj.class_id == BACKGROUND || !inner.label_space().contains(inj.class_id) {
                return Err(Error::invalid(format!("injected class {} is not a foreground class", inj.class_id)));
            }
            let [x0, y0, x1, y1] = inj.region;
            if x0 >= x1 || y0 >= y1 {
                return Err(Error::invalid("injection region is empty"));
            }
        }
        Ok(Self { inner, injections })
    }
}

impl<O: Overseer> Overseer for InjectingOverseer<O> {
    fn label_space(&self) -> &Arc<LabelSpace> {
        self.inner.label_space()
    }

    fn detect(&self, frame_index: usize, frame: &Frame) -> Result<OverseerOutput> {
        let base = self.inner.detect(frame_index, frame)?;
        let active: Vec<&Injection> =
            self.injections.iter().filter(|i| frame_index >= i.start && frame_index < i.start + i.duration).collect();
        if active.is_empty() {
            return Ok(base);
        }
        let (w, h) = frame.dims();
        let mut dets = base.detections;
        for inj in active {
            let [x0, y0, x1, y1] = inj.region;
            let mask = BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1);
            if mask.is_empty() {
                return Err(Error::invalid("injection region lies outside the frame"));
            }
            dets.push(Detection::one_hot(inj.class_id, self.label_space().len(), 0.5, mask)?);
        }
        OverseerOutput::from_detections(dets, w, h, self.label_space().clone())
    }
}
