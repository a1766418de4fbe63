use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::mask::{connected_components, AnchorPrompt, BinaryMask, ClassId, Frame, LabelSpace, SegMask, BACKGROUND};
use crate::scene::MIN_ENTITY_CHROMA;

/// Stateful promptable video segmenter. A segmenter has exactly one owner at a
/// time; it may move between threads but is never shared.
pub trait VideoSegmenter: Send {
    /// Replaces the tracked set with the prompted entities at frame `t` and
    /// returns the segmentation of that frame.
    fn prompt(&mut self, t: usize, frame: &Frame, mask: Option<&SegMask>, anchors: &[AnchorPrompt]) -> Result<SegMask>;

    /// Propagates the tracked entities to the next frame.
    fn step(&mut self, frame: &Frame) -> Result<SegMask>;

    /// Restores the state held right after frame `t` was processed.
    fn rewind(&mut self, t: usize) -> Result<()>;
}

impl<T: VideoSegmenter + ?Sized> VideoSegmenter for Box<T> {
    fn prompt(&mut self, t: usize, frame: &Frame, mask: Option<&SegMask>, anchors: &[AnchorPrompt]) -> Result<SegMask> {
        (**self).prompt(t, frame, mask, anchors)
    }

    fn step(&mut self, frame: &Frame) -> Result<SegMask> {
        (**self).step(frame)
    }

    fn rewind(&mut self, t: usize) -> Result<()> {
        (**self).rewind(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedObject {
    pub id: u32,
    pub class_id: ClassId,
    /// Flat colour identifying the entity.
    pub key: [u8; 3],
    pub last_mask: BinaryMask,
}

/// Tracker memory at one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackerState {
    pub objects: Vec<TrackedObject>,
    pub frame_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Number of past states retained for rewinding.
    pub history: usize,
    /// Per-channel colour tolerance when matching an appearance key.
    pub color_tolerance: u8,
    /// Minimum share of a prompt component a colour must cover to become an object.
    pub min_color_share: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self { history: 16, color_tolerance: 0, min_color_share: 0.25 }
    }
}

/// Appearance-based stand-in for a promptable tracker: it follows prompted
/// entities by their flat colour and IoU continuity, and never segments an
/// entity that was not prompted.
#[derive(Debug, Clone)]
pub struct SurrogateTracker {
    params: TrackerParams,
    labels: Arc<LabelSpace>,
    state: Option<TrackerState>,
    history: VecDeque<TrackerState>,
    next_id: u32,
}

fn chroma(rgb: [u8; 3]) -> u8 {
    rgb.iter().max().unwrap() - rgb.iter().min().unwrap()
}

impl SurrogateTracker {
    pub fn new(labels: Arc<LabelSpace>) -> Self {
        Self::with_params(labels, TrackerParams::default()).expect("default parameters are valid")
    }

    pub fn with_params(labels: Arc<LabelSpace>, params: TrackerParams) -> Result<Self> {
        if params.history < 1 {
            return Err(Error::invalid("tracker history must hold at least one frame"));
        }
        if !(params.min_color_share > 0.0 && params.min_color_share <= 1.0) {
            return Err(Error::invalid("min_color_share must lie in (0, 1]"));
        }
        Ok(Self { params, labels, state: None, history: VecDeque::new(), next_id: 0 })
    }

    pub fn state(&self) -> Option<&TrackerState> {
        self.state.as_ref()
    }

    /// Frames that can currently be rewound to.
    pub fn history_span(&self) -> Option<(usize, usize)> {
        Some((self.history.front()?.frame_index, self.history.back()?.frame_index))
    }

    fn matches(&self, a: [u8; 3], key: [u8; 3]) -> bool {
        a.iter().zip(&key).all(|(&x, &k)| x.abs_diff(k) <= self.params.color_tolerance)
    }

    fn key_mask(&self, frame: &Frame, key: [u8; 3]) -> BinaryMask {
        let (w, h) = frame.dims();
        let bits = (0..w * h).map(|i| self.matches(frame.pixel_at(i), key)).collect();
        BinaryMask::new(w, h, bits).expect("sized to frame")
    }

    /// A key seen again (an entity split by occlusion) extends the existing object.
    fn add_object(&mut self, objects: &mut Vec<TrackedObject>, class_id: ClassId, key: [u8; 3], mask: BinaryMask) {
        if let Some(o) = objects.iter_mut().find(|o| o.key == key) {
            let merged = o.last_mask.bits().iter().zip(mask.bits()).map(|(&a, &b)| a || b).collect();
            o.last_mask = BinaryMask::new(mask.width(), mask.height(), merged).expect("same dims");
            return;
        }
        objects.push(TrackedObject { id: self.next_id, class_id, key, last_mask: mask });
        self.next_id += 1;
    }

    fn record(&mut self, state: TrackerState) {
        while self.history.back().is_some_and(|s| s.frame_index >= state.frame_index) {
            self.history.pop_back();
        }
        self.history.push_back(state.clone());
        while self.history.len() > self.params.history {
            self.history.pop_front();
        }
        self.state = Some(state);
    }

    /// Paints objects in ascending score, so the best-scoring object owns
    /// contested pixels.
    fn fuse(&self, dims: (usize, usize), painted: &mut [(f64, ClassId, BinaryMask)]) -> SegMask {
        painted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = SegMask::background(dims.0, dims.1, self.labels.clone());
        for (_, class, m) in painted.iter() {
            for i in m.indices() {
                out.set_index(i, *class);
            }
        }
        out
    }
}

impl VideoSegmenter for SurrogateTracker {
    fn prompt(&mut self, t: usize, frame: &Frame, mask: Option<&SegMask>, anchors: &[AnchorPrompt]) -> Result<SegMask> {
        let dims = frame.dims();
        let mut objects = Vec::new();
        if let Some(m) = mask {
            check_dims(dims, m.dims())?;
            for class in m.foreground_classes() {
                if !self.labels.contains(class) {
                    return Err(Error::invalid(format!("prompt class {class} outside the label space")));
                }
                for comp in connected_components(&m.class_mask(class)) {
                    let mut counts: BTreeMap<[u8; 3], usize> = BTreeMap::new();
                    for i in comp.indices() {
                        *counts.entry(frame.pixel_at(i)).or_default() += 1;
                    }
                    let total = comp.count() as f64;
                    let mut chosen: Vec<([u8; 3], usize)> = counts
                        .into_iter()
                        .filter(|&(rgb, n)| {
                            chroma(rgb) >= MIN_ENTITY_CHROMA && n as f64 >= self.params.min_color_share * total
                        })
                        .collect();
                    chosen.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
                    for (key, _) in chosen {
                        let region = self.key_mask(frame, key).and(&comp)?;
                        self.add_object(&mut objects, class, key, region);
                    }
                }
            }
        }
        for a in anchors {
            if a.class_id == BACKGROUND || !self.labels.contains(a.class_id) {
                return Err(Error::invalid(format!("anchor class {} is not a foreground class", a.class_id)));
            }
            if let Some(m) = &a.mask {
                check_dims(dims, m.dims())?;
            }
            for p in a.positive_points() {
                if p.x >= dims.0 || p.y >= dims.1 {
                    return Err(Error::invalid(format!("anchor ({}, {}) outside the frame", p.x, p.y)));
                }
                let key = frame.pixel(p.x, p.y);
                if chroma(key) < MIN_ENTITY_CHROMA || objects.iter().any(|o| o.key == key) {
                    continue;
                }
                let index = p.y * dims.0 + p.x;
                let region = connected_components(&self.key_mask(frame, key))
                    .into_iter()
                    .find(|c| c.bits()[index])
                    .expect("anchor pixel matches its own colour");
                self.add_object(&mut objects, a.class_id, key, region);
            }
        }
        let mut painted: Vec<(f64, ClassId, BinaryMask)> =
            objects.iter().map(|o| (1.0, o.class_id, o.last_mask.clone())).collect();
        let out = self.fuse(dims, &mut painted);
        self.record(TrackerState { objects, frame_index: t });
        Ok(out)
    }

    fn step(&mut self, frame: &Frame) -> Result<SegMask> {
        let state = self.state.as_ref().ok_or(Error::NotPrompted)?;
        let dims = frame.dims();
        if let Some(o) = state.objects.first() {
            check_dims(o.last_mask.dims(), dims)?;
        }
        let mut objects = state.objects.clone();
        let mut painted = Vec::new();
        for o in &mut objects {
            let comps = connected_components(&self.key_mask(frame, o.key));
            let mut best: Option<(f64, usize, BinaryMask)> = None;
            for c in comps {
                let inter = c.intersection_count(&o.last_mask)?;
                let union = c.count() + o.last_mask.count() - inter;
                let iou = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
                let area = c.count();
                let better = match &best {
                    None => true,
                    Some((bi, ba, _)) => iou > *bi || (iou == *bi && area > *ba),
                };
                if better {
                    best = Some((iou, area, c));
                }
            }
            if let Some((iou, _, m)) = best {
                o.last_mask = m.clone();
                painted.push((iou, o.class_id, m));
            }
        }
        let out = self.fuse(dims, &mut painted);
        let frame_index = state.frame_index + 1;
        self.record(TrackerState { objects, frame_index });
        Ok(out)
    }

    fn rewind(&mut self, t: usize) -> Result<()> {
        let Some((oldest, newest)) = self.history_span() else {
            return Err(Error::NotPrompted);
        };
        if t < oldest || t > newest {
            return Err(Error::RewindOutOfHistory { requested: t, oldest, newest });
        }
        while self.history.back().is_some_and(|s| s.frame_index > t) {
            self.history.pop_back();
        }
        self.state = self.history.back().cloned();
        Ok(())
    }
}
