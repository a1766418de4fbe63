use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::buffer::BufferState;
use super::source::FrameSource;
use super::trace::{ChangeEvent, FrameRecord, RunTrace, Timing};
use crate::error::{check_dims, Error, Result};
use crate::mask::{sample_anchors, AnchorPrompt, Frame, SegMask};
use crate::models::{Overseer, VideoSegmenter};

/// What a re-prompt sends to the segmenter besides the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    MaskAndAnchors,
    AnchorsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SasviConfig {
    /// Persistence window: a change must hold for this many consecutive frames.
    pub n_t: usize,
    /// Anchor points per connected component.
    pub n_a: usize,
    pub seed: u64,
    /// Also re-prompt when a tracked class disappears.
    pub handle_leave: bool,
    pub prompt_mode: PromptMode,
}

impl Default for SasviConfig {
    fn default() -> Self {
        Self { n_t: 4, n_a: 3, seed: 0, handle_leave: true, prompt_mode: PromptMode::MaskAndAnchors }
    }
}

impl SasviConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 {
            return Err(Error::invalid("n_t must be at least 1"));
        }
        if self.n_a == 0 {
            return Err(Error::invalid("n_a must be at least 1"));
        }
        Ok(())
    }
}

/// One mask per input frame plus the audit trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub masks: Vec<SegMask>,
    pub trace: RunTrace,
}

/// A runner aborted; `partial` holds everything produced before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub partial: Box<RunOutput>,
}

impl RunFailure {
    pub fn into_error(self) -> Error {
        self.error
    }
}

pub type RunResult = std::result::Result<RunOutput, RunFailure>;

struct Run {
    out: RunOutput,
    started: Instant,
    next_index: usize,
    next_mask_id: usize,
    dims: Option<(usize, usize)>,
}

fn timed<T>(acc: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let value = f();
    *acc += start.elapsed().as_secs_f64() * 1e3;
    value
}

impl Run {
    fn new(method: &str, n_t: Option<usize>) -> Self {
        Self {
            out: RunOutput {
                masks: Vec::new(),
                trace: RunTrace { method: method.to_string(), n_t, ..RunTrace::default() },
            },
            started: Instant::now(),
            next_index: 0,
            next_mask_id: 0,
            dims: None,
        }
    }

    fn timing(&mut self) -> &mut Timing {
        &mut self.out.trace.timing
    }

    fn next_frame(&mut self, source: &mut dyn FrameSource) -> Result<Option<(usize, Frame)>> {
        let item = timed(&mut self.out.trace.timing.source_ms, || source.next_frame())?;
        let Some((t, frame)) = item else { return Ok(None) };
        if t != self.next_index {
            return Err(Error::NonMonotoneSource { expected: self.next_index, found: t });
        }
        match self.dims {
            None => self.dims = Some(frame.dims()),
            Some(d) => check_dims(d, frame.dims())?,
        }
        self.next_index += 1;
        Ok(Some((t, frame)))
    }

    fn detect<O: Overseer + ?Sized>(
        &mut self,
        overseer: &O,
        t: usize,
        frame: &Frame,
    ) -> Result<crate::models::OverseerOutput> {
        self.timing().overseer_calls += 1;
        let out = timed(&mut self.out.trace.timing.overseer_ms, || overseer.detect(t, frame))?;
        check_dims(frame.dims(), out.semantic_mask.dims())?;
        Ok(out)
    }

    fn segment(&mut self, frame: &Frame, call: impl FnOnce() -> Result<SegMask>) -> Result<(SegMask, usize)> {
        self.timing().segmenter_calls += 1;
        let mask = timed(&mut self.out.trace.timing.segmenter_ms, call)?;
        check_dims(frame.dims(), mask.dims())?;
        let id = self.next_mask_id;
        self.next_mask_id += 1;
        Ok((mask, id))
    }

    fn seg_call<T>(&mut self, call: impl FnOnce() -> Result<T>) -> Result<T> {
        timed(&mut self.out.trace.timing.segmenter_ms, call)
    }

    fn push(&mut self, mask: SegMask, record: FrameRecord) {
        self.out.masks.push(mask);
        self.out.trace.records.push(record);
    }

    fn finish(mut self) -> RunOutput {
        let t = &mut self.out.trace.timing;
        t.frames = self.out.masks.len();
        t.total_ms = self.started.elapsed().as_secs_f64() * 1e3;
        t.controller_ms = (t.total_ms - t.source_ms - t.overseer_ms - t.segmenter_ms).max(0.0);
        self.out
    }

    fn fail(self, error: Error) -> RunFailure {
        RunFailure { error, partial: Box::new(self.finish()) }
    }
}

macro_rules! attempt {
    ($run:ident, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return Err($run.fail(err)),
        }
    };
}

fn no_frames() -> Error {
    Error::invalid("frame source yielded no frames")
}

/// Overseer-monitored tracking with persistent-change detection,
/// backtracking and re-prompting.
///
/// Frame 0 is prompted with the overseer mask. At every later frame the
/// segmenter steps and the overseer's class set enters the buffer; when a
/// change persists for `n_t` frames ending at `t`, the segmenter is rewound to
/// `r = t - n_t + 1`, re-prompted from the overseer mask of `r` (with anchors
/// for all its classes), and frames `r + 1..=t` are segmented again.
pub fn run_sasvi<O, S>(source: &mut dyn FrameSource, overseer: &O, segmenter: &mut S, config: &SasviConfig) -> RunResult
where
    O: Overseer + ?Sized,
    S: VideoSegmenter + ?Sized,
{
    let mut run = Run::new("sasvi", Some(config.n_t));
    attempt!(run, config.validate());
    let n_t = config.n_t;
    let mut frames: VecDeque<(usize, Frame)> = VecDeque::with_capacity(n_t);
    let mut overseer_masks: VecDeque<SegMask> = VecDeque::with_capacity(n_t);
    let mut buffer: Option<BufferState> = None;

    while let Some((t, frame)) = attempt!(run, run.next_frame(source)) {
        let det = attempt!(run, run.detect(overseer, t, &frame));
        let (mask, mask_id) = if t == 0 {
            attempt!(run, run.segment(&frame, || segmenter.prompt(0, &frame, Some(&det.semantic_mask), &[])))
        } else {
            attempt!(run, run.segment(&frame, || segmenter.step(&frame)))
        };
        let buf = buffer.get_or_insert_with(|| {
            BufferState::new(n_t, det.semantic_mask.foreground_classes()).with_leave_handling(config.handle_leave)
        });
        run.push(
            mask,
            FrameRecord {
                frame: t,
                overseer_classes: Some(det.class_set.clone()),
                tracked: buf.tracked().clone(),
                mask_id,
            },
        );
        if frames.len() == n_t {
            frames.pop_front();
            overseer_masks.pop_front();
        }
        frames.push_back((t, frame));
        overseer_masks.push_back(det.semantic_mask);

        let decision = buf.update_and_check(det.class_set);
        if !decision.is_change() {
            continue;
        }
        let r = t + 1 - n_t;
        let offset = frames.iter().position(|(i, _)| *i == r).expect("re-prompt frame is buffered");
        let m_r = overseer_masks[offset].clone();
        let classes = m_r.foreground_classes();
        let anchors: Vec<AnchorPrompt> = attempt!(
            run,
            classes
                .iter()
                .map(|&c| sample_anchors(&m_r, c, config.n_a, config.seed.wrapping_add(r as u64)))
                .collect::<Result<Vec<_>>>()
        );
        let prompt_mask = match config.prompt_mode {
            PromptMode::MaskAndAnchors => Some(&m_r),
            PromptMode::AnchorsOnly => None,
        };
        attempt!(run, run.seg_call(|| segmenter.rewind(r)));
        let frame_r = &frames[offset].1;
        let (mask, id) = attempt!(run, run.segment(frame_r, || segmenter.prompt(r, frame_r, prompt_mask, &anchors)));
        run.out.masks[r] = mask;
        run.out.trace.records[r].mask_id = id;
        run.out.trace.records[r].tracked = classes.clone();
        for (i, f) in frames.iter().skip(offset + 1) {
            let (mask, id) = attempt!(run, run.segment(f, || segmenter.step(f)));
            run.out.masks[*i] = mask;
            run.out.trace.records[*i].mask_id = id;
            run.out.trace.records[*i].tracked = classes.clone();
        }
        run.out.trace.events.push(ChangeEvent {
            trigger: t,
            reprompt: r,
            added: decision.added(),
            removed: decision.removed(),
        });
        buf.reset(classes.clone(), classes);
    }
    if run.out.masks.is_empty() {
        return Err(run.fail(no_frames()));
    }
    Ok(run.finish())
}

/// Prompts once at frame 0 with `initial` and propagates to the end.
pub fn run_baseline_t1<S>(source: &mut dyn FrameSource, initial: &SegMask, segmenter: &mut S) -> RunResult
where
    S: VideoSegmenter + ?Sized,
{
    let mut run = Run::new("t1", None);
    let tracked = initial.foreground_classes();
    while let Some((t, frame)) = attempt!(run, run.next_frame(source)) {
        let (mask, mask_id) = if t == 0 {
            attempt!(run, check_dims(frame.dims(), initial.dims()));
            attempt!(run, run.segment(&frame, || segmenter.prompt(0, &frame, Some(initial), &[])))
        } else {
            attempt!(run, run.segment(&frame, || segmenter.step(&frame)))
        };
        run.push(mask, FrameRecord { frame: t, overseer_classes: None, tracked: tracked.clone(), mask_id });
    }
    if run.out.masks.is_empty() {
        return Err(run.fail(no_frames()));
    }
    Ok(run.finish())
}

/// Re-prompts with ground truth at every frame divisible by `stride`.
pub fn run_gt_reprompt<S>(
    source: &mut dyn FrameSource,
    gt: &mut dyn FnMut(usize) -> Result<Option<SegMask>>,
    segmenter: &mut S,
    stride: usize,
) -> RunResult
where
    S: VideoSegmenter + ?Sized,
{
    let mut run = Run::new("gt", None);
    if stride == 0 {
        return Err(run.fail(Error::invalid("ground-truth stride must be at least 1")));
    }
    let mut tracked = Default::default();
    while let Some((t, frame)) = attempt!(run, run.next_frame(source)) {
        let (mask, mask_id) = if t % stride == 0 {
            let Some(g) = attempt!(run, gt(t)) else {
                return Err(run.fail(Error::invalid(format!("no ground-truth mask for prompt frame {t}"))));
            };
            attempt!(run, check_dims(frame.dims(), g.dims()));
            tracked = g.foreground_classes();
            attempt!(run, run.segment(&frame, || segmenter.prompt(t, &frame, Some(&g), &[])))
        } else {
            attempt!(run, run.segment(&frame, || segmenter.step(&frame)))
        };
        run.push(mask, FrameRecord { frame: t, overseer_classes: None, tracked: tracked.clone(), mask_id });
    }
    if run.out.masks.is_empty() {
        return Err(run.fail(no_frames()));
    }
    Ok(run.finish())
}

/// The overseer's semantic mask for every frame, without temporal coupling.
pub fn run_framewise<O>(source: &mut dyn FrameSource, overseer: &O) -> RunResult
where
    O: Overseer + ?Sized,
{
    let mut run = Run::new("framewise", None);
    while let Some((t, frame)) = attempt!(run, run.next_frame(source)) {
        let det = attempt!(run, run.detect(overseer, t, &frame));
        let mask_id = run.next_mask_id;
        run.next_mask_id += 1;
        run.push(
            det.semantic_mask,
            FrameRecord { frame: t, overseer_classes: Some(det.class_set), tracked: Default::default(), mask_id },
        );
    }
    if run.out.masks.is_empty() {
        return Err(run.fail(no_frames()));
    }
    Ok(run.finish())
}
