//! C interface to scenario rendering, the segmentation runners and the
//! metric suite.
//!
//! Every function returns a [`SasviStatus`]; on failure the message is
//! available from [`sasvi_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sasvi::controller::{
    run_baseline_t1, run_framewise, run_gt_reprompt, run_sasvi, RunOutput, SasviConfig, ScenarioSource,
};
use sasvi::evaluate::{evaluate, EvalOptions, FlowInput};
use sasvi::mask::{self, BinaryMask};
use sasvi::metrics::METRIC_NAMES;
use sasvi::models::{NoiseParams, OracleOverseer, Overseer, SurrogateTracker};
use sasvi::scene::Scenario;
use sasvi::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SasviStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    BufferTooSmall = 4,
    ModelError = 5,
    IoError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SasviMethod {
    Sasvi = 0,
    T1 = 1,
    GroundTruth = 2,
    Framewise = 3,
}

/// Run settings. `stride` applies to the ground-truth method only.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SasviRunOptions {
    pub method: SasviMethod,
    pub n_t: usize,
    pub n_a: usize,
    pub seed: u64,
    pub handle_leave: bool,
    pub stride: usize,
    pub drop_prob: f64,
    pub class_flip_prob: f64,
    pub spurious_prob: f64,
    pub noise_seed: u64,
}

/// Per-metric means, in the CSV column order; `valid[i]` is false when the
/// metric is undefined for the run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SasviMeans {
    pub values: [f64; 8],
    pub valid: [bool; 8],
}

/// A loaded scenario.
pub struct SasviScenario(Scenario);

/// Masks and events of a finished run.
pub struct SasviRun(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SasviStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension { .. } => SasviStatus::DimensionMismatch,
            Error::Io(_) => SasviStatus::IoError,
            e if e.is_input_error() => SasviStatus::InvalidArgument,
            _ => SasviStatus::ModelError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SasviStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SasviStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SasviStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SasviStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Failure(
            SasviStatus::BufferTooSmall,
            format!("`{what}` holds {len} elements but {needed} are needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sasvi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sasvi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Defaults: SASVi with `n_t = 4`, `n_a = 3`, leave handling on and a
/// noise-free overseer.
#[no_mangle]
pub extern "C" fn sasvi_run_options_default() -> SasviRunOptions {
    let c = SasviConfig::default();
    SasviRunOptions {
        method: SasviMethod::Sasvi,
        n_t: c.n_t,
        n_a: c.n_a,
        seed: c.seed,
        handle_leave: c.handle_leave,
        stride: 30,
        drop_prob: 0.0,
        class_flip_prob: 0.0,
        spurious_prob: 0.0,
        noise_seed: 0,
    }
}

/// Parses a scenario from nul-terminated JSON.
///
/// # Safety
/// `json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sasvi_scenario_from_json(json: *const c_char, out: *mut *mut SasviScenario) -> SasviStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure(SasviStatus::InvalidArgument, "scenario JSON is not UTF-8".into()))?;
        let s = Scenario::from_json(text)?;
        *out = Box::into_raw(Box::new(SasviScenario(s)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from [`sasvi_scenario_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sasvi_scenario_free(scenario: *mut SasviScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sasvi_scenario_info(
    scenario: *const SasviScenario,
    width: *mut usize,
    height: *mut usize,
    num_frames: *mut usize,
    num_classes: *mut usize,
) -> SasviStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        for (p, v, name) in [
            (width, s.width(), "width"),
            (height, s.height(), "height"),
            (num_frames, s.num_frames(), "num_frames"),
            (num_classes, s.label_space().len(), "num_classes"),
        ] {
            if p.is_null() {
                return Err(null(name));
            }
            *p = v;
        }
        Ok(())
    })
}

/// Renders frame `t`: `3·w·h` RGB bytes into `rgb` and `w·h` class ids into
/// `labels`. Either output may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold at least the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn sasvi_scenario_render(
    scenario: *const SasviScenario,
    t: usize,
    rgb: *mut u8,
    rgb_len: usize,
    labels: *mut u8,
    labels_len: usize,
) -> SasviStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        if t >= s.num_frames() {
            return Err(Failure(SasviStatus::InvalidArgument, format!("frame {t} outside 0..{}", s.num_frames())));
        }
        let (frame, mask) = s.render(t)?;
        if !rgb.is_null() {
            out_slice(rgb, rgb_len, frame.data().len(), "rgb")?.copy_from_slice(frame.data());
        }
        if !labels.is_null() {
            out_slice(labels, labels_len, mask.labels().len(), "labels")?.copy_from_slice(mask.labels());
        }
        Ok(())
    })
}

/// Runs a method on the scenario with the oracle overseer (noise as given)
/// and the surrogate tracker.
///
/// # Safety
/// `scenario` and `options` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sasvi_run(
    scenario: *const SasviScenario,
    options: *const SasviRunOptions,
    out: *mut *mut SasviRun,
) -> SasviStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.0;
        let o = *deref(options, "options")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let noise = NoiseParams {
            drop_prob: o.drop_prob,
            class_flip_prob: o.class_flip_prob,
            spurious_prob: o.spurious_prob,
            seed: o.noise_seed,
            ..NoiseParams::default()
        };
        let labels = s.label_space().clone();
        let overseer = OracleOverseer::with_noise(&s.palette(), labels.clone(), noise)?;
        let mut tracker = SurrogateTracker::new(labels);
        let mut source = ScenarioSource::new(s);
        let result = match o.method {
            SasviMethod::Sasvi => {
                let config = SasviConfig {
                    n_t: o.n_t,
                    n_a: o.n_a,
                    seed: o.seed,
                    handle_leave: o.handle_leave,
                    ..SasviConfig::default()
                };
                run_sasvi(&mut source, &overseer, &mut tracker, &config)
            }
            SasviMethod::T1 => {
                let initial = overseer.detect(0, &s.render(0)?.0)?.semantic_mask;
                run_baseline_t1(&mut source, &initial, &mut tracker)
            }
            SasviMethod::GroundTruth => {
                let mut gt = |t: usize| Ok(Some(s.render(t)?.1));
                run_gt_reprompt(&mut source, &mut gt, &mut tracker, o.stride)
            }
            SasviMethod::Framewise => run_framewise(&mut source, &overseer),
        };
        let output = result.map_err(|f| Failure::from(f.into_error()))?;
        *out = Box::into_raw(Box::new(SasviRun(output)));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`sasvi_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sasvi_run_free(run: *mut SasviRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sasvi_run_counts(
    run: *const SasviRun,
    num_frames: *mut usize,
    num_events: *mut usize,
) -> SasviStatus {
    guard(|| {
        let r = &deref(run, "run")?.0;
        if num_frames.is_null() {
            return Err(null("num_frames"));
        }
        if num_events.is_null() {
            return Err(null("num_events"));
        }
        *num_frames = r.masks.len();
        *num_events = r.trace.events.len();
        Ok(())
    })
}

/// Copies the class ids of output frame `t` into `labels`.
///
/// # Safety
/// `labels` must hold at least `labels_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sasvi_run_mask(
    run: *const SasviRun,
    t: usize,
    labels: *mut u8,
    labels_len: usize,
) -> SasviStatus {
    guard(|| {
        let r = &deref(run, "run")?.0;
        let m = r
            .masks
            .get(t)
            .ok_or_else(|| Failure(SasviStatus::InvalidArgument, format!("frame {t} outside 0..{}", r.masks.len())))?;
        out_slice(labels, labels_len, m.labels().len(), "labels")?.copy_from_slice(m.labels());
        Ok(())
    })
}

/// Trigger and re-prompt frame of event `index`.
///
/// # Safety
/// `run` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sasvi_run_event(
    run: *const SasviRun,
    index: usize,
    trigger: *mut usize,
    reprompt: *mut usize,
) -> SasviStatus {
    guard(|| {
        let r = &deref(run, "run")?.0;
        let e = r.trace.events.get(index).ok_or_else(|| {
            Failure(SasviStatus::InvalidArgument, format!("event {index} outside 0..{}", r.trace.events.len()))
        })?;
        if trigger.is_null() {
            return Err(null("trigger"));
        }
        if reprompt.is_null() {
            return Err(null("reprompt"));
        }
        *trigger = e.trigger;
        *reprompt = e.reprompt;
        Ok(())
    })
}

/// Scores a run against the scenario's ground truth with exact flow.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sasvi_run_evaluate(
    run: *const SasviRun,
    scenario: *const SasviScenario,
    out: *mut SasviMeans,
) -> SasviStatus {
    guard(|| {
        let r = &deref(run, "run")?.0;
        let s = &deref(scenario, "scenario")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let gt = (0..s.num_frames()).map(|t| Ok(s.render(t)?.1)).collect::<sasvi::Result<Vec<_>>>()?;
        let flows =
            (0..s.num_frames().saturating_sub(1)).map(|t| s.ground_truth_flow(t)).collect::<sasvi::Result<Vec<_>>>()?;
        let report = evaluate(&r.masks, Some(&gt), &FlowInput::Fields(&flows), &EvalOptions::default())?;
        let mut means = SasviMeans::default();
        for (i, v) in report.means().iter().enumerate() {
            if let Some(v) = v {
                means.values[i] = *v;
                means.valid[i] = true;
            }
        }
        *out = means;
        Ok(())
    })
}

/// Name of metric column `index` (0..8) as a static string, or null.
#[no_mangle]
pub extern "C" fn sasvi_metric_name(index: usize) -> *const c_char {
    const NAMES: [&str; 8] = [
        "dice_of\0",
        "iou_of\0",
        "cd_t\0",
        "iou_t\0",
        "semantic_dice\0",
        "class_f1\0",
        "bb_iou_50\0",
        "mask_dice_50\0",
    ];
    debug_assert!(NAMES.iter().zip(METRIC_NAMES).all(|(a, b)| a.trim_end_matches('\0') == b));
    NAMES.get(index).map_or(ptr::null(), |n| n.as_ptr().cast())
}

unsafe fn binary(bits: *const u8, width: usize, height: usize, what: &str) -> Result<BinaryMask, Failure> {
    if bits.is_null() {
        return Err(null(what));
    }
    let n =
        width.checked_mul(height).ok_or_else(|| Failure(SasviStatus::InvalidArgument, "mask size overflows".into()))?;
    let data = std::slice::from_raw_parts(bits, n);
    Ok(BinaryMask::new(width, height, data.iter().map(|&b| b != 0).collect())?)
}

/// Dice and IoU of two `width·height` byte masks (nonzero = set).
///
/// # Safety
/// `a` and `b` must each point to `width·height` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn sasvi_overlap(
    a: *const u8,
    b: *const u8,
    width: usize,
    height: usize,
    dice: *mut f64,
    iou: *mut f64,
) -> SasviStatus {
    guard(|| {
        let a = binary(a, width, height, "a")?;
        let b = binary(b, width, height, "b")?;
        if dice.is_null() {
            return Err(null("dice"));
        }
        if iou.is_null() {
            return Err(null("iou"));
        }
        *dice = mask::dice(&a, &b)?;
        *iou = mask::iou(&a, &b)?;
        Ok(())
    })
}
