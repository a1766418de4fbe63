use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::mask::ClassSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    /// Classes reported by the overseer; `None` for runners that do not consult one.
    pub overseer_classes: Option<ClassSet>,
    /// Classes prompted into the segmenter after this frame.
    pub tracked: ClassSet,
    /// Sequence number of the model call whose output is this frame's final mask.
    pub mask_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub trigger: usize,
    pub reprompt: usize,
    pub added: ClassSet,
    pub removed: ClassSet,
}

/// Wall-clock milliseconds per component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub frames: usize,
    pub source_ms: f64,
    pub overseer_ms: f64,
    pub segmenter_ms: f64,
    /// Buffer updates, change detection, anchor sampling and bookkeeping.
    pub controller_ms: f64,
    pub total_ms: f64,
    pub overseer_calls: usize,
    pub segmenter_calls: usize,
}

impl Timing {
    fn fps(frames: usize, ms: f64) -> Option<f64> {
        (ms > 0.0).then(|| frames as f64 / (ms / 1000.0))
    }

    /// `(component, frames per second)`; components that took no time are omitted.
    pub fn frames_per_second(&self) -> Vec<(&'static str, f64)> {
        [
            ("source", self.source_ms),
            ("overseer", self.overseer_ms),
            ("segmenter", self.segmenter_ms),
            ("controller", self.controller_ms),
            ("total", self.total_ms),
        ]
        .into_iter()
        .filter_map(|(name, ms)| Self::fps(self.frames, ms).map(|f| (name, f)))
        .collect()
    }

    /// Controller share of the runtime spent outside frame loading.
    pub fn controller_fraction(&self) -> f64 {
        let busy = self.total_ms - self.source_ms;
        if busy <= 0.0 {
            0.0
        } else {
            self.controller_ms / busy
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    pub n_t: Option<usize>,
    pub records: Vec<FrameRecord>,
    pub events: Vec<ChangeEvent>,
    pub timing: Timing,
}

fn classes_cell(c: &ClassSet) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct Summary<'a> {
    method: &'a str,
    n_t: Option<usize>,
    frames: usize,
    events: &'a [ChangeEvent],
    timing: &'a Timing,
    frames_per_second: std::collections::BTreeMap<&'static str, f64>,
}

impl RunTrace {
    /// Per-frame records: `frame,overseer_classes,tracked,mask_id`, with class
    /// ids separated by spaces.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("frame,overseer_classes,tracked,mask_id\n");
        for r in &self.records {
            let seen = r.overseer_classes.as_ref().map(classes_cell).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.frame, seen, classes_cell(&r.tracked), r.mask_id);
        }
        out
    }

    /// Events and timing as pretty-printed JSON.
    pub fn summary_json(&self) -> String {
        let summary = Summary {
            method: &self.method,
            n_t: self.n_t,
            frames: self.records.len(),
            events: &self.events,
            timing: &self.timing,
            frames_per_second: self.timing.frames_per_second().into_iter().collect(),
        };
        serde_json::to_string_pretty(&summary).expect("trace serializes")
    }
}

#[derive(Deserialize)]
struct EventsOnly {
    events: Vec<ChangeEvent>,
}

/// Change events of a summary written by [`RunTrace::summary_json`].
pub fn events_from_summary(json: &str) -> crate::Result<Vec<ChangeEvent>> {
    serde_json::from_str::<EventsOnly>(json)
        .map(|s| s.events)
        .map_err(|e| crate::Error::invalid(format!("unreadable trace summary: {e}")))
}
