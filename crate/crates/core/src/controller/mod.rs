//! The re-prompting control loop and the baseline runners.

mod buffer;
mod runner;
mod source;
mod trace;

pub use buffer::{BufferState, ChangeDecision};
pub use runner::{
    run_baseline_t1, run_framewise, run_gt_reprompt, run_sasvi, PromptMode, RunFailure, RunOutput, RunResult,
    SasviConfig,
};
pub use source::{
    frame_file_name, numbered_files, read_mask_sequence, write_mask_sequence, DirSource, FrameSource, MemorySource,
    ScenarioSource,
};
pub use trace::{events_from_summary, ChangeEvent, FrameRecord, RunTrace, Timing};
