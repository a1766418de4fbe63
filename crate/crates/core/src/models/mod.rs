//! Overseer and video-segmenter contracts with deterministic reference
//! implementations.

mod overseer;
pub mod registry;
mod tracker;

pub use overseer::{InjectingOverseer, Injection, NoiseParams, OracleOverseer, Overseer, OverseerOutput};
pub use registry::{ModelContext, OverseerSpec, SegmenterSpec};
pub use tracker::{SurrogateTracker, TrackedObject, TrackerParams, TrackerState, VideoSegmenter};

#[cfg(test)]
mod tests;
