//! Deterministic synthetic videos: flat-coloured entities on a drifting grey
//! texture, with exact masks, backward flow and class timelines.

pub mod presets;
mod render;
mod spec;

pub use render::timeline_csv;
pub use spec::{
    BackgroundSpec, ClassRef, Entity, EntitySpec, Palette, Scenario, ScenarioSpec, Shape, Waypoint, MIN_ENTITY_CHROMA,
};
