//! Raster types, mask geometry, anchor sampling and image/mask file formats.

mod anchors;
mod geometry;
pub mod io;
mod types;

pub use anchors::{sample_anchors, AnchorPoint, AnchorPrompt};
pub use geometry::{
    bbox_of, boundary, connected_components, dice, distance_to_boundary_sq, distance_to_set_sq, iou, morph,
};
pub use types::{BBox, BinaryMask, ClassId, ClassSet, Frame, LabelSpace, SegMask, BACKGROUND};
