//! Detection matching, overlap and temporal-consistency metrics, training
//! losses and per-frame metric reports.

mod detection;
mod loss;
mod overlap;
mod report;

pub use detection::{
    box_iou_matrix, detection_scores, instances_from_mask, match_instances, optimal_assignment, Detection,
    DetectionScores, MatchStrategy, Matching,
};
pub use loss::{box_loss, cls_loss, mask_loss, total_loss, LossTerms, ProbMask};
pub use overlap::{
    boundary_distance, per_class_dice, semantic_dice, semantic_dice_with, temporal_direct, temporal_direct_with,
    temporal_warped, temporal_warped_with, warped_reference_classes, DirectConsistency, MacroOptions,
    WarpedConsistency,
};
pub use report::{higher_is_better, FrameMetrics, MetricReport, METRIC_NAMES};
