//! Per-frame evaluation of a predicted mask sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::flow::{estimate_flow, FlowField, HornSchunckParams};
use crate::mask::{ClassSet, Frame, SegMask};
use crate::metrics::{
    detection_scores, instances_from_mask, semantic_dice_with, temporal_direct_with, temporal_warped_with,
    warped_reference_classes, FrameMetrics, MacroOptions, MatchStrategy, MetricReport,
};

/// Which classes the temporal metrics average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassScope {
    /// Classes present in the ground truth of the frame pair are scored even
    /// when the prediction omits them (falls back to `Observed` without ground truth).
    #[default]
    WithReference,
    /// Only classes present in the compared predictions.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub scope: ClassScope,
    pub matching: MatchStrategy,
    /// Whether background counts as a class in the semantic Dice.
    pub background_in_dice: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { scope: ClassScope::WithReference, matching: MatchStrategy::Optimal, background_in_dice: true }
    }
}

/// Where the flow between consecutive frames comes from.
pub enum FlowInput<'a> {
    /// Horn–Schunck estimated from the frames.
    Estimate { frames: &'a [Frame], params: HornSchunckParams },
    /// Precomputed fields; entry `t` maps frame `t` onto frame `t + 1`.
    Fields(&'a [FlowField]),
}

fn pair_flow(flow: &FlowInput<'_>, t: usize) -> Result<FlowField> {
    match flow {
        FlowInput::Estimate { frames, params } => estimate_flow(&frames[t], &frames[t + 1], params),
        FlowInput::Fields(fields) => Ok(fields[t].clone()),
    }
}

/// Scores `pred` frame by frame. Temporal columns start at frame 1; the
/// ground-truth columns are filled when `gt` is given.
pub fn evaluate(
    pred: &[SegMask],
    gt: Option<&[SegMask]>,
    flow: &FlowInput<'_>,
    options: &EvalOptions,
) -> Result<MetricReport> {
    if pred.is_empty() {
        return Err(Error::invalid("empty prediction sequence"));
    }
    let dims = pred[0].dims();
    for m in pred {
        check_dims(dims, m.dims())?;
    }
    if let Some(g) = gt {
        if g.len() != pred.len() {
            return Err(Error::invalid(format!(
                "prediction has {} frames but ground truth has {}",
                pred.len(),
                g.len()
            )));
        }
        for m in g {
            check_dims(dims, m.dims())?;
        }
    }
    let pairs = pred.len() - 1;
    match flow {
        FlowInput::Estimate { frames, .. } => {
            if frames.len() != pred.len() {
                return Err(Error::invalid(format!("{} frames for {} masks", frames.len(), pred.len())));
            }
            for f in frames.iter() {
                check_dims(dims, f.dims())?;
            }
        }
        FlowInput::Fields(fields) => {
            if fields.len() < pairs {
                return Err(Error::invalid(format!("{} flow fields for {} frame pairs", fields.len(), pairs)));
            }
            for f in fields.iter().take(pairs) {
                check_dims(dims, f.dims())?;
            }
        }
    }

    let rows: Vec<FrameMetrics> = (0..pred.len())
        .into_par_iter()
        .map(|t| -> Result<FrameMetrics> {
            let mut row = FrameMetrics::new(t);
            if t > 0 {
                let f = pair_flow(flow, t - 1)?;
                let (warp_opts, direct_opts) = match (options.scope, gt) {
                    (ClassScope::WithReference, Some(g)) => {
                        let warped_ref = warped_reference_classes(&g[t - 1], &g[t], &f)?;
                        let direct_ref: ClassSet = g[t - 1].classes().union(&g[t].classes()).copied().collect();
                        (MacroOptions::with_reference(warped_ref), MacroOptions::with_reference(direct_ref))
                    }
                    _ => (MacroOptions::default(), MacroOptions::default()),
                };
                let w = temporal_warped_with(&pred[t - 1], &pred[t], &f, &warp_opts)?;
                let d = temporal_direct_with(&pred[t - 1], &pred[t], &direct_opts)?;
                row.set("dice_of", w.dice);
                row.set("iou_of", w.iou);
                row.set("cd_t", d.contour_distance);
                row.set("iou_t", d.iou);
            }
            if let Some(g) = gt {
                let dice_opts =
                    MacroOptions { include_background: options.background_in_dice, reference_classes: None };
                row.set("semantic_dice", semantic_dice_with(&pred[t], &g[t], &dice_opts)?);
                let s =
                    detection_scores(&instances_from_mask(&pred[t]), &instances_from_mask(&g[t]), options.matching)?;
                row.set("class_f1", s.class_f1);
                row.set("bb_iou_50", s.bb_iou_50);
                row.set("mask_dice_50", s.mask_dice_50);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(MetricReport::new(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::presets::tool_entry;
    use crate::scene::Scenario;

    #[test]
    fn perfect_prediction_with_oracle_flow() {
        let s = Scenario::new(tool_entry(12, 48, 4)).unwrap();
        let gt: Vec<SegMask> = (0..12).map(|t| s.render(t).unwrap().1).collect();
        let flows: Vec<FlowField> = (0..11).map(|t| s.ground_truth_flow(t).unwrap()).collect();
        let report = evaluate(&gt, Some(&gt), &FlowInput::Fields(&flows), &EvalOptions::default()).unwrap();
        assert_eq!(report.rows[0].get("dice_of"), None);
        for r in &report.rows[1..] {
            assert_eq!(r.get("dice_of"), Some(1.0), "frame {}", r.frame);
            assert_eq!(r.get("iou_of"), Some(1.0));
        }
        assert_eq!(report.mean("semantic_dice"), Some(1.0));
        assert_eq!(report.mean("class_f1"), Some(1.0));
        let short = &gt[..5];
        assert!(evaluate(short, Some(&gt), &FlowInput::Fields(&flows), &EvalOptions::default()).is_err());
    }

    #[test]
    fn omitted_class_scores_worse_under_reference_scope() {
        let s = Scenario::new(tool_entry(12, 48, 0)).unwrap();
        let gt: Vec<SegMask> = (0..12).map(|t| s.render(t).unwrap().1).collect();
        let missing: Vec<SegMask> = gt
            .iter()
            .map(|m| {
                let labels = m.labels().iter().map(|&l| if l == 2 { 0 } else { l }).collect();
                SegMask::new(m.width(), m.height(), labels, m.label_space().clone()).unwrap()
            })
            .collect();
        let flows: Vec<FlowField> = (0..11).map(|t| s.ground_truth_flow(t).unwrap()).collect();
        let flow = FlowInput::Fields(&flows);
        let perfect = evaluate(&gt, Some(&gt), &flow, &EvalOptions::default()).unwrap();
        let worse = evaluate(&missing, Some(&gt), &flow, &EvalOptions::default()).unwrap();
        for metric in ["dice_of", "iou_of", "iou_t", "semantic_dice", "class_f1"] {
            assert!(worse.mean(metric).unwrap() < perfect.mean(metric).unwrap(), "{metric}");
        }
        assert!(worse.mean("cd_t").unwrap() > perfect.mean("cd_t").unwrap());
        let literal = EvalOptions { scope: ClassScope::Observed, ..EvalOptions::default() };
        let observed = evaluate(&missing, Some(&gt), &flow, &literal).unwrap();
        assert_eq!(observed.mean("dice_of"), Some(1.0));
    }
}
