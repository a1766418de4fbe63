use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{bbox_of, connected_components, dice, BBox, BinaryMask, ClassId, SegMask};

/// One detected object: class distribution, box, confidence and a
/// full-resolution binary mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class_probs: Vec<f64>,
    pub bbox: BBox,
    pub score: f64,
    pub mask: BinaryMask,
}

impl Detection {
    pub fn new(class_probs: Vec<f64>, bbox: BBox, score: f64, mask: BinaryMask) -> Result<Self> {
        validate_distribution(&class_probs)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!("detection score {score} outside [0, 1]")));
        }
        Ok(Self { class_probs, bbox, score, mask })
    }

    /// Detection with all probability mass on `class` and the mask's tight box.
    pub fn one_hot(class: ClassId, num_classes: usize, score: f64, mask: BinaryMask) -> Result<Self> {
        if class as usize >= num_classes {
            return Err(Error::invalid(format!("class {class} outside {num_classes} classes")));
        }
        let mut probs = vec![0.0; num_classes];
        probs[class as usize] = 1.0;
        let bbox = bbox_of(&mask)?;
        Self::new(probs, bbox, score, mask)
    }

    /// Most probable class; the lowest index wins ties.
    pub fn class(&self) -> ClassId {
        let mut best = 0;
        for (i, &p) in self.class_probs.iter().enumerate() {
            if p > self.class_probs[best] {
                best = i;
            }
        }
        best as ClassId
    }
}

pub(crate) fn validate_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("empty class distribution"));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::invalid("class probabilities must be finite and nonnegative"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("class probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// Instances of a semantic mask: one detection per 4-connected component of
/// every foreground class, with score 1.
pub fn instances_from_mask(m: &SegMask) -> Vec<Detection> {
    let n = m.label_space().len();
    let mut out = Vec::new();
    for class in m.foreground_classes() {
        for comp in connected_components(&m.class_mask(class)) {
            out.push(Detection::one_hot(class, n, 1.0, comp).expect("nonempty component of a valid class"));
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Matching {
    /// `(pred index, gt index, box IoU)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchStrategy {
    /// Assignment maximising the summed box IoU.
    #[default]
    Optimal,
    /// Predictions in descending score order take their best free ground truth.
    Greedy,
}

/// Minimum-cost assignment for a `rows x cols` matrix with `rows <= cols`;
/// returns the column of every row. Shortest augmenting paths with potentials.
pub(crate) fn assign_min_cost(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = cost.len();
    assert!(rows <= cols, "assignment needs rows <= cols");
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![usize::MAX; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Pairs maximising the summed IoU of `iou[pred][gt]` (before thresholding).
pub fn optimal_assignment(iou: &[Vec<f64>], num_gts: usize) -> Vec<(usize, usize)> {
    let num_preds = iou.len();
    if num_preds == 0 || num_gts == 0 {
        return Vec::new();
    }
    if num_preds <= num_gts {
        let cost: Vec<Vec<f64>> = iou.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        assign_min_cost(&cost, num_gts).into_iter().enumerate().collect()
    } else {
        let cost: Vec<Vec<f64>> = (0..num_gts).map(|g| (0..num_preds).map(|p| -iou[p][g]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> =
            assign_min_cost(&cost, num_preds).into_iter().enumerate().map(|(g, p)| (p, g)).collect();
        pairs.sort_unstable();
        pairs
    }
}

pub fn box_iou_matrix(preds: &[Detection], gts: &[Detection]) -> Vec<Vec<f64>> {
    preds.iter().map(|p| gts.iter().map(|g| p.bbox.iou(&g.bbox)).collect()).collect()
}

/// Slack on the IoU threshold: pixel-grid boxes give exact ratios such as 1/2
/// that normalized coordinates reproduce only to rounding.
const IOU_SLACK: f64 = 1e-9;

/// One-to-one matching on box IoU; pairs below `thresh` are discarded.
pub fn match_instances(
    preds: &[Detection],
    gts: &[Detection],
    thresh: f64,
    strategy: MatchStrategy,
) -> Result<Matching> {
    if !(thresh > 0.0 && thresh < 1.0) {
        return Err(Error::invalid(format!("IoU threshold {thresh} outside (0, 1)")));
    }
    let iou = box_iou_matrix(preds, gts);
    let passes = |p: usize, g: usize| iou[p][g] >= thresh - IOU_SLACK;
    let candidates: Vec<(usize, usize)> = match strategy {
        MatchStrategy::Optimal => optimal_assignment(&iou, gts.len()),
        MatchStrategy::Greedy => {
            let mut order: Vec<usize> = (0..preds.len()).collect();
            order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));
            let mut taken = vec![false; gts.len()];
            let mut pairs = Vec::new();
            for p in order {
                let best = (0..gts.len())
                    .filter(|&g| !taken[g] && passes(p, g))
                    .max_by(|&a, &b| iou[p][a].total_cmp(&iou[p][b]).then(b.cmp(&a)));
                if let Some(g) = best {
                    taken[g] = true;
                    pairs.push((p, g));
                }
            }
            pairs.sort_unstable();
            pairs
        }
    };
    let pairs: Vec<(usize, usize, f64)> =
        candidates.into_iter().filter(|&(p, g)| passes(p, g)).map(|(p, g)| (p, g, iou[p][g])).collect();
    let unmatched_preds = (0..preds.len()).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect();
    let unmatched_gts = (0..gts.len()).filter(|i| !pairs.iter().any(|p| p.1 == *i)).collect();
    Ok(Matching { pairs, unmatched_preds, unmatched_gts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScores {
    pub class_f1: f64,
    pub bb_iou_50: f64,
    pub mask_dice_50: f64,
}

/// Class F1, mean box IoU and mean mask Dice over instances matched at IoU 0.5.
/// A frame with neither predictions nor ground truth scores 1 everywhere.
pub fn detection_scores(preds: &[Detection], gts: &[Detection], strategy: MatchStrategy) -> Result<DetectionScores> {
    if preds.is_empty() && gts.is_empty() {
        return Ok(DetectionScores { class_f1: 1.0, bb_iou_50: 1.0, mask_dice_50: 1.0 });
    }
    let matching = match_instances(preds, gts, 0.5, strategy)?;
    let tp = matching.pairs.iter().filter(|&&(p, g, _)| preds[p].class() == gts[g].class()).count();
    let fp = preds.len() - tp;
    let fn_ = gts.len() - tp;
    let class_f1 = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
    let (bb_iou_50, mask_dice_50) = if matching.pairs.is_empty() {
        (0.0, 0.0)
    } else {
        let n = matching.pairs.len() as f64;
        let box_sum: f64 = matching.pairs.iter().map(|p| p.2).sum();
        let mut dice_sum = 0.0;
        for &(p, g, _) in &matching.pairs {
            dice_sum += dice(&preds[p].mask, &gts[g].mask)?;
        }
        (box_sum / n, dice_sum / n)
    };
    Ok(DetectionScores { class_f1, bb_iou_50, mask_dice_50 })
}
