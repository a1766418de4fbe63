use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Result};
use crate::flow::{warp_mask, FlowField};
use crate::mask::{boundary, distance_to_set_sq, BinaryMask, ClassId, ClassSet, SegMask, BACKGROUND};

/// Which classes a macro-averaged overlap is taken over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroOptions {
    pub include_background: bool,
    /// Classes scored even when both masks omit them; such a class scores
    /// zero overlap and the maximal contour distance.
    pub reference_classes: Option<ClassSet>,
}

impl Default for MacroOptions {
    fn default() -> Self {
        Self { include_background: true, reference_classes: None }
    }
}

impl MacroOptions {
    pub fn with_reference(classes: ClassSet) -> Self {
        Self { reference_classes: Some(classes), ..Self::default() }
    }

    fn scope(&self, observed: ClassSet) -> ClassSet {
        let mut scope = observed;
        if let Some(extra) = &self.reference_classes {
            scope.extend(extra.iter().copied());
        }
        if !self.include_background {
            scope.remove(&BACKGROUND);
        }
        scope
    }
}

#[derive(Default, Clone, Copy)]
struct Counts {
    a: usize,
    b: usize,
    both: usize,
}

impl Counts {
    fn dice(self) -> f64 {
        if self.a + self.b == 0 {
            0.0
        } else {
            2.0 * self.both as f64 / (self.a + self.b) as f64
        }
    }

    fn iou(self) -> f64 {
        let union = self.a + self.b - self.both;
        if union == 0 {
            0.0
        } else {
            self.both as f64 / union as f64
        }
    }
}

fn class_counts(a: &SegMask, b: &SegMask, keep: Option<&[bool]>) -> (BTreeMap<ClassId, Counts>, ClassSet) {
    let mut counts: BTreeMap<ClassId, Counts> = BTreeMap::new();
    for (i, (&la, &lb)) in a.labels().iter().zip(b.labels()).enumerate() {
        if keep.is_some_and(|k| !k[i]) {
            continue;
        }
        counts.entry(la).or_default().a += 1;
        counts.entry(lb).or_default().b += 1;
        if la == lb {
            counts.entry(la).or_default().both += 1;
        }
    }
    let observed = counts.keys().copied().collect();
    (counts, observed)
}

fn macro_mean(values: impl Iterator<Item = f64>, empty: f64) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        empty
    } else {
        sum / n as f64
    }
}

/// Dice of every class present in either mask, background included.
pub fn per_class_dice(pred: &SegMask, gt: &SegMask) -> Result<BTreeMap<ClassId, f64>> {
    check_dims(pred.dims(), gt.dims())?;
    let (counts, _) = class_counts(pred, gt, None);
    Ok(counts.into_iter().map(|(c, k)| (c, k.dice())).collect())
}

/// Macro Dice over classes present in either mask, background included.
pub fn semantic_dice(pred: &SegMask, gt: &SegMask) -> Result<f64> {
    semantic_dice_with(pred, gt, &MacroOptions::default())
}

pub fn semantic_dice_with(pred: &SegMask, gt: &SegMask, opts: &MacroOptions) -> Result<f64> {
    check_dims(pred.dims(), gt.dims())?;
    let (counts, observed) = class_counts(pred, gt, None);
    let scope = opts.scope(observed);
    Ok(macro_mean(scope.iter().map(|c| counts.get(c).copied().unwrap_or_default().dice()), 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpedConsistency {
    pub dice: f64,
    pub iou: f64,
}

/// Macro Dice and IoU between `warp(m_t, f)` and `m_t1`, restricted to pixels
/// where the flow is valid.
pub fn temporal_warped(m_t: &SegMask, m_t1: &SegMask, f: &FlowField) -> Result<WarpedConsistency> {
    temporal_warped_with(m_t, m_t1, f, &MacroOptions::default())
}

pub fn temporal_warped_with(
    m_t: &SegMask,
    m_t1: &SegMask,
    f: &FlowField,
    opts: &MacroOptions,
) -> Result<WarpedConsistency> {
    check_dims(m_t.dims(), m_t1.dims())?;
    let warped = warp_mask(m_t, f)?;
    let (counts, observed) = class_counts(&warped, m_t1, Some(f.validity()));
    let scope = opts.scope(observed);
    let get = |c: &ClassId| counts.get(c).copied().unwrap_or_default();
    Ok(WarpedConsistency {
        dice: macro_mean(scope.iter().map(|c| get(c).dice()), 1.0),
        iou: macro_mean(scope.iter().map(|c| get(c).iou()), 1.0),
    })
}

/// Classes of the ground-truth pair visible on pixels where `f` is valid,
/// as seen by the warped comparison.
pub fn warped_reference_classes(gt_t: &SegMask, gt_t1: &SegMask, f: &FlowField) -> Result<ClassSet> {
    check_dims(gt_t.dims(), gt_t1.dims())?;
    let warped = warp_mask(gt_t, f)?;
    let mut out = ClassSet::new();
    for (i, &ok) in f.validity().iter().enumerate() {
        if ok {
            out.insert(warped.labels()[i]);
            out.insert(gt_t1.labels()[i]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectConsistency {
    /// Mean symmetric boundary distance over foreground classes, in pixels.
    pub contour_distance: f64,
    pub iou: f64,
}

fn image_diagonal(w: usize, h: usize) -> f64 {
    ((w * w + h * h) as f64).sqrt()
}

/// Average symmetric distance between the boundaries of two nonempty masks.
pub fn boundary_distance(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let (ba, bb) = (boundary(a), boundary(b));
    let w = a.width();
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for i in ba.indices().chain(bb.indices()) {
        let (x, y) = (i % w, i / w);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if x0 == usize::MAX {
        return Ok(0.0);
    }
    // Both sets lie inside the crop, so distances computed on it are exact.
    let (cw, ch) = (x1 - x0 + 1, y1 - y0 + 1);
    let crop = |m: &BinaryMask| BinaryMask::from_fn(cw, ch, |x, y| m.get(x + x0, y + y0));
    let (ca, cb) = (crop(&ba), crop(&bb));
    let da = distance_to_set_sq(&ca);
    let db = distance_to_set_sq(&cb);
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in ca.indices() {
        sum += db[i].sqrt();
        n += 1;
    }
    for i in cb.indices() {
        sum += da[i].sqrt();
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Contour distance and macro IoU between consecutive masks, without flow.
/// Classes present on one side only incur the image diagonal.
pub fn temporal_direct(m_t: &SegMask, m_t1: &SegMask) -> Result<DirectConsistency> {
    temporal_direct_with(m_t, m_t1, &MacroOptions::default())
}

pub fn temporal_direct_with(m_t: &SegMask, m_t1: &SegMask, opts: &MacroOptions) -> Result<DirectConsistency> {
    check_dims(m_t.dims(), m_t1.dims())?;
    let (counts, observed) = class_counts(m_t, m_t1, None);
    let scope = opts.scope(observed);
    let get = |c: &ClassId| counts.get(c).copied().unwrap_or_default();
    let iou = macro_mean(scope.iter().map(|c| get(c).iou()), 1.0);
    let (w, h) = m_t.dims();
    let diag = image_diagonal(w, h);
    let mut distances = Vec::new();
    for &c in scope.iter().filter(|&&c| c != BACKGROUND) {
        let k = get(&c);
        distances.push(if k.a > 0 && k.b > 0 {
            boundary_distance(&m_t.class_mask(c), &m_t1.class_mask(c))?
        } else {
            diag
        });
    }
    Ok(DirectConsistency { contour_distance: macro_mean(distances.into_iter(), 0.0), iou })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mask::LabelSpace;

    fn labels(n: usize) -> Arc<LabelSpace> {
        Arc::new(LabelSpace::anonymous(n).unwrap())
    }

    fn square(w: usize, h: usize, x0: usize, y0: usize, size: usize, class: ClassId) -> SegMask {
        let mut m = SegMask::background(w, h, labels(4));
        for y in y0..y0 + size {
            for x in x0..x0 + size {
                m.set(x, y, class);
            }
        }
        m
    }

    /// Mean over both boundary sets of the distance to the nearest pixel of the other set.
    fn brute_boundary_distance(a: &BinaryMask, b: &BinaryMask) -> f64 {
        let pts = |m: &BinaryMask| -> Vec<(f64, f64)> {
            let w = m.width();
            m.indices().map(|i| ((i % w) as f64, (i / w) as f64)).collect()
        };
        let (pa, pb) = (pts(&boundary(a)), pts(&boundary(b)));
        let nearest = |p: &(f64, f64), set: &[(f64, f64)]| {
            set.iter().map(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()).fold(f64::INFINITY, f64::min)
        };
        let total: f64 =
            pa.iter().map(|p| nearest(p, &pb)).sum::<f64>() + pb.iter().map(|p| nearest(p, &pa)).sum::<f64>();
        total / (pa.len() + pb.len()) as f64
    }

    #[test]
    fn identical_masks_score_one() {
        let m = square(8, 8, 2, 2, 3, 1);
        assert_eq!(semantic_dice(&m, &m).unwrap(), 1.0);
        let d = temporal_direct(&m, &m).unwrap();
        assert_eq!((d.contour_distance, d.iou), (0.0, 1.0));
        let w = temporal_warped(&m, &m, &FlowField::zeros(8, 8)).unwrap();
        assert_eq!((w.dice, w.iou), (1.0, 1.0));
    }

    #[test]
    fn missing_class_scores_zero_dice() {
        let gt = square(8, 8, 2, 2, 3, 2);
        let pred = SegMask::background(8, 8, labels(4));
        let per = per_class_dice(&pred, &gt).unwrap();
        assert_eq!(per[&2], 0.0);
        // background: pred 64 px, gt 55 px, overlap 55
        assert!((per[&0] - 110.0 / 119.0).abs() < 1e-12);
        let mean = semantic_dice(&pred, &gt).unwrap();
        assert!((mean - 55.0 / 119.0).abs() < 1e-12);
        let fg_only =
            semantic_dice_with(&pred, &gt, &MacroOptions { include_background: false, reference_classes: None })
                .unwrap();
        assert_eq!(fg_only, 0.0);
    }

    #[test]
    fn shifted_square_contour_distance_matches_oracle() {
        let a = square(12, 12, 2, 2, 4, 1);
        let b = square(12, 12, 3, 2, 4, 1);
        let expected = brute_boundary_distance(&a.class_mask(1), &b.class_mask(1));
        assert!((expected - 0.5).abs() < 1e-12);
        let d = temporal_direct(&a, &b).unwrap();
        assert!((d.contour_distance - expected).abs() < 1e-9);
    }

    #[test]
    fn boundary_distance_agrees_with_brute_force_on_irregular_shapes() {
        let a = BinaryMask::from_fn(14, 10, |x, y| (x as i32 - 5).pow(2) + (y as i32 - 4).pow(2) <= 9);
        let b = BinaryMask::from_fn(14, 10, |x, y| (6..13).contains(&x) && (1..9).contains(&y) && (x + y) % 7 != 0);
        let got = boundary_distance(&a, &b).unwrap();
        assert!((got - brute_boundary_distance(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn one_sided_class_costs_the_diagonal() {
        let a = square(6, 8, 1, 1, 2, 1);
        let b = SegMask::background(6, 8, labels(4));
        let d = temporal_direct(&a, &b).unwrap();
        assert!((d.contour_distance - 10.0).abs() < 1e-12);
    }

    #[test]
    fn reference_classes_penalise_omissions() {
        let empty = SegMask::background(8, 8, labels(4));
        let plain = temporal_direct(&empty, &empty).unwrap();
        assert_eq!((plain.contour_distance, plain.iou), (0.0, 1.0));
        let opts = MacroOptions::with_reference([0, 2].into_iter().collect());
        let scoped = temporal_direct_with(&empty, &empty, &opts).unwrap();
        assert!((scoped.contour_distance - 128f64.sqrt()).abs() < 1e-12);
        assert_eq!(scoped.iou, 0.5);
        let warped = temporal_warped_with(&empty, &empty, &FlowField::zeros(8, 8), &opts).unwrap();
        assert_eq!((warped.dice, warped.iou), (0.5, 0.5));
    }

    #[test]
    fn warped_metrics_skip_invalid_pixels() {
        let a = square(8, 4, 0, 0, 4, 1);
        let b = square(8, 4, 4, 0, 4, 1);
        let mut f = FlowField::constant(8, 4, [-4.0, 0.0]);
        let w = temporal_warped(&a, &b, &f).unwrap();
        assert_eq!((w.dice, w.iou), (1.0, 1.0));
        for i in 0..8 {
            f.invalidate(i);
        }
        let w = temporal_warped(&a, &b, &f).unwrap();
        assert_eq!((w.dice, w.iou), (1.0, 1.0));
        let gt_classes = warped_reference_classes(&a, &b, &FlowField::constant(8, 4, [-4.0, 0.0])).unwrap();
        assert_eq!(gt_classes, [0, 1].into_iter().collect());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = square(8, 8, 0, 0, 2, 1);
        let b = square(8, 7, 0, 0, 2, 1);
        assert!(semantic_dice(&a, &b).is_err());
        assert!(temporal_direct(&a, &b).is_err());
        assert!(temporal_warped(&a, &a, &FlowField::zeros(7, 8)).is_err());
    }
}
