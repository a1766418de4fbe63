use crate::error::{check_dims, Error, Result};
use crate::mask::{BinaryMask, ClassId};

use super::detection::validate_distribution;

const LOG_FLOOR: f64 = 1e-12;

/// Cross-entropy `-ln p[target]`, with the probability floored at `1e-12`.
pub fn cls_loss(probs: &[f64], target: ClassId) -> Result<f64> {
    validate_distribution(probs)?;
    let p = probs
        .get(target as usize)
        .ok_or_else(|| Error::invalid(format!("target class {target} outside {} classes", probs.len())))?;
    Ok(-p.max(LOG_FLOOR).ln())
}

fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Sum of smooth-L1 (beta = 1) over the four box coordinates.
pub fn box_loss(pred: &[f64; 4], target: &[f64; 4]) -> Result<f64> {
    if pred.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite box coordinate"));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| smooth_l1(p - t)).sum())
}

/// Per-pixel foreground probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMask {
    width: usize,
    height: usize,
    probs: Vec<f64>,
}

impl ProbMask {
    pub fn new(width: usize, height: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != width * height {
            return Err(Error::invalid(format!("{} probabilities for a {width}x{height} mask", probs.len())));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("mask probabilities must lie in [0, 1]"));
        }
        Ok(Self { width, height, probs })
    }

    pub fn from_binary(m: &BinaryMask) -> Self {
        Self {
            width: m.width(),
            height: m.height(),
            probs: m.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Mean per-pixel binary cross-entropy, logs floored at `1e-12`.
pub fn mask_loss(pred: &ProbMask, target: &BinaryMask) -> Result<f64> {
    check_dims(target.dims(), pred.dims())?;
    let n = pred.probs.len();
    let sum: f64 = pred
        .probs
        .iter()
        .zip(target.bits())
        .map(|(&p, &y)| if y { -p.max(LOG_FLOOR).ln() } else { -(1.0 - p).max(LOG_FLOOR).ln() })
        .sum();
    Ok(sum / n as f64)
}

/// One matched prediction with its training targets; any term may be absent.
#[derive(Debug, Clone, Default)]
pub struct LossTerms {
    pub class: Option<(Vec<f64>, ClassId)>,
    pub bbox: Option<([f64; 4], [f64; 4])>,
    pub mask: Option<(ProbMask, BinaryMask)>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sum of the mean class, box and mask losses, each averaged over the terms
/// that are present.
pub fn total_loss(items: &[LossTerms]) -> Result<f64> {
    let mut cls = Vec::new();
    let mut boxes = Vec::new();
    let mut masks = Vec::new();
    for item in items {
        if let Some((p, c)) = &item.class {
            cls.push(cls_loss(p, *c)?);
        }
        if let Some((p, t)) = &item.bbox {
            boxes.push(box_loss(p, t)?);
        }
        if let Some((p, t)) = &item.mask {
            masks.push(mask_loss(p, t)?);
        }
    }
    Ok(mean(&cls) + mean(&boxes) + mean(&masks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert!((cls_loss(&[0.25, 0.25, 0.5], 2).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((cls_loss(&[0.0, 1.0], 0).unwrap() - 1e12f64.ln()).abs() < 1e-9);
        assert!(cls_loss(&[0.5, 0.5], 2).is_err());
        assert_eq!(box_loss(&[0.0, 0.0, 0.0, 2.0], &[0.0; 4]).unwrap(), 1.5);
        assert_eq!(box_loss(&[0.5, 0.0, 0.0, 0.0], &[0.0; 4]).unwrap(), 0.125);
        let target = BinaryMask::from_fn(3, 2, |x, _| x == 1);
        assert_eq!(mask_loss(&ProbMask::from_binary(&target), &target).unwrap(), 0.0);
        let half = ProbMask::new(3, 2, vec![0.5; 6]).unwrap();
        assert!((mask_loss(&half, &target).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn total_is_the_sum_of_term_means() {
        let target = BinaryMask::from_fn(2, 2, |x, y| x == y);
        let one = LossTerms {
            class: Some((vec![0.0, 1.0], 1)),
            bbox: Some(([0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 0.0, 1.0])),
            mask: Some((ProbMask::from_binary(&target), target.clone())),
        };
        assert_eq!(total_loss(std::slice::from_ref(&one)).unwrap(), 0.5);
        let other = LossTerms { class: Some((vec![0.5, 0.5], 0)), ..LossTerms::default() };
        let got = total_loss(&[one, other]).unwrap();
        assert!((got - (0.5 * 2f64.ln() + 0.5)).abs() < 1e-12);
        assert_eq!(total_loss(&[]).unwrap(), 0.0);
    }
}
