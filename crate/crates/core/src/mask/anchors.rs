use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::geometry::{connected_components, distance_to_boundary_sq};
use super::types::{BinaryMask, ClassId, SegMask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AnchorPoint {
    pub x: usize,
    pub y: usize,
    pub positive: bool,
}

/// Point prompt for one class, optionally paired with the class mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorPrompt {
    pub class_id: ClassId,
    pub points: Vec<AnchorPoint>,
    pub mask: Option<BinaryMask>,
}

impl AnchorPrompt {
    pub fn new(
        class_id: ClassId,
        points: Vec<AnchorPoint>,
        mask: Option<BinaryMask>,
        dims: (usize, usize),
    ) -> Result<Self> {
        if points.is_empty() && mask.is_none() {
            return Err(Error::invalid("anchor prompt needs points or a mask"));
        }
        for p in &points {
            if p.x >= dims.0 || p.y >= dims.1 {
                return Err(Error::invalid(format!("anchor point ({}, {}) outside image", p.x, p.y)));
            }
            if let Some(m) = &mask {
                if p.positive && !m.get(p.x, p.y) {
                    return Err(Error::invalid(format!("positive anchor ({}, {}) lies outside its mask", p.x, p.y)));
                }
            }
        }
        if let Some(m) = &mask {
            if m.dims() != dims {
                return Err(Error::Dimension { expected: dims, found: m.dims() });
            }
        }
        Ok(Self { class_id, points, mask })
    }

    pub fn positive_points(&self) -> impl Iterator<Item = &AnchorPoint> {
        self.points.iter().filter(|p| p.positive)
    }
}

/// Samples `n_a` positive anchors per connected component of `class_id`.
///
/// The first point of each component is the pixel farthest from the
/// component boundary (first in row-major order on ties); the rest are drawn
/// without replacement from the component interior using a generator seeded
/// from `seed`, the class and the component index.
pub fn sample_anchors(m: &SegMask, class_id: ClassId, n_a: usize, seed: u64) -> Result<AnchorPrompt> {
    if n_a == 0 {
        return Err(Error::invalid("n_a must be at least 1"));
    }
    let class_mask = m.class_mask(class_id);
    if class_mask.is_empty() {
        return Err(Error::invalid(format!("class {class_id} is absent from the mask")));
    }
    let w = m.width();
    let mut points = Vec::new();
    for (ci, comp) in connected_components(&class_mask).iter().enumerate() {
        let dist = distance_to_boundary_sq(comp);
        let mut best = None::<(usize, f64)>;
        for i in comp.indices() {
            if best.is_none_or(|(_, d)| dist[i] > d) {
                best = Some((i, dist[i]));
            }
        }
        let (center, _) = best.expect("component is nonempty");
        points.push(AnchorPoint { x: center % w, y: center / w, positive: true });
        if n_a == 1 {
            continue;
        }
        let mut pool: Vec<usize> = comp.indices().filter(|&i| i != center && dist[i] > 1.0).collect();
        if pool.is_empty() {
            pool = comp.indices().filter(|&i| i != center).collect();
        }
        let take = (n_a - 1).min(pool.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((class_id as u64) << 32) | ci as u64);
        for k in index::sample(&mut rng, pool.len(), take) {
            let i = pool[k];
            points.push(AnchorPoint { x: i % w, y: i / w, positive: true });
        }
    }
    AnchorPrompt::new(class_id, points, Some(class_mask), m.dims())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mask::LabelSpace;

    fn labels(n: usize) -> Arc<LabelSpace> {
        Arc::new(LabelSpace::anonymous(n).unwrap())
    }

    /// Brute force: pixel with the largest squared distance to any non-member
    /// (including a one-pixel ring outside the image).
    fn brute_pole(m: &BinaryMask) -> (usize, usize) {
        let (w, h) = (m.width() as i64, m.height() as i64);
        let mut best = (0, 0, -1i64);
        for y in 0..h {
            for x in 0..w {
                if !m.get(x as usize, y as usize) {
                    continue;
                }
                let mut d = i64::MAX;
                for yy in -1..=h {
                    for xx in -1..=w {
                        let inside = xx >= 0 && yy >= 0 && xx < w && yy < h && m.get(xx as usize, yy as usize);
                        if !inside {
                            d = d.min((xx - x).pow(2) + (yy - y).pow(2));
                        }
                    }
                }
                if d > best.2 {
                    best = (x as usize, y as usize, d);
                }
            }
        }
        (best.0, best.1)
    }

    #[test]
    fn single_anchor_on_square_is_its_centre() {
        let mut m = SegMask::background(9, 9, labels(3));
        for y in 2..7 {
            for x in 2..7 {
                m.set(x, y, 1);
            }
        }
        let p = sample_anchors(&m, 1, 1, 7).unwrap();
        assert_eq!(brute_pole(&m.class_mask(1)), (4, 4));
        assert_eq!(p.points, vec![AnchorPoint { x: 4, y: 4, positive: true }]);
        assert_eq!(p.mask.as_ref().unwrap(), &m.class_mask(1));
    }

    #[test]
    fn sampling_is_deterministic_and_per_component() {
        let mut m = SegMask::background(16, 12, labels(3));
        for y in 1..5 {
            for x in 1..6 {
                m.set(x, y, 2);
            }
        }
        for y in 6..11 {
            for x in 9..15 {
                m.set(x, y, 2);
            }
        }
        let a = sample_anchors(&m, 2, 2, 11).unwrap();
        let b = sample_anchors(&m, 2, 2, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 4);
        let comps = connected_components(&m.class_mask(2));
        for c in &comps {
            assert_eq!(a.points.iter().filter(|p| c.get(p.x, p.y)).count(), 2);
        }
    }

    #[test]
    fn absent_class_is_an_error() {
        let m = SegMask::background(4, 4, labels(3));
        assert!(sample_anchors(&m, 1, 1, 0).is_err());
    }

    #[test]
    fn prompt_validation() {
        let mask = BinaryMask::from_fn(4, 4, |x, _| x < 2);
        let inside = AnchorPoint { x: 0, y: 0, positive: true };
        let outside = AnchorPoint { x: 3, y: 0, positive: true };
        assert!(AnchorPrompt::new(1, vec![inside], Some(mask.clone()), (4, 4)).is_ok());
        assert!(AnchorPrompt::new(1, vec![outside], Some(mask), (4, 4)).is_err());
        assert!(AnchorPrompt::new(1, vec![], None, (4, 4)).is_err());
        assert!(AnchorPrompt::new(1, vec![AnchorPoint { x: 4, y: 0, positive: false }], None, (4, 4)).is_err());
    }
}
