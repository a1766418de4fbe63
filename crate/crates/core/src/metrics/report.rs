use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric columns, in CSV order.
pub const METRIC_NAMES: [&str; 8] =
    ["dice_of", "iou_of", "cd_t", "iou_t", "semantic_dice", "class_f1", "bb_iou_50", "mask_dice_50"];

/// Whether larger values of a metric are better.
pub fn higher_is_better(metric: &str) -> bool {
    metric != "cd_t"
}

/// Metrics of one frame; a column is `None` when it does not apply (for
/// example temporal metrics at the first frame, or no ground truth).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub values: [Option<f64>; 8],
}

impl FrameMetrics {
    pub fn new(frame: usize) -> Self {
        Self { frame, values: [None; 8] }
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|m| *m == metric).and_then(|i| self.values[i])
    }

    pub fn set(&mut self, metric: &str, value: f64) {
        let i = METRIC_NAMES.iter().position(|m| *m == metric).unwrap_or_else(|| panic!("unknown metric `{metric}`"));
        self.values[i] = Some(value);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<FrameMetrics>,
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricReport {
    pub fn new(rows: Vec<FrameMetrics>) -> Self {
        Self { rows }
    }

    /// Concatenation; the mean of the merged report weights every frame equally.
    pub fn merge(mut self, other: MetricReport) -> Self {
        self.rows.extend(other.rows);
        self
    }

    /// Per-column mean over the frames where the column is defined.
    pub fn means(&self) -> [Option<f64>; 8] {
        let mut out = [None; 8];
        for (i, slot) in out.iter_mut().enumerate() {
            let (sum, n) = self.rows.iter().filter_map(|r| r.values[i]).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n > 0 {
                *slot = Some(sum / n as f64);
            }
        }
        out
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|m| *m == metric).and_then(|i| self.means()[i])
    }

    /// One row per frame followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame");
        for m in METRIC_NAMES {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        let mut push_row = |label: String, values: &[Option<f64>; 8]| {
            out.push_str(&label);
            for v in values {
                let _ = write!(out, ",{}", fmt_value(*v));
            }
            out.push('\n');
        };
        for r in &self.rows {
            push_row(r.frame.to_string(), &r.values);
        }
        push_row("mean".to_string(), &self.means());
        out
    }

    /// Parses per-frame rows; the `mean` row is recomputed, not trusted.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or_default();
        let expected: Vec<&str> = std::iter::once("frame").chain(METRIC_NAMES).collect();
        if header.split(',').collect::<Vec<_>>() != expected {
            return Err(Error::invalid(format!("unexpected metrics header `{header}`")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 9 {
                return Err(Error::invalid(format!("metrics line {}: expected 9 cells", n + 1)));
            }
            if cells[0] == "mean" {
                continue;
            }
            let frame = cells[0]
                .parse()
                .map_err(|_| Error::invalid(format!("metrics line {}: bad frame `{}`", n + 1, cells[0])))?;
            let mut row = FrameMetrics::new(frame);
            for (i, cell) in cells[1..].iter().enumerate() {
                if !cell.is_empty() {
                    row.values[i] = Some(
                        cell.parse()
                            .map_err(|_| Error::invalid(format!("metrics line {}: bad value `{cell}`", n + 1)))?,
                    );
                }
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn row(frame: usize, dice: f64) -> FrameMetrics {
        let mut r = FrameMetrics::new(frame);
        r.set("semantic_dice", dice);
        r
    }

    #[test]
    fn csv_has_header_rows_and_mean() {
        let mut first = row(0, 0.5);
        first.set("cd_t", 1.25);
        let report = MetricReport::new(vec![first, row(1, 1.0)]);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "frame,dice_of,iou_of,cd_t,iou_t,semantic_dice,class_f1,bb_iou_50,mask_dice_50");
        assert_eq!(lines[1], "0,,,1.250000,,0.500000,,,");
        assert_eq!(lines[3], "mean,,,1.250000,,0.750000,,,");
        assert_eq!(MetricReport::from_csv(&csv).unwrap(), report);
        assert!(MetricReport::from_csv("frame,x\n").is_err());
    }

    proptest! {
        #[test]
        fn merging_is_associative_and_order_independent(a in proptest::collection::vec(0.0f64..1.0, 0..6),
                                                        b in proptest::collection::vec(0.0f64..1.0, 0..6),
                                                        c in proptest::collection::vec(0.0f64..1.0, 0..6)) {
            let mk = |v: &Vec<f64>| MetricReport::new(v.iter().enumerate().map(|(i, &d)| row(i, d)).collect());
            let (ra, rb, rc) = (mk(&a), mk(&b), mk(&c));
            let left = ra.clone().merge(rb.clone()).merge(rc.clone()).mean("semantic_dice");
            let right = ra.clone().merge(rb.clone().merge(rc.clone())).mean("semantic_dice");
            let swapped = rc.merge(ra).merge(rb).mean("semantic_dice");
            match (left, right, swapped) {
                (Some(l), Some(r), Some(s)) => {
                    prop_assert!((l - r).abs() < 1e-12);
                    prop_assert!((l - s).abs() < 1e-12);
                }
                (l, r, s) => {
                    prop_assert!(l.is_none() && r.is_none() && s.is_none());
                }
            }
        }
    }
}
