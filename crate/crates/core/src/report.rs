//! Markdown comparison tables and SVG metric plots.

use std::fmt::Write as _;

use crate::controller::ChangeEvent;
use crate::error::{Error, Result};
use crate::metrics::{higher_is_better, MetricReport, METRIC_NAMES};

/// One row per report with the per-metric means; the best value of every
/// column is bold. Columns no report defines are left out.
pub fn compare_markdown(reports: &[(String, MetricReport)]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::invalid("nothing to compare"));
    }
    if let Some((name, _)) = reports.iter().find(|(_, r)| r.rows.is_empty()) {
        return Err(Error::invalid(format!("report `{name}` has no rows")));
    }
    let means: Vec<[Option<f64>; 8]> = reports.iter().map(|(_, r)| r.means()).collect();
    let columns: Vec<usize> = (0..METRIC_NAMES.len()).filter(|&c| means.iter().any(|m| m[c].is_some())).collect();
    let mut out = String::from("| method |");
    for &c in &columns {
        let _ = write!(out, " {} |", METRIC_NAMES[c]);
    }
    out.push_str("\n|---|");
    for _ in &columns {
        out.push_str("---:|");
    }
    out.push('\n');
    let best: Vec<Option<f64>> = columns
        .iter()
        .map(|&c| {
            let vals = means.iter().filter_map(|m| m[c]);
            if higher_is_better(METRIC_NAMES[c]) {
                vals.reduce(f64::max)
            } else {
                vals.reduce(f64::min)
            }
        })
        .collect();
    for ((name, _), m) in reports.iter().zip(&means) {
        let _ = write!(out, "| {name} |");
        for (&c, b) in columns.iter().zip(&best) {
            let cell = match m[c] {
                None => String::new(),
                Some(v) if Some(v) == *b => format!("**{v:.4}**"),
                Some(v) => format!("{v:.4}"),
            };
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    Ok(out)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 360.0;
const MARGIN: [f64; 4] = [50.0, 20.0, 20.0, 40.0]; // left, right, top, bottom
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Per-frame lines for `metrics` over a shared y axis, with a dashed
/// vertical marker at every event trigger and a dotted one at its re-prompt.
pub fn plot_svg(report: &MetricReport, metrics: &[&str], events: &[ChangeEvent]) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::invalid("cannot plot an empty report"));
    }
    for m in metrics {
        if !METRIC_NAMES.contains(m) {
            return Err(Error::invalid(format!("unknown metric `{m}`")));
        }
    }
    let series: Vec<(&str, Vec<(f64, f64)>)> = metrics
        .iter()
        .map(|&m| (m, report.rows.iter().filter_map(|r| r.get(m).map(|v| (r.frame as f64, v))).collect()))
        .collect();
    let (f0, f1) = report
        .rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.frame as f64), b.max(r.frame as f64)));
    let f1 = if f1 > f0 { f1 } else { f0 + 1.0 };
    let (mut y0, mut y1) = (0.0f64, 1.0f64);
    for (_, pts) in &series {
        for &(_, v) in pts {
            y0 = y0.min(v);
            y1 = y1.max(v);
        }
    }
    let [ml, mr, mt, mb] = MARGIN;
    let px = |f: f64| ml + (f - f0) / (f1 - f0) * (WIDTH - ml - mr);
    let py = |v: f64| HEIGHT - mb - (v - y0) / (y1 - y0) * (HEIGHT - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<path d="M{ml} {mt}V{}H{}" fill="none" stroke="black"/>"#, HEIGHT - mb, WIDTH - mr);
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, ml - 4.0, py(v) + 4.0);
    }
    for i in 0..=4 {
        let f = f0 + (f1 - f0) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{f:.0}</text>"#, px(f), HEIGHT - mb + 16.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">frame</text>"#,
        (ml + WIDTH - mr) / 2.0,
        HEIGHT - 6.0
    );
    for e in events {
        for (frame, dash) in [(e.trigger, "6 3"), (e.reprompt, "2 3")] {
            let x = px(frame as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{mt}" x2="{x:.1}" y2="{}" stroke="#555" stroke-dasharray="{dash}"/>"##,
                HEIGHT - mb
            );
        }
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if !pts.is_empty() {
            let mut d = String::new();
            for (i, &(f, v)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{:.1} {:.1}", if i == 0 { "M" } else { "L" }, px(f), py(v));
            }
            let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        }
        let ly = mt + 14.0 * k as f64 + 10.0;
        let lx = WIDTH - mr - 110.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
            lx + 16.0,
            lx + 20.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FrameMetrics;

    fn report(vals: &[(f64, f64)]) -> MetricReport {
        MetricReport::new(
            vals.iter()
                .enumerate()
                .map(|(t, &(dice, cd))| {
                    let mut r = FrameMetrics::new(t);
                    r.set("semantic_dice", dice);
                    r.set("cd_t", cd);
                    r
                })
                .collect(),
        )
    }

    #[test]
    fn best_values_are_bold_per_direction() {
        let a = report(&[(0.9, 2.0), (0.7, 4.0)]);
        let b = report(&[(0.5, 1.0), (0.5, 1.0)]);
        let table = compare_markdown(&[("a".into(), a), ("b".into(), b)]).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "| method | cd_t | semantic_dice |");
        assert_eq!(lines[2], "| a | 3.0000 | **0.8000** |");
        assert_eq!(lines[3], "| b | **1.0000** | 0.5000 |");
    }

    #[test]
    fn single_report_and_empty_input() {
        let one = compare_markdown(&[("only".into(), report(&[(1.0, 0.0)]))]).unwrap();
        assert_eq!(one.lines().count(), 3);
        assert!(compare_markdown(&[]).is_err());
        assert!(compare_markdown(&[("void".into(), MetricReport::default())]).is_err());
    }

    #[test]
    fn svg_is_deterministic_and_marks_events() {
        let r = report(&[(1.0, 0.0), (0.5, 3.0), (0.75, 1.0)]);
        let ev = ChangeEvent { trigger: 2, reprompt: 1, added: [2].into(), removed: Default::default() };
        let svg = plot_svg(&r, &["semantic_dice", "cd_t"], std::slice::from_ref(&ev)).unwrap();
        assert_eq!(svg, plot_svg(&r, &["semantic_dice", "cd_t"], &[ev]).unwrap());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains(">semantic_dice</text>"));
        assert!(plot_svg(&r, &["nope"], &[]).is_err());
        assert!(plot_svg(&MetricReport::default(), &["cd_t"], &[]).is_err());
    }
}
