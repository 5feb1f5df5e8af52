//! Static overlay plot: road cloud in gray, trajectory cloud colored by label
//! before and after the fine registration.

use std::fmt::Write;

use radarloc::geometry::{BehaviorLabel, LabeledCloud};

const PANEL: f64 = 600.0;
const MARGIN: f64 = 20.0;
const MAX_POINTS: usize = 12_000;

fn color(label: BehaviorLabel) -> &'static str {
    match label {
        BehaviorLabel::LeftTurn => "#1f77b4",
        BehaviorLabel::RightTurn => "#d62728",
        BehaviorLabel::Straight => "#2ca02c",
    }
}

struct Frame {
    min: [f64; 2],
    scale: f64,
}

impl Frame {
    fn map(&self, p: [f64; 2], x0: f64) -> (f64, f64) {
        (
            x0 + MARGIN + (p[0] - self.min[0]) * self.scale,
            MARGIN + PANEL - (p[1] - self.min[1]) * self.scale,
        )
    }
}

fn stride(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

fn panel(out: &mut String, frame: &Frame, x0: f64, title: &str, target: &LabeledCloud, source: &LabeledCloud, sensor: [f64; 2]) {
    let _ = writeln!(out, r#"<g><text x="{:.1}" y="14" font-size="12">{title}</text>"#, x0 + MARGIN);
    let _ = writeln!(
        out,
        r#"<polyline points="{a:.1},{b:.1} {c:.1},{b:.1} {c:.1},{d:.1} {a:.1},{d:.1} {a:.1},{b:.1}" fill="none" stroke="black" stroke-width="0.5"/>"#,
        a = x0 + MARGIN,
        b = MARGIN,
        c = x0 + MARGIN + PANEL,
        d = MARGIN + PANEL
    );
    for p in target.iter().step_by(stride(target.len())) {
        let (x, y) = frame.map([p.x, p.y], x0);
        let _ = writeln!(out, r##"<circle cx="{x:.1}" cy="{y:.1}" r="0.6" fill="#b0b0b0"/>"##);
    }
    for p in source.iter().step_by(stride(source.len())) {
        let (x, y) = frame.map([p.x, p.y], x0);
        let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="0.8" fill="{}"/>"#, color(p.label));
    }
    let (x, y) = frame.map(sensor, x0);
    let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="none" stroke="black"/></g>"#);
}

/// Two square panels sharing one scale, the left before and the right after
/// registration.
pub fn overlay(target: &LabeledCloud, before: &LabeledCloud, after: &LabeledCloud, sensor: [f64; 2]) -> String {
    let mut min = sensor;
    let mut max = sensor;
    for p in before.iter().chain(after.iter()) {
        min = [min[0].min(p.x), min[1].min(p.y)];
        max = [max[0].max(p.x), max[1].max(p.y)];
    }
    let pad = 10.0;
    let (min, max) = ([min[0] - pad, min[1] - pad], [max[0] + pad, max[1] + pad]);
    let frame = Frame {
        min,
        scale: PANEL / (max[0] - min[0]).max(max[1] - min[1]),
    };
    let inside = |x: f64, y: f64| x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1];
    let target: LabeledCloud = target.iter().filter(|p| inside(p.x, p.y)).copied().collect();

    let width = 2.0 * (PANEL + 2.0 * MARGIN);
    let height = PANEL + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    panel(&mut out, &frame, 0.0, "before", &target, before, sensor);
    panel(&mut out, &frame, PANEL + 2.0 * MARGIN, "after", &target, after, sensor);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use radarloc::geometry::LabeledPoint;

    #[test]
    fn draws_every_source_point_in_both_panels() {
        let target: LabeledCloud = (0..10).map(|i| LabeledPoint::new(i as f64, 0.0, 0.0, BehaviorLabel::Straight)).collect();
        let src: LabeledCloud = vec![
            LabeledPoint::new(1.0, 1.0, 0.0, BehaviorLabel::LeftTurn),
            LabeledPoint::new(2.0, 1.0, 0.0, BehaviorLabel::RightTurn),
        ]
        .into_iter()
        .collect();
        let s = overlay(&target, &src, &src, [0.0, 0.0]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert_eq!(s.matches("#1f77b4").count(), 2);
        assert_eq!(s.matches("#d62728").count(), 2);
        assert_eq!(s.matches("#b0b0b0").count(), 20);
    }
}
