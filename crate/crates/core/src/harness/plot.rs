//! Minimal SVG line chart: one line per method with a ±1 stderr band.

use std::fmt::Write;

use crate::harness::config::ExperimentKind;
use crate::harness::output::SummaryRow;

const W: f64 = 640.0;
const H: f64 = 420.0;
const M: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn render_svg(kind: ExperimentKind, rows: &[SummaryRow]) -> String {
    let finite: Vec<&SummaryRow> = rows.iter().filter(|r| r.mean.is_finite()).collect();
    let mut methods: Vec<&str> = Vec::new();
    for r in &finite {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &finite {
        x0 = x0.min(r.grid_value);
        x1 = x1.max(r.grid_value);
        y0 = y0.min(r.mean - r.stderr);
        y1 = y1.max(r.mean + r.stderr);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{M}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{M}" y1="{M}" x2="{M}" y2="{b}" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 20.0, kind.grid_label());
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, W / 2.0, kind.name());
    for (i, v) in [(M, x0), (W - M, x1)] {
        let _ = writeln!(s, r#"<text x="{i}" y="{}" text-anchor="middle">{}</text>"#, H - M + 16.0, fmt(v));
    }
    for (j, v) in [(H - M, y0), (M, y1)] {
        let _ = writeln!(s, r#"<text x="{}" y="{j}" text-anchor="end">{}</text>"#, M - 4.0, fmt(v));
    }
    for (mi, m) in methods.iter().enumerate() {
        let color = COLORS[mi % COLORS.len()];
        let pts: Vec<&&SummaryRow> = finite.iter().filter(|r| r.method == *m).collect();
        let upper: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.grid_value), sy(r.mean + r.stderr))).collect();
        let lower: Vec<String> = pts.iter().rev().map(|r| format!("{:.2},{:.2}", sx(r.grid_value), sy(r.mean - r.stderr))).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.grid_value), sy(r.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{m}</text>"#,
            W - M - 110.0,
            M + 16.0 * (mi as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}
