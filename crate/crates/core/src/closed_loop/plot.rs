use std::fmt::Write as _;

use crate::closed_loop::run::RunResult;

const WIDTH: f64 = 720.0;
const PANEL: f64 = 220.0;
const MARGIN: f64 = 50.0;

/// Two stacked panels, speed and opacity against time, each with its
/// reference drawn dashed. Plain SVG, no external assets.
pub fn run_svg(run: &RunResult, title: &str) -> String {
    let t_end = (run.len().max(2) - 1) as f64 * run.ts;
    let mut s = String::new();
    let height = 2.0 * PANEL + 3.0 * MARGIN;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    panel(&mut s, MARGIN, "speed [rpm]", &run.speed_ref, &run.speed, run.ts, t_end);
    panel(&mut s, 2.0 * MARGIN + PANEL, "opacity [%]", &run.opacity_ref, &run.opacity, run.ts, t_end);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">time [s]</text>"#,
        WIDTH / 2.0,
        height - 10.0
    );
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, top: f64, label: &str, reference: &[f64], actual: &[f64], ts: f64, t_end: f64) {
    let (lo, hi) = reference
        .iter()
        .chain(actual)
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let w = WIDTH - 2.0 * MARGIN;
    let x = |k: usize| MARGIN + w * (k as f64 * ts) / t_end.max(ts);
    let y = |v: f64| top + PANEL * (hi - v) / (hi - lo);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{top}" width="{w}" height="{PANEL}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, MARGIN + 4.0, top + 14.0, escape(label));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.0}</text>"#, MARGIN - 4.0, top + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{lo:.0}</text>"#, MARGIN - 4.0, top + PANEL);
    let line = |s: &mut String, v: &[f64], style: &str| {
        let pts: Vec<String> = v
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, v)| format!("{:.1},{:.1}", x(k), y(*v)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" {style} points="{}"/>"#, pts.join(" "));
    };
    line(s, reference, r#"stroke="gray" stroke-dasharray="6 4""#);
    line(s, actual, r#"stroke="steelblue" stroke-width="1.5""#);
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
