//! Plot data and a small standalone SVG line chart.

use std::fmt::Write as _;

use super::SweepRow;

/// Whitespace-separated `k theta_hat ci_lo ci_hi` columns.
pub fn plot_data(rows: &[SweepRow]) -> String {
    let mut out = String::from("# k theta_hat ci_lo ci_hi\n");
    for r in rows {
        writeln!(out, "{} {:?} {:?} {:?}", r.k, r.theta_hat, r.ci_lo, r.ci_hi).expect("string write");
    }
    out
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;

/// Survival estimate against k with its confidence band.
pub fn render_svg(rows: &[SweepRow]) -> String {
    let (kmin, kmax) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.k as f64), b.max(r.k as f64)));
    let span = if kmax > kmin { kmax - kmin } else { 1.0 };
    let px = |k: u64| PAD + (k as f64 - kmin.min(kmax)) / span * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - v.clamp(0.0, 1.0) * (H - 2.0 * PAD);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    let (x0, x1, y0, y1) = (PAD, W - PAD, H - PAD, PAD);
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    for v in [0.0, 0.5, 1.0] {
        let y = py(v);
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, x0 - 6.0, y + 4.0).unwrap();
    }
    for r in rows {
        writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(r.k), y0 + 16.0, r.k).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">k</text>"#, W / 2.0, H - 8.0).unwrap();
    if !rows.is_empty() {
        let upper: Vec<String> = rows.iter().map(|r| format!("{:.1},{:.1}", px(r.k), py(r.ci_hi))).collect();
        let lower: Vec<String> = rows.iter().rev().map(|r| format!("{:.1},{:.1}", px(r.k), py(r.ci_lo))).collect();
        writeln!(
            s,
            r#"<polygon points="{} {}" fill="steelblue" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        )
        .unwrap();
        let line: Vec<String> = rows.iter().map(|r| format!("{:.1},{:.1}", px(r.k), py(r.theta_hat))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line.join(" ")).unwrap();
        for r in rows {
            writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#, px(r.k), py(r.theta_hat)).unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}
