use std::fmt::Write as _;
use std::path::Path;

use super::{AnalysisError, CrossTab};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart: one group per true value, one bar per signal value.
/// Bar heights are linear in the counts; an all-zero table draws empty axes.
pub fn bar_svg(tab: &CrossTab) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let max = tab.counts.iter().flatten().copied().max().unwrap_or(0);
    let groups = tab.row_labels.len().max(1) as f64;
    let bars = tab.col_labels.len().max(1) as f64;
    let group_w = plot_w / groups;
    let bar_w = group_w * 0.8 / bars;
    let base = TOP + plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&tab.title())
    );
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, LEFT + plot_w);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{TOP}" font-family="sans-serif" font-size="10" text-anchor="end">{max}</text>"#,
        LEFT - 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{base}" font-family="sans-serif" font-size="10" text-anchor="end">0</text>"#,
        LEFT - 4.0
    );

    for (g, (label, row)) in tab.row_labels.iter().zip(&tab.counts).enumerate() {
        let x0 = LEFT + g as f64 * group_w + group_w * 0.1;
        for (b, &count) in row.iter().enumerate() {
            let h = if max == 0 { 0.0 } else { plot_h * count as f64 / max as f64 };
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-row="{g}" data-col="{b}" data-count="{count}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                x0 + b as f64 * bar_w,
                base - h,
                bar_w,
                h,
                PALETTE[b % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            LEFT + (g as f64 + 0.5) * group_w,
            base + 16.0,
            escape(label)
        );
    }

    for (b, label) in tab.col_labels.iter().enumerate() {
        let y = TOP + 8.0 + b as f64 * 16.0;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            PALETTE[b % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11">{}</text>"#,
            x + 14.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes [`bar_svg`] to `path`.
pub fn render_bar_svg(tab: &CrossTab, path: &Path) -> Result<(), AnalysisError> {
    std::fs::write(path, bar_svg(tab))
        .map_err(|source| AnalysisError::Io { path: path.display().to_string(), source })
}
