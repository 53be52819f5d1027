//! Standalone SVG: class heatmap under a scatter of points.

use std::fmt::Write;

use super::grid::DecisionGrid;
use crate::Point;

/// Class colours, cycled for class indices past the end.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const SIZE: f64 = 800.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub point: Point,
    pub class: usize,
    /// Drawn as a large outlined circle on top of the scatter.
    pub highlighted: bool,
}

fn color(class: usize) -> &'static str {
    PALETTE[class % PALETTE.len()]
}

/// Renders the grid as translucent cells (800x800 viewBox) with `points` on top.
pub fn render_svg(grid: &DecisionGrid, points: &[PlotPoint], title: &str) -> String {
    let b = grid.bounds;
    let sx = |x: f64| (x - b.xmin) / (b.xmax - b.xmin) * SIZE;
    let sy = |y: f64| SIZE - (y - b.ymin) / (b.ymax - b.ymin) * SIZE;
    let cell = SIZE / grid.resolution as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 800" width="800" height="800">"#
    );
    let _ = writeln!(s, r#"<rect width="800" height="800" fill="white"/>"#);
    let _ = writeln!(s, r#"<g fill-opacity="0.25" shape-rendering="crispEdges">"#);
    // One rect per run of equal cells within a row.
    for j in 0..grid.resolution {
        let mut start = 0;
        while start < grid.resolution {
            let class = grid.cell(start, j);
            let mut end = start + 1;
            while end < grid.resolution && grid.cell(end, j) == class {
                end += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                start as f64 * cell,
                SIZE - (j + 1) as f64 * cell,
                (end - start) as f64 * cell + 0.01,
                cell + 0.01,
                color(class)
            );
            start = end;
        }
    }
    s.push_str("</g>\n<g>\n");
    for p in points.iter().filter(|p| !p.highlighted) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.8"/>"#,
            sx(p.point[0]),
            sy(p.point[1]),
            color(p.class)
        );
    }
    for p in points.iter().filter(|p| p.highlighted) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="7" fill="{}" stroke="black" stroke-width="2"/>"#,
            sx(p.point[0]),
            sy(p.point[1]),
            color(p.class)
        );
    }
    s.push_str("</g>\n");
    if !title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="12" y="28" font-family="sans-serif" font-size="20">{}</text>"#,
            escape(title)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
