//! Plot artifacts as self-contained SVG documents.
//!
//! Rendering is deterministic string assembly — no plotting dependency —
//! so artifact files are byte-stable for identical inputs. Colors come
//! from a fixed palette indexed by cluster label.

use crate::pipeline::PhaseDiagram;
use crate::selection::{silhouette_plot_data, SilhouetteReport};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("heatmap requires a 2D grid")]
    NotTwoD,

    #[error("diagram has no points")]
    Empty,
}

/// Fixed label-to-color palette (labels beyond its length wrap around).
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc949", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Phase-diagram heatmap: one colored cell per grid point, axes labeled
/// with the parameter names, legend of cluster ids.
pub fn render_heatmap(diagram: &PhaseDiagram) -> Result<String, RenderError> {
    render_heatmap_with_overlay(diagram, &[])
}

/// Heatmap with reference boundary polylines (parameter-space coordinates)
/// drawn on top.
pub fn render_heatmap_with_overlay(
    diagram: &PhaseDiagram,
    overlay: &[Vec<(f64, f64)>],
) -> Result<String, RenderError> {
    if diagram.grid.arity() != 2 {
        return Err(RenderError::NotTwoD);
    }
    if diagram.points.is_empty() {
        return Err(RenderError::Empty);
    }
    let ax = &diagram.grid.axis_ranges[0];
    let ay = &diagram.grid.axis_ranges[1];
    let (n0, n1) = (ax.count, ay.count);

    const LEFT: f64 = 70.0;
    const TOP: f64 = 40.0;
    const PLOT_W: f64 = 520.0;
    const PLOT_H: f64 = 460.0;
    const WIDTH: f64 = 780.0;
    const HEIGHT: f64 = 560.0;
    let cell_w = PLOT_W / n0 as f64;
    let cell_h = PLOT_H / n1 as f64;

    // Parameter value -> pixel at the matching cell center.
    let x_px = |v: f64| -> f64 {
        let t = if ax.max > ax.min {
            (v - ax.min) / (ax.max - ax.min)
        } else {
            0.5
        };
        LEFT + cell_w / 2.0 + t * (PLOT_W - cell_w)
    };
    let y_px = |v: f64| -> f64 {
        let t = if ay.max > ay.min {
            (v - ay.min) / (ay.max - ay.min)
        } else {
            0.5
        };
        TOP + PLOT_H - cell_h / 2.0 - t * (PLOT_H - cell_h)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(svg, "<!-- config {} -->", diagram.provenance);
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">Phase diagram (c = {})</text>",
        LEFT + PLOT_W / 2.0,
        diagram.chosen_c
    );

    // Cells: grid points are row-major with the last axis fastest.
    for p in &diagram.points {
        let i0 = p.index / n1;
        let i1 = p.index % n1;
        let x = LEFT + i0 as f64 * cell_w;
        let y = TOP + (n1 - 1 - i1) as f64 * cell_h;
        let color = PALETTE[p.label % PALETTE.len()];
        let _ = writeln!(
            svg,
            "<rect class=\"cell\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" fill=\"{color}\"/>"
        );
    }

    // Frame and axis ticks (min / mid / max per axis).
    let _ = writeln!(
        svg,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" fill=\"none\" stroke=\"#333333\"/>"
    );
    for (frac, v) in [
        (0.0, ax.min),
        (0.5, 0.5 * (ax.min + ax.max)),
        (1.0, ax.max),
    ] {
        let x = LEFT + cell_w / 2.0 + frac * (PLOT_W - cell_w);
        let y0 = TOP + PLOT_H;
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{y0}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>",
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.3}</text>",
            y0 + 20.0
        );
    }
    for (frac, v) in [
        (0.0, ay.min),
        (0.5, 0.5 * (ay.min + ay.max)),
        (1.0, ay.max),
    ] {
        let y = TOP + PLOT_H - cell_h / 2.0 - frac * (PLOT_H - cell_h);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"#333333\"/>",
            LEFT - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.3}</text>",
            LEFT - 9.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        LEFT + PLOT_W / 2.0,
        TOP + PLOT_H + 45.0,
        xml_escape(&ax.name)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0,
        xml_escape(&ay.name)
    );

    // Legend.
    let legend_x = LEFT + PLOT_W + 30.0;
    for k in 0..diagram.chosen_c {
        let y = TOP + 10.0 + k as f64 * 26.0;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            svg,
            "<rect class=\"legend-swatch\" x=\"{legend_x}\" y=\"{y:.2}\" width=\"18\" height=\"18\" fill=\"{color}\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\">cluster {k}</text>",
            legend_x + 26.0,
            y + 14.0
        );
    }

    // Reference boundary overlay.
    for line in overlay {
        if line.len() < 2 {
            continue;
        }
        let pts: Vec<String> = line
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", x_px(x), y_px(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline class=\"overlay\" points=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Silhouette plot: horizontal bars grouped into cluster bands (ascending
/// label top to bottom, scores ascending bottom-up within each band),
/// negative bars extending left of the zero axis, and a dashed vertical
/// line at the average score.
pub fn render_silhouette_svg(report: &SilhouetteReport) -> String {
    let plot = silhouette_plot_data(report);
    const LEFT: f64 = 60.0;
    const TOP: f64 = 30.0;
    const PLOT_W: f64 = 520.0;
    const PLOT_H: f64 = 400.0;
    const WIDTH: f64 = 640.0;
    const HEIGHT: f64 = 480.0;

    let min_bar = plot
        .bands
        .iter()
        .flat_map(|b| &b.bars)
        .copied()
        .fold(0.0f64, f64::min);
    let x_min = (min_bar - 0.05).min(-0.05);
    let x_max = 1.0f64;
    let px = |s: f64| LEFT + (s - x_min) / (x_max - x_min) * PLOT_W;

    let total_bars: usize = plot.bands.iter().map(|b| b.bars.len()).sum();
    let gap = 6.0;
    let gaps = (plot.bands.len().saturating_sub(1)) as f64 * gap;
    let bar_h = ((PLOT_H - gaps) / total_bars.max(1) as f64).min(24.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">Silhouette widths (c = {})</text>",
        LEFT + PLOT_W / 2.0,
        report.c
    );

    let mut y = TOP;
    for band in &plot.bands {
        let color = PALETTE[band.cluster % PALETTE.len()];
        let band_top = y;
        // Ascending scores piled bottom-up: draw in descending order from
        // the top of the band.
        for (row, &s) in band.bars.iter().rev().enumerate() {
            let by = band_top + row as f64 * bar_h;
            let (bx, bw) = if s >= 0.0 {
                (px(0.0), px(s) - px(0.0))
            } else {
                (px(s), px(0.0) - px(s))
            };
            let _ = writeln!(
                svg,
                "<rect class=\"bar\" x=\"{bx:.2}\" y=\"{by:.2}\" width=\"{bw:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
                (bar_h - 1.0).max(1.0)
            );
        }
        let band_h = band.bars.len() as f64 * bar_h;
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 8.0,
            band_top + band_h / 2.0 + 4.0,
            band.cluster
        );
        y += band_h + gap;
    }

    // Zero axis, scale ticks, average line.
    let axis_bottom = TOP + PLOT_H;
    let _ = writeln!(
        svg,
        "<line x1=\"{0:.2}\" y1=\"{TOP}\" x2=\"{0:.2}\" y2=\"{axis_bottom}\" stroke=\"#333333\"/>",
        px(0.0)
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t}</text>",
            px(t),
            axis_bottom + 18.0
        );
    }
    let _ = writeln!(
        svg,
        "<line class=\"avg-line\" x1=\"{0:.2}\" y1=\"{TOP}\" x2=\"{0:.2}\" y2=\"{axis_bottom}\" stroke=\"#d62728\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>",
        px(plot.average)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#d62728\">avg {:.4}</text>",
        px(plot.average) + 6.0,
        TOP + 14.0,
        plot.average
    );

    svg.push_str("</svg>\n");
    svg
}
