//! Minimal SVG writers for the three report figures: cost-region maps,
//! Pareto scatter plots, and critical-difference diagrams.

use std::fmt::Write;

use crate::cost::RegionGrid;
use crate::criteria::CriterionId;
use crate::stats::CdDiagram;

/// Distinguishable fill colors, indexed by criterion position.
const PALETTE: [&str; 13] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1b9e77", "#d95f02", "#7570b3",
];

fn color_for(id: CriterionId) -> &'static str {
    let idx = CriterionId::all()
        .iter()
        .position(|c| *c == id)
        .unwrap_or(0);
    PALETTE[idx % PALETTE.len()]
}

/// Renders a region map: one colored cell per (nm, l) grid point, light grey
/// where no criterion is significantly best, with a legend of the criteria
/// that appear.
pub fn render_region_map(grid: &RegionGrid) -> String {
    let cell = 18.0;
    let margin = 60.0;
    let width = margin + grid.nm_values.len() as f64 * cell + 200.0;
    let height = margin + grid.l_values.len() as f64 * cell + 40.0;
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let rows = grid.l_values.len();
    for (li, _) in grid.l_values.iter().enumerate() {
        for (ni, _) in grid.nm_values.iter().enumerate() {
            let fill = grid.cell(li, ni).map_or("#dddddd", color_for);
            // y grows downward; draw the largest l at the top
            let x = margin + ni as f64 * cell;
            let y = margin + (rows - 1 - li) as f64 * cell;
            let _ = write!(
                out,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\"/>"
            );
        }
    }
    let axis_y = margin + rows as f64 * cell + 16.0;
    let _ = write!(
        out,
        "<text x=\"{margin}\" y=\"{axis_y}\">nm: {:.0e} .. {:.0e}</text>",
        grid.nm_values.first().unwrap(),
        grid.nm_values.last().unwrap()
    );
    let _ = write!(
        out,
        "<text x=\"8\" y=\"{margin}\" transform=\"rotate(-90 14 {margin})\">l: {:.0e} .. {:.0e}</text>",
        grid.l_values.first().unwrap(),
        grid.l_values.last().unwrap()
    );
    let mut seen: Vec<CriterionId> = Vec::new();
    for c in grid.cells.iter().flatten() {
        if !seen.contains(c) {
            seen.push(*c);
        }
    }
    let legend_x = margin + grid.nm_values.len() as f64 * cell + 12.0;
    for (i, c) in seen.iter().enumerate() {
        let y = margin + i as f64 * 16.0;
        let _ = write!(
            out,
            "<rect x=\"{legend_x}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{}</text>",
            color_for(*c),
            legend_x + 16.0,
            y + 10.0,
            c
        );
    }
    out.push_str("</svg>");
    out
}

/// Renders (labels, accuracy) points with the Pareto frontier drawn as a
/// dashed step line.
pub fn render_pareto(points: &[(usize, f64)], frontier: &[usize]) -> String {
    let width = 420.0;
    let height = 320.0;
    let margin = 40.0;
    let max_labels = points.iter().map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let px = |labels: usize| margin + (labels as f64 / max_labels) * (width - 2.0 * margin);
    let py = |acc: f64| height - margin - acc * (height - 2.0 * margin);
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = write!(
        out,
        "<line x1=\"{margin}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        height - margin,
        width - margin,
        height - margin
    );
    let _ = write!(
        out,
        "<line x1=\"{margin}\" y1=\"{margin}\" x2=\"{margin}\" y2=\"{}\" stroke=\"black\"/>",
        height - margin
    );
    let mut frontier_points: Vec<(usize, f64)> = frontier.iter().map(|&i| points[i]).collect();
    frontier_points.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.partial_cmp(&a.1).unwrap()));
    if frontier_points.len() > 1 {
        let mut path = String::new();
        for (i, &(l, a)) in frontier_points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.1},{:.1} ", px(l), py(a));
        }
        let _ = write!(
            out,
            "<path d=\"{path}\" fill=\"none\" stroke=\"#888888\" stroke-dasharray=\"5,4\"/>"
        );
    }
    for (i, &(l, a)) in points.iter().enumerate() {
        let on_front = frontier.contains(&i);
        let fill = if on_front { "#e15759" } else { "#4e79a7" };
        let _ = write!(
            out,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"{fill}\"/>",
            px(l),
            py(a)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\">labels</text>",
        width / 2.0 - 18.0,
        height - 8.0
    );
    let _ = write!(
        out,
        "<text x=\"6\" y=\"{}\" transform=\"rotate(-90 12 {})\">accuracy</text>",
        height / 2.0,
        height / 2.0
    );
    out.push_str("</svg>");
    out
}

/// Renders a critical-difference diagram: criteria placed on a rank axis with
/// horizontal bars joining groups that are not significantly different.
pub fn render_cd_diagram(diagram: &CdDiagram, names: &[String]) -> String {
    let k = diagram.order.len();
    let width = 560.0;
    let margin = 60.0;
    let axis_w = width - 2.0 * margin;
    let row_h = 18.0;
    let height = 120.0 + k as f64 * row_h;
    let rank_min = 1.0;
    let rank_max = k as f64;
    let rx = |rank: f64| {
        if rank_max > rank_min {
            margin + (rank - rank_min) / (rank_max - rank_min) * axis_w
        } else {
            margin
        }
    };
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let axis_y = 40.0;
    let _ = write!(
        out,
        "<line x1=\"{margin}\" y1=\"{axis_y}\" x2=\"{}\" y2=\"{axis_y}\" stroke=\"black\"/>",
        margin + axis_w
    );
    for tick in 1..=k {
        let x = rx(tick as f64);
        let _ = write!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{}\">{tick}</text>",
            axis_y - 4.0,
            axis_y + 4.0,
            x - 3.0,
            axis_y - 8.0
        );
    }
    // CD ruler
    let _ = write!(
        out,
        "<line x1=\"{margin}\" y1=\"18\" x2=\"{:.1}\" y2=\"18\" stroke=\"#e15759\" stroke-width=\"2\"/><text x=\"{:.1}\" y=\"14\">CD = {:.3}</text>",
        rx(rank_min + diagram.cd.min(rank_max - rank_min)),
        margin,
        diagram.cd
    );
    // group bars
    for (gi, &(s, e)) in diagram.groups.iter().enumerate() {
        let y = axis_y + 10.0 + gi as f64 * 6.0;
        let _ = write!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#333333\" stroke-width=\"3\"/>",
            rx(diagram.mean_ranks[s]),
            rx(diagram.mean_ranks[e])
        );
    }
    // labeled stems
    let stem_top = axis_y + 10.0 + diagram.groups.len() as f64 * 6.0 + 8.0;
    for (pos, (&col, &rank)) in diagram.order.iter().zip(&diagram.mean_ranks).enumerate() {
        let x = rx(rank);
        let y = stem_top + pos as f64 * row_h;
        let name = names.get(col).cloned().unwrap_or_else(|| format!("#{col}"));
        let _ = write!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{axis_y}\" x2=\"{x:.1}\" y2=\"{y:.1}\" stroke=\"#777777\"/><text x=\"{:.1}\" y=\"{:.1}\">{name} ({rank:.2})</text>",
            x + 4.0,
            y
        );
    }
    out.push_str("</svg>");
    out
}
