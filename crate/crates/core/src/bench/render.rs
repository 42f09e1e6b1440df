//! SVG (three orthographic views) and ASCII (plan slices) renderings.

use crate::geom::Cell;
use crate::scene::Scene;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderFormat {
    Svg,
    Ascii,
}

impl FromStr for RenderFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "svg" => Ok(RenderFormat::Svg),
            "ascii" => Ok(RenderFormat::Ascii),
            other => Err(format!("unknown render format `{other}`")),
        }
    }
}

pub fn render_layout(scene: &Scene, cells: &[Cell], format: RenderFormat) -> String {
    match format {
        RenderFormat::Svg => render_svg(scene, cells),
        RenderFormat::Ascii => render_ascii(scene, cells),
    }
}

const PX: i32 = 6;
const GAP: i32 = 20;

/// Views as (title, horizontal axis, vertical axis).
const VIEWS: [(&str, usize, usize); 3] = [("plan x-y", 0, 1), ("elevation x-z", 0, 2), ("elevation y-z", 1, 2)];

pub fn render_svg(scene: &Scene, cells: &[Cell]) -> String {
    let dims = scene.dims();
    let widths: Vec<i32> = VIEWS.iter().map(|v| dims[v.1] * PX).collect();
    let height = VIEWS.iter().map(|v| dims[v.2] * PX).max().unwrap_or(0);
    let total_w = widths.iter().sum::<i32>() + GAP * (VIEWS.len() as i32 + 1);
    let total_h = height + 2 * GAP;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}">"#
    );
    let mut left = GAP;
    for (vi, &(title, h, v)) in VIEWS.iter().enumerate() {
        let (w_cells, h_cells) = (dims[h], dims[v]);
        let top = GAP + height - h_cells * PX;
        // Screen coordinates of a cell-space point, vertical axis pointing up.
        let sx = |a: f64| left as f64 + a * PX as f64;
        let sy = |b: f64| (top + h_cells * PX) as f64 - b * PX as f64;
        let _ = writeln!(out, r#"<g id="view-{vi}"><title>{title}</title>"#);
        let _ = writeln!(
            out,
            r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="#ffffff" stroke="#000000"/>"##,
            w_cells * PX,
            h_cells * PX
        );
        for o in scene.obstacles() {
            let (a0, a1) = (o.min.axis(h) as f64, o.max.axis(h) as f64);
            let (b0, b1) = (o.min.axis(v) as f64, o.max.axis(v) as f64);
            let _ = writeln!(
                out,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#999999" fill-opacity="0.5"/>"##,
                sx(a0),
                sy(b1),
                (a1 - a0) * PX as f64,
                (b1 - b0) * PX as f64
            );
        }
        let points: Vec<String> = cells
            .iter()
            .map(|c| format!("{:.1},{:.1}", sx(c.axis(h) as f64 + 0.5), sy(c.axis(v) as f64 + 0.5)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
            points.join(" ")
        );
        for (c, color) in [(scene.start(), "#2ca02c"), (scene.end(), "#1f77b4")] {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="{}" fill="{color}"/>"#,
                sx(c.axis(h) as f64 + 0.5),
                sy(c.axis(v) as f64 + 0.5),
                PX / 2 + 1
            );
        }
        out.push_str("</g>\n");
        left += w_cells * PX + GAP;
    }
    out.push_str("</svg>\n");
    out
}

/// One plan-view grid per z level, bottom level first, +y up the page.
/// `#` obstacle, `.` free, `o` pipe, `S`/`E` endpoints.
pub fn render_ascii(scene: &Scene, cells: &[Cell]) -> String {
    let [lx, ly, lz] = scene.dims();
    let on_path: std::collections::HashSet<Cell> = cells.iter().copied().collect();
    let mut out = String::new();
    for z in 0..lz {
        let _ = writeln!(out, "z={z}");
        for y in (0..ly).rev() {
            for x in 0..lx {
                let c = Cell::new(x, y, z);
                out.push(if c == scene.start() {
                    'S'
                } else if c == scene.end() {
                    'E'
                } else if on_path.contains(&c) {
                    'o'
                } else if scene.is_blocked(c) {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
    }
    out
}
