//! Top-down SVG plan of a scene.

use std::fmt::Write;

use crate::geometry::Point2;
use crate::layout::PortalKind;
use crate::scene::{PlacementSource, SceneSpec};

use super::grid::OccupancyGrid;

const SCALE: f64 = 100.0;
const MARGIN: f64 = 20.0;
const ROOM_FILLS: [&str; 6] = ["#f4efe6", "#e8f0f4", "#eef4e6", "#f4e8ee", "#f1f1f1", "#f4f1dc"];

struct Frame {
    min_x: f64,
    max_z: f64,
}

impl Frame {
    fn map(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.min_x) * SCALE + MARGIN, (self.max_z - p.z) * SCALE + MARGIN)
    }

    fn points(&self, ps: &[Point2]) -> String {
        let mut s = String::new();
        for (i, p) in ps.iter().enumerate() {
            let (x, y) = self.map(*p);
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x:.2},{y:.2}");
        }
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Render rooms, walls, doors and windows, placement footprints with type
/// labels, and lights. Blocked grid cells are drawn as one translucent path
/// when a grid is given. Output bytes depend only on the inputs.
pub fn render_preview(scene: &SceneSpec, grid: Option<&OccupancyGrid>) -> String {
    let mut pts: Vec<Point2> = scene.rooms.iter().flat_map(|r| r.polygon.vertices().iter().copied()).collect();
    pts.extend(scene.walls.iter().flat_map(|w| [w.start, w.end]));
    let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_z = pts.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let max_z = pts.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    let (min_x, max_x, min_z, max_z) = if pts.is_empty() {
        (0.0, 1.0, 0.0, 1.0)
    } else {
        (min_x, max_x, min_z, max_z)
    };
    let f = Frame { min_x, max_z };
    let width = (max_x - min_x) * SCALE + 2.0 * MARGIN;
    let height = (max_z - min_z) * SCALE + 2.0 * MARGIN;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    let _ = writeln!(
        s,
        "<style>.wall{{stroke:#333;stroke-linecap:square}}.door{{stroke:#b5651d;stroke-width:6}}.window{{stroke:#3a8fd6;stroke-width:6}}\
.placement{{fill:#9aa9b8;fill-opacity:0.7;stroke:#44525f;stroke-width:1}}.small{{fill:#d9a441}}.clutter{{fill:#c25b5b}}\
.label{{font:10px sans-serif;fill:#222;text-anchor:middle}}.light{{fill:#ffd23f;stroke:#a07c00}}.blocked{{fill:#000;fill-opacity:0.12}}</style>"
    );

    s.push_str("<g id=\"rooms\">\n");
    for (i, r) in scene.rooms.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<polygon class="room" data-room="{}" fill="{}" points="{}"/>"#,
            escape(&r.id),
            ROOM_FILLS[i % ROOM_FILLS.len()],
            f.points(r.polygon.vertices())
        );
    }
    s.push_str("</g>\n");

    if let Some(g) = grid {
        let mut d = String::new();
        for j in 0..g.nz {
            let mut i = 0;
            while i < g.nx {
                if !g.blocked[g.index(i, j)] {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < g.nx && g.blocked[g.index(i, j)] {
                    i += 1;
                }
                let x0 = g.origin.x + start as f64 * g.cell;
                let z1 = g.origin.z + (j + 1) as f64 * g.cell;
                let (x, y) = f.map(Point2::new(x0, z1));
                let w = (i - start) as f64 * g.cell * SCALE;
                let h = g.cell * SCALE;
                let _ = write!(d, "M{x:.2} {y:.2}h{w:.2}v{h:.2}h{:.2}z", -w);
            }
        }
        let _ = writeln!(s, r#"<path class="blocked" d="{d}"/>"#);
    }

    s.push_str("<g id=\"walls\">\n");
    for w in &scene.walls {
        let (x1, y1) = f.map(w.start);
        let (x2, y2) = f.map(w.end);
        let _ = writeln!(
            s,
            r#"<line class="wall" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke-width="{:.2}"/>"#,
            w.thickness * SCALE
        );
    }
    for p in &scene.portals {
        let Some(w) = scene.walls.get(p.wall_index) else {
            continue;
        };
        let (x1, y1) = f.map(w.point_at(p.opening.offset));
        let (x2, y2) = f.map(w.point_at(p.opening.offset + p.opening.width));
        let class = match p.kind {
            PortalKind::Door => "door",
            PortalKind::Window => "window",
        };
        let _ = writeln!(s, r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#);
    }
    s.push_str("</g>\n");

    s.push_str("<g id=\"placements\">\n");
    for p in &scene.placements {
        let extra = match p.source {
            PlacementSource::Semantic => "",
            PlacementSource::Small => " small",
            PlacementSource::Clutter => " clutter",
        };
        let _ = writeln!(
            s,
            r#"<polygon class="placement{extra}" data-id="{}" data-type="{}" points="{}"/>"#,
            p.id,
            escape(&p.asset_type),
            f.points(&p.bbox.footprint())
        );
        if p.source == PlacementSource::Semantic {
            let (x, y) = f.map(p.bbox.center_xz());
            let _ = writeln!(s, r#"<text class="label" x="{x:.2}" y="{y:.2}">{}</text>"#, escape(&p.asset_type));
        }
    }
    s.push_str("</g>\n");

    s.push_str("<g id=\"lights\">\n");
    for l in &scene.lights {
        let (x, y) = f.map(Point2::new(l.position[0], l.position[2]));
        let _ = writeln!(s, r#"<circle class="light" cx="{x:.2}" cy="{y:.2}" r="5"/>"#);
    }
    s.push_str("</g>\n</svg>\n");
    s
}
