//! Named scene invariants.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::geometry::{footprints_overlap, obb_intersects, polygon_intersection_area, Point2};
use crate::layout::PortalKind;
use crate::populate::{generate_scene, GenConfig};
use crate::scene::{write_scene, PlacementSource, SceneSpec};
use crate::template::EnvironmentTemplate;

pub const NO_OVERLAP: &str = "no-overlap";
pub const RECEPTACLE_CONTAINMENT: &str = "receptacle-containment";
pub const PLACEMENT_IDS: &str = "placement-ids";
pub const PLACEMENT_ROOM: &str = "placement-room";
pub const LIGHT_COVERAGE: &str = "light-coverage";
pub const DOOR_OPENNESS: &str = "door-openness";
pub const EXTERIOR_DOORS_CLOSED: &str = "exterior-doors-closed";
pub const DOOR_CLEARANCE: &str = "door-clearance";
pub const ROOM_DISJOINT: &str = "room-disjoint";
pub const PORTAL_IN_WALL: &str = "portal-in-wall";
pub const SEMANTIC_FIDELITY: &str = "semantic-fidelity";
pub const DETERMINISM: &str = "determinism";

/// Every invariant name in checking order.
pub const ALL_INVARIANTS: [&str; 12] = [
    PLACEMENT_IDS,
    NO_OVERLAP,
    RECEPTACLE_CONTAINMENT,
    PLACEMENT_ROOM,
    LIGHT_COVERAGE,
    DOOR_OPENNESS,
    EXTERIOR_DOORS_CLOSED,
    DOOR_CLEARANCE,
    ROOM_DISJOINT,
    PORTAL_IN_WALL,
    SEMANTIC_FIDELITY,
    DETERMINISM,
];

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: String,
    pub detail: String,
}

fn violation(invariant: &str, detail: impl Into<String>) -> Violation {
    Violation {
        invariant: invariant.to_string(),
        detail: detail.into(),
    }
}

/// Optional inputs that enable the source-dependent checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct CheckContext<'a> {
    pub template: Option<&'a EnvironmentTemplate>,
    pub catalog: Option<&'a Catalog>,
    /// Together with template and catalog, enables the determinism check.
    pub gen: Option<&'a GenConfig>,
}

/// Run every applicable invariant. `clearance` is the minimum gap the
/// generator was configured with.
pub fn check_scene(scene: &SceneSpec, clearance: f64, ctx: CheckContext) -> Vec<Violation> {
    let mut out = Vec::new();
    check_ids(scene, &mut out);
    if out.is_empty() {
        check_overlap(scene, clearance, &mut out);
        check_receptacles(scene, &mut out);
    }
    check_rooms_of_placements(scene, &mut out);
    check_lights(scene, &mut out);
    check_doors(scene, &mut out);
    check_door_clearance(scene, &mut out);
    check_room_disjoint(scene, &mut out);
    check_portals(scene, &mut out);
    check_semantic(scene, ctx, &mut out);
    if let (Some(t), Some(c), Some(g)) = (ctx.template, ctx.catalog, ctx.gen) {
        out.extend(check_determinism(scene, t, c, g));
    }
    out
}

fn check_ids(scene: &SceneSpec, out: &mut Vec<Violation>) {
    for (i, p) in scene.placements.iter().enumerate() {
        if p.id as usize != i {
            out.push(violation(PLACEMENT_IDS, format!("placement at index {i} has id {}", p.id)));
        }
        if let Some(parent) = p.parent {
            if parent as usize >= i {
                out.push(violation(
                    PLACEMENT_IDS,
                    format!("placement {i} names parent {parent}, which does not precede it"),
                ));
            }
        }
    }
}

fn check_overlap(scene: &SceneSpec, clearance: f64, out: &mut Vec<Violation>) {
    let ps = &scene.placements;
    let radius = |b: &crate::geometry::OrientedBox| {
        let h = b.half_extents();
        (h[0] * h[0] + h[2] * h[2]).sqrt() + clearance
    };
    let radii: Vec<f64> = ps.iter().map(|p| radius(&p.bbox)).collect();
    for i in 0..ps.len() {
        let (a, ra) = (&ps[i], radii[i]);
        for (w, wall) in scene.wall_solids.iter().enumerate() {
            if a.bbox.center_xz().dist(wall.center_xz()) > ra + radius(wall) {
                continue;
            }
            if obb_intersects(&a.bbox, wall, clearance) {
                out.push(violation(NO_OVERLAP, format!("placement {} ({}) intersects wall solid {w}", a.id, a.asset_id)));
            }
        }
        for j in 0..i {
            let b = &ps[j];
            if a.parent == Some(b.id) || b.parent == Some(a.id) {
                continue;
            }
            if a.bbox.center_xz().dist(b.bbox.center_xz()) > ra + radii[j] {
                continue;
            }
            if obb_intersects(&a.bbox, &b.bbox, clearance) {
                out.push(violation(
                    NO_OVERLAP,
                    format!("placements {} ({}) and {} ({}) intersect", b.id, b.asset_id, a.id, a.asset_id),
                ));
            }
        }
    }
}

fn check_receptacles(scene: &SceneSpec, out: &mut Vec<Violation>) {
    for p in &scene.placements {
        let Some(parent) = p.parent else {
            continue;
        };
        let Some(s) = p.support else {
            out.push(violation(RECEPTACLE_CONTAINMENT, format!("placement {} has a parent but no support surface", p.id)));
            continue;
        };
        let host = &scene.placements[parent as usize];
        if !s.holds(&p.bbox, EPS) {
            out.push(violation(
                RECEPTACLE_CONTAINMENT,
                format!("placement {} footprint leaves its support on placement {parent}", p.id),
            ));
        }
        if (p.bbox.bottom() - s.height).abs() > EPS {
            out.push(violation(
                RECEPTACLE_CONTAINMENT,
                format!("placement {} bottom {} is off its support height {}", p.id, p.bbox.bottom(), s.height),
            ));
        }
        let (sn, cs) = s.yaw.sin_cos();
        let (u, v) = (Point2::new(cs, sn), Point2::new(-sn, cs));
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .map(|(a, b)| s.center.add(u.scale(a * s.half_size[0])).add(v.scale(b * s.half_size[1])));
        let inside = corners.iter().all(|c| host.bbox.footprint_distance(*c) <= EPS);
        if !inside || s.height < host.bbox.bottom() - EPS || s.height > host.bbox.top() + EPS {
            out.push(violation(
                RECEPTACLE_CONTAINMENT,
                format!("support of placement {} is not within placement {parent}", p.id),
            ));
        }
    }
}

fn check_rooms_of_placements(scene: &SceneSpec, out: &mut Vec<Violation>) {
    for p in &scene.placements {
        match scene.rooms.iter().find(|r| r.id == p.room) {
            None => out.push(violation(PLACEMENT_ROOM, format!("placement {} names unknown room {}", p.id, p.room))),
            Some(r) if !r.polygon.contains(p.bbox.center_xz()) => out.push(violation(
                PLACEMENT_ROOM,
                format!("placement {} center lies outside {}", p.id, p.room),
            )),
            Some(_) => {}
        }
    }
}

fn check_lights(scene: &SceneSpec, out: &mut Vec<Violation>) {
    if scene.lights.len() < scene.rooms.len() {
        out.push(violation(
            LIGHT_COVERAGE,
            format!("{} lights for {} rooms", scene.lights.len(), scene.rooms.len()),
        ));
    }
    for r in &scene.rooms {
        if !scene.lights.iter().any(|l| l.room == r.id) {
            out.push(violation(LIGHT_COVERAGE, format!("{} has no light", r.id)));
        }
    }
    for (i, l) in scene.lights.iter().enumerate() {
        let Some(r) = scene.rooms.iter().find(|r| r.id == l.room) else {
            out.push(violation(LIGHT_COVERAGE, format!("light {i} names unknown room {}", l.room)));
            continue;
        };
        let p = Point2::new(l.position[0], l.position[2]);
        if !r.polygon.contains(p) || l.position[1] >= r.ceiling_y {
            out.push(violation(LIGHT_COVERAGE, format!("light {i} is not inside {}", r.id)));
        }
        if !(l.intensity > 0.0) || l.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            out.push(violation(LIGHT_COVERAGE, format!("light {i} has out-of-range intensity or color")));
        }
    }
}

fn check_doors(scene: &SceneSpec, out: &mut Vec<Violation>) {
    for (i, p) in scene.portals.iter().enumerate() {
        match (p.kind, &p.door_state) {
            (PortalKind::Window, Some(_)) => {
                out.push(violation(DOOR_OPENNESS, format!("window portal {i} carries a door state")));
            }
            (PortalKind::Door, None) => {
                out.push(violation(DOOR_OPENNESS, format!("door portal {i} has no door state")));
            }
            (PortalKind::Door, Some(d)) if p.exterior => {
                if d.openness != 0.0 || !d.has_leaf {
                    out.push(violation(
                        EXTERIOR_DOORS_CLOSED,
                        format!("exterior door {i} has openness {} (leaf: {})", d.openness, d.has_leaf),
                    ));
                }
            }
            (PortalKind::Door, Some(d)) => {
                let ok = if d.has_leaf {
                    (0.8..=1.0).contains(&d.openness)
                } else {
                    d.openness == 1.0
                };
                if !ok {
                    out.push(violation(
                        DOOR_OPENNESS,
                        format!("interior door {i} has openness {} (leaf: {})", d.openness, d.has_leaf),
                    ));
                }
                if let Some(room) = &d.swing_room {
                    if !p.adjacent_rooms.contains(room) {
                        out.push(violation(DOOR_OPENNESS, format!("door {i} swings into non-adjacent {room}")));
                    }
                }
            }
            (PortalKind::Window, None) => {}
        }
        if p.kind == PortalKind::Door && p.exterior != (p.adjacent_rooms.len() == 1) {
            out.push(violation(
                EXTERIOR_DOORS_CLOSED,
                format!("door {i} exterior flag disagrees with its {} adjacent rooms", p.adjacent_rooms.len()),
            ));
        }
    }
}

fn check_door_clearance(scene: &SceneSpec, out: &mut Vec<Violation>) {
    for (i, p) in scene.portals.iter().enumerate() {
        if p.kind != PortalKind::Door {
            continue;
        }
        let Some(wall) = scene.walls.get(p.wall_index) else {
            continue;
        };
        let zone = crate::layout::door_clearance(wall, &p.opening);
        for c in scene.placements.iter().filter(|c| c.source == PlacementSource::Clutter) {
            if footprints_overlap(&c.bbox, &zone) {
                out.push(violation(
                    DOOR_CLEARANCE,
                    format!("clutter placement {} blocks door {i}", c.id),
                ));
            }
        }
    }
}

fn check_room_disjoint(scene: &SceneSpec, out: &mut Vec<Violation>) {
    let mut ids = BTreeSet::new();
    for r in &scene.rooms {
        if !ids.insert(&r.id) {
            out.push(violation(ROOM_DISJOINT, format!("duplicate room id {}", r.id)));
        }
        if !(r.ceiling_y > r.floor_y) {
            out.push(violation(ROOM_DISJOINT, format!("{} has ceiling at or below its floor", r.id)));
        }
    }
    for i in 0..scene.rooms.len() {
        for j in 0..i {
            let a = polygon_intersection_area(&scene.rooms[i].polygon, &scene.rooms[j].polygon);
            if a >= 1e-6 {
                out.push(violation(
                    ROOM_DISJOINT,
                    format!("{} and {} overlap by {a:.6} m²", scene.rooms[j].id, scene.rooms[i].id),
                ));
            }
        }
    }
}

fn check_portals(scene: &SceneSpec, out: &mut Vec<Violation>) {
    for (i, p) in scene.portals.iter().enumerate() {
        let Some(w) = scene.walls.get(p.wall_index) else {
            out.push(violation(PORTAL_IN_WALL, format!("portal {i} names missing wall {}", p.wall_index)));
            continue;
        };
        let o = &p.opening;
        let ok = o.offset >= 0.0
            && o.width > 0.0
            && o.offset + o.width <= w.length() + EPS
            && o.bottom >= 0.0
            && o.bottom < o.top
            && o.top <= w.height + EPS;
        if !ok {
            out.push(violation(PORTAL_IN_WALL, format!("portal {i} exceeds wall {}", p.wall_index)));
        }
    }
}

fn check_semantic(scene: &SceneSpec, ctx: CheckContext, out: &mut Vec<Violation>) {
    let mut seen = BTreeSet::new();
    for p in &scene.placements {
        let semantic = p.source == PlacementSource::Semantic;
        match (semantic, p.scanned_index) {
            (true, None) => out.push(violation(SEMANTIC_FIDELITY, format!("semantic placement {} has no scanned source", p.id))),
            (false, Some(_)) => out.push(violation(
                SEMANTIC_FIDELITY,
                format!("non-semantic placement {} claims a scanned source", p.id),
            )),
            _ => {}
        }
        let Some(si) = p.scanned_index.filter(|_| semantic) else {
            continue;
        };
        if !seen.insert(si) {
            out.push(violation(SEMANTIC_FIDELITY, format!("scanned object {si} replaced twice")));
        }
        if let Some(t) = ctx.template {
            let Some(scan) = t.objects.get(si) else {
                out.push(violation(SEMANTIC_FIDELITY, format!("placement {} names missing scanned object {si}", p.id)));
                continue;
            };
            if scan.bbox.center_xz().dist(p.bbox.center_xz()) > EPS {
                out.push(violation(
                    SEMANTIC_FIDELITY,
                    format!("placement {} moved away from scanned object {si}", p.id),
                ));
            }
            if let Some(c) = ctx.catalog {
                if !c.is_mapped(scan.category, &p.asset_type) {
                    out.push(violation(
                        SEMANTIC_FIDELITY,
                        format!("placement {} type {} is not mapped from {}", p.id, p.asset_type, scan.category),
                    ));
                }
            }
        }
    }
    if let Some(t) = ctx.template {
        if t.digest() != scene.template_digest {
            out.push(violation(SEMANTIC_FIDELITY, "scene was generated from a different template"));
        }
    }
}

/// Regenerate the scene from its seed and compare serialized bytes.
pub fn check_determinism(
    scene: &SceneSpec,
    template: &EnvironmentTemplate,
    catalog: &Catalog,
    gen: &GenConfig,
) -> Option<Violation> {
    match generate_scene(template, catalog, gen, scene.seed) {
        Ok(again) if write_scene(&again) == write_scene(scene) => None,
        Ok(_) => Some(violation(DETERMINISM, format!("regenerating seed {} gives different bytes", scene.seed))),
        Err(e) => Some(violation(DETERMINISM, format!("regenerating seed {} failed: {e}", scene.seed))),
    }
}
