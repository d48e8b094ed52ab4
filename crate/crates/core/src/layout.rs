//! Structural half of a scene: rooms from wall centerlines, wall solids with
//! openings cut out, and classified door/window portals.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    extract_faces, point_segment_distance, GeometryError, OrientedBox, Point2, Polygon2D, Segment2,
};
use crate::rng::SceneRng;
use crate::template::{EnvironmentTemplate, OpeningSpec, WallSpec};

const PIECE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("walls enclose no room; the scan is unusable")]
    NoEnclosure,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    /// Endpoint merge distance for face extraction.
    pub snap_tol: f64,
    /// Openings whose bottom is at or below this height become doors.
    pub floor_eps: f64,
    /// Chance that an interior door gets an openable leaf rather than a bare frame.
    pub leaf_probability: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            snap_tol: 0.05,
            floor_eps: 0.05,
            leaf_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub id: String,
    pub polygon: Polygon2D,
    pub floor_y: f64,
    pub ceiling_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortalKind {
    Door,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorState {
    /// 0 is closed, 1 fully open.
    pub openness: f64,
    pub swing_room: Option<String>,
    pub has_leaf: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Portal {
    pub kind: PortalKind,
    pub wall_index: usize,
    pub opening: OpeningSpec,
    pub door_state: Option<DoorState>,
    pub exterior: bool,
    /// Rooms on either side of the opening, in room order.
    pub adjacent_rooms: Vec<String>,
    /// Door or window asset chosen for this opening, if the catalog has any.
    pub asset_id: Option<String>,
}

/// Wall centerline as recorded in a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSegment {
    pub start: Point2,
    pub end: Point2,
    pub height: f64,
    pub thickness: f64,
}

impl WallSegment {
    pub fn length(&self) -> f64 {
        self.start.dist(self.end)
    }

    pub fn direction(&self) -> Point2 {
        self.end.sub(self.start).scale(1.0 / self.length())
    }

    pub fn yaw(&self) -> f64 {
        let d = self.end.sub(self.start);
        d.z.atan2(d.x)
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        self.start.add(self.direction().scale(s))
    }

    /// Solid box covering the wall between `s0..s1` along its length and
    /// `y0..y1` vertically.
    pub fn piece(&self, s0: f64, s1: f64, y0: f64, y1: f64) -> Result<OrientedBox, GeometryError> {
        let mid = self.point_at(0.5 * (s0 + s1));
        OrientedBox::new(
            [mid.x, 0.5 * (y0 + y1), mid.z],
            [0.5 * (s1 - s0), 0.5 * (y1 - y0), 0.5 * self.thickness],
            self.yaw(),
        )
    }
}

impl From<&WallSpec> for WallSegment {
    fn from(w: &WallSpec) -> Self {
        WallSegment {
            start: w.start,
            end: w.end,
            height: w.height,
            thickness: w.thickness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub rooms: Vec<Room>,
    pub portals: Vec<Portal>,
    pub walls: Vec<WallSegment>,
    pub wall_solids: Vec<OrientedBox>,
}

impl Layout {
    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    /// First room whose polygon contains `p`.
    pub fn room_at(&self, p: Point2) -> Option<&Room> {
        self.rooms.iter().find(|r| r.polygon.contains(p))
    }
}

pub fn classify_opening(o: &OpeningSpec, floor_eps: f64) -> PortalKind {
    if o.bottom <= floor_eps {
        PortalKind::Door
    } else {
        PortalKind::Window
    }
}

/// Solid pieces of a wall once its openings are cut out: full-height spans
/// between openings, plus sills below and lintels above each opening.
pub fn wall_solids(wall: &WallSpec) -> Result<Vec<OrientedBox>, GeometryError> {
    let seg = WallSegment::from(wall);
    let len = seg.length();
    let h = wall.height;
    let mut openings = wall.openings.clone();
    openings.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    let mut pieces = Vec::new();
    let mut cursor = 0.0;
    for o in &openings {
        let end = (o.offset + o.width).min(len);
        if o.offset > cursor + PIECE_EPS {
            pieces.push(seg.piece(cursor, o.offset, 0.0, h)?);
        }
        if o.bottom > PIECE_EPS {
            pieces.push(seg.piece(o.offset, end, 0.0, o.bottom)?);
        }
        if o.top < h - PIECE_EPS {
            pieces.push(seg.piece(o.offset, end, o.top, h)?);
        }
        cursor = end;
    }
    if len > cursor + PIECE_EPS {
        pieces.push(seg.piece(cursor, len, 0.0, h)?);
    }
    Ok(pieces)
}

/// Rooms on either side of an opening's midpoint, in room order.
pub fn opening_rooms(wall: &WallSegment, o: &OpeningSpec, rooms: &[Room]) -> Vec<String> {
    let mid = wall.point_at(o.offset + 0.5 * o.width);
    let d = wall.direction();
    let normal = Point2::new(-d.z, d.x);
    let probe = 0.5 * wall.thickness + 0.05;
    let sides = [mid.add(normal.scale(probe)), mid.sub(normal.scale(probe))];
    rooms
        .iter()
        .filter(|r| sides.iter().any(|&p| r.polygon.contains(p)))
        .map(|r| r.id.clone())
        .collect()
}

/// Floor rectangle in front of and behind a door that must stay clear; its
/// depth on each side equals the door width. The box is tall enough that only
/// its footprint matters.
pub fn door_clearance(wall: &WallSegment, o: &OpeningSpec) -> OrientedBox {
    let mid = wall.point_at(o.offset + 0.5 * o.width);
    OrientedBox::new(
        [mid.x, 50.0, mid.z],
        [0.5 * o.width, 50.0, 0.5 * wall.thickness + o.width],
        wall.yaw(),
    )
    .expect("door opening has positive width")
}

/// Draw the state of a door portal. Exterior doors are always closed with a
/// leaf; interior doors get a leaf with probability `leaf_probability` and,
/// if so, an openness uniform in `[0.8, 1.0]`. Frame-only doors report
/// openness 1.
pub fn sample_door_state(
    portal: &Portal,
    adjacent: &[String],
    leaf_probability: f64,
    rng: &mut SceneRng,
) -> DoorState {
    debug_assert_eq!(portal.kind, PortalKind::Door);
    if portal.exterior {
        return DoorState {
            openness: 0.0,
            swing_room: adjacent.first().cloned(),
            has_leaf: true,
        };
    }
    let has_leaf = rng.random_bool(leaf_probability.clamp(0.0, 1.0));
    let openness = if has_leaf {
        rng.random_range(0.8..=1.0)
    } else {
        1.0
    };
    let swing_room = if adjacent.is_empty() {
        None
    } else {
        Some(adjacent[rng.random_range(0..adjacent.len())].clone())
    };
    DoorState {
        openness,
        swing_room,
        has_leaf,
    }
}

fn ceiling_for(poly: &Polygon2D, walls: &[WallSpec], snap_tol: f64) -> f64 {
    let mut best: Option<f64> = None;
    for (a, b) in poly.edges() {
        for t in [0.25, 0.5, 0.75] {
            let p = a.add(b.sub(a).scale(t));
            for w in walls {
                if point_segment_distance(p, w.start, w.end) <= snap_tol {
                    best = Some(best.map_or(w.height, |h: f64| h.max(w.height)));
                }
            }
        }
    }
    best.unwrap_or_else(|| walls.iter().map(|w| w.height).fold(0.0, f64::max))
}

/// Build rooms, wall solids and portals for a template. Door states are the
/// only random draws.
pub fn build_layout(
    t: &EnvironmentTemplate,
    cfg: &LayoutConfig,
    rng: &mut SceneRng,
) -> Result<Layout, LayoutError> {
    let segments: Vec<Segment2> = t.walls.iter().map(|w| Segment2::new(w.start, w.end)).collect();
    let faces = extract_faces(&segments, cfg.snap_tol)?;
    if faces.is_empty() {
        return Err(LayoutError::NoEnclosure);
    }
    let rooms: Vec<Room> = faces
        .into_iter()
        .enumerate()
        .map(|(i, polygon)| {
            let ceiling_y = ceiling_for(&polygon, &t.walls, cfg.snap_tol);
            Room {
                id: format!("room_{i}"),
                polygon,
                floor_y: 0.0,
                ceiling_y,
            }
        })
        .collect();

    let walls: Vec<WallSegment> = t.walls.iter().map(WallSegment::from).collect();
    let mut wall_boxes = Vec::new();
    for w in &t.walls {
        wall_boxes.extend(wall_solids(w)?);
    }

    let mut portals = Vec::new();
    for (wi, w) in t.walls.iter().enumerate() {
        let mut openings = w.openings.clone();
        openings.sort_by(|a, b| a.offset.total_cmp(&b.offset));
        for o in openings {
            let kind = classify_opening(&o, cfg.floor_eps);
            let adjacent = opening_rooms(&walls[wi], &o, &rooms);
            let mut portal = Portal {
                kind,
                wall_index: wi,
                opening: o,
                door_state: None,
                exterior: adjacent.len() == 1,
                adjacent_rooms: adjacent.clone(),
                asset_id: None,
            };
            if kind == PortalKind::Door {
                portal.door_state = Some(sample_door_state(&portal, &adjacent, cfg.leaf_probability, rng));
            }
            portals.push(portal);
        }
    }

    Ok(Layout {
        rooms,
        portals,
        walls,
        wall_solids: wall_boxes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use crate::template::parse_template;
    use serde_json::json;

    fn square(openings: serde_json::Value) -> EnvironmentTemplate {
        let doc = json!({
            "walls": [
                {"start": [0.0, 0.0], "end": [4.0, 0.0], "height": 2.5, "openings": openings},
                {"start": [4.0, 0.0], "end": [4.0, 3.0], "height": 2.5},
                {"start": [4.0, 3.0], "end": [0.0, 3.0], "height": 2.7},
                {"start": [0.0, 3.0], "end": [0.0, 0.0], "height": 2.5}
            ]
        });
        parse_template(doc.to_string().as_bytes()).unwrap()
    }

    fn rng() -> SceneRng {
        stream_rng(1, Stream::Layout)
    }

    #[test]
    fn classify_rules() {
        let o = |bottom, top| OpeningSpec { offset: 0.0, width: 1.0, bottom, top };
        assert_eq!(classify_opening(&o(0.0, 2.0), 0.05), PortalKind::Door);
        assert_eq!(classify_opening(&o(0.9, 1.8), 0.05), PortalKind::Window);
        assert_eq!(classify_opening(&o(0.05, 2.0), 0.05), PortalKind::Door);
    }

    #[test]
    fn square_room_layout() {
        let l = build_layout(&square(json!([])), &LayoutConfig::default(), &mut rng()).unwrap();
        assert_eq!(l.rooms.len(), 1);
        assert_eq!(l.wall_solids.len(), 4);
        assert!(l.portals.is_empty());
        assert!((l.rooms[0].polygon.area() - 12.0).abs() < 1e-12);
        assert_eq!(l.rooms[0].ceiling_y, 2.7);
    }

    #[test]
    fn floor_opening_is_exterior_closed_door() {
        let t = square(json!([{"offset": 1.0, "width": 0.9, "bottom": 0.0, "top": 2.0}]));
        let l = build_layout(&t, &LayoutConfig::default(), &mut rng()).unwrap();
        assert_eq!(l.portals.len(), 1);
        let p = &l.portals[0];
        assert_eq!(p.kind, PortalKind::Door);
        assert!(p.exterior);
        let s = p.door_state.as_ref().unwrap();
        assert_eq!(s.openness, 0.0);
        assert!(s.has_leaf);
        // Two side pieces plus a lintel.
        assert_eq!(l.wall_solids.len(), 3 + 3);
    }

    #[test]
    fn window_gets_sill_and_lintel() {
        let t = square(json!([{"offset": 1.0, "width": 1.2, "bottom": 0.9, "top": 1.8}]));
        let l = build_layout(&t, &LayoutConfig::default(), &mut rng()).unwrap();
        assert_eq!(l.portals[0].kind, PortalKind::Window);
        assert!(l.portals[0].door_state.is_none());
        assert_eq!(l.wall_solids.len(), 3 + 4);
        let total: f64 = l.wall_solids.iter().map(|b| b.volume()).sum();
        let expected = (4.0 * 2.5 + 3.0 * 2.5 * 2.0 + 4.0 * 2.7) * 0.16 - 1.2 * 0.9 * 0.16;
        assert!((total - expected).abs() < 1e-9);
    }

    #[test]
    fn no_enclosure() {
        let doc = json!({
            "walls": [
                {"start": [0.0, 0.0], "end": [4.0, 0.0], "height": 2.5},
                {"start": [4.0, 0.0], "end": [4.0, 3.0], "height": 2.5},
                {"start": [4.0, 3.0], "end": [1.0, 3.0], "height": 2.5}
            ]
        });
        let t = parse_template(doc.to_string().as_bytes()).unwrap();
        assert_eq!(
            build_layout(&t, &LayoutConfig::default(), &mut rng()),
            Err(LayoutError::NoEnclosure)
        );
    }

    fn interior_door() -> Portal {
        Portal {
            kind: PortalKind::Door,
            wall_index: 0,
            opening: OpeningSpec { offset: 0.0, width: 0.9, bottom: 0.0, top: 2.0 },
            door_state: None,
            exterior: false,
            adjacent_rooms: vec!["a".into(), "b".into()],
            asset_id: None,
        }
    }

    #[test]
    fn swing_room_is_balanced() {
        let p = interior_door();
        let adj = p.adjacent_rooms.clone();
        let mut r = rng();
        let n = 10_000;
        let a = (0..n)
            .filter(|_| sample_door_state(&p, &adj, 0.5, &mut r).swing_room.as_deref() == Some("a"))
            .count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((a - n as f64 / 2.0).abs() < 3.0 * sigma, "{a}");
    }

    #[test]
    fn leaf_doors_open_between_bounds() {
        let p = interior_door();
        let adj = p.adjacent_rooms.clone();
        let mut r = rng();
        for _ in 0..1000 {
            let s = sample_door_state(&p, &adj, 0.5, &mut r);
            assert!((0.8..=1.0).contains(&s.openness));
            if !s.has_leaf {
                assert_eq!(s.openness, 1.0);
            }
        }
    }
}
