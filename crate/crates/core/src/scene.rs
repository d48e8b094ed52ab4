//! Generated scene descriptions and their JSON form (`.scene.json`).
//!
//! Field order is fixed by declaration order, so serializing the same scene
//! always yields the same bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedBox, Point2};
use crate::layout::{Portal, Room, WallSegment};

pub const SCENE_FORMAT: &str = "scenesmith.scene/1";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementSource {
    Semantic,
    Small,
    Clutter,
}

/// Receptacle rectangle a child rests on, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportSurface {
    pub center: Point2,
    pub half_size: [f64; 2],
    pub yaw: f64,
    /// World height of the surface.
    pub height: f64,
}

impl SupportSurface {
    /// Whether every footprint corner of `b` lies in the rectangle (with `tol` slack).
    pub fn holds(&self, b: &OrientedBox, tol: f64) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let (u, v) = (Point2::new(c, s), Point2::new(-s, c));
        b.footprint().iter().all(|p| {
            let d = p.sub(self.center);
            d.dot(u).abs() <= self.half_size[0] + tol && d.dot(v).abs() <= self.half_size[1] + tol
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    /// Index of this placement in the scene's placement list.
    pub id: u32,
    pub asset_id: String,
    pub asset_type: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub source: PlacementSource,
    pub parent: Option<u32>,
    pub support: Option<SupportSurface>,
    pub room: String,
    /// Index of the scanned object this placement stands in for.
    pub scanned_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Light {
    pub room: String,
    pub position: [f64; 3],
    /// Doubles as the light's strength.
    pub intensity: f64,
    pub color: [f64; 3],
    pub shadow_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomMaterials {
    pub room: String,
    pub wall: String,
    pub floor: String,
    pub ceiling: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementMaterial {
    pub placement: u32,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialAssignment {
    pub rooms: Vec<RoomMaterials>,
    pub placements: Vec<PlacementMaterial>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// No mapped asset passed the IoU gate.
    NoEligibleAsset,
    /// A below-threshold asset was used because of the best-IoU fallback.
    FallbackUsed,
    /// Replacement would collide with a wall or an earlier placement.
    Collision,
    /// Replacement center is outside every room.
    OutsideRooms,
    /// Surface object whose supporting object was skipped or cannot hold it.
    MissingSupport,
    /// Raised object with no supporting scanned object; kept at scanned height.
    Unsupported,
    /// Small object that found no free spot within the try budget.
    SmallRejected,
    /// Clutter object that found no free spot within the try budget.
    ClutterRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub subject: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub format: String,
    pub seed: u64,
    pub template_digest: String,
    pub rooms: Vec<Room>,
    pub walls: Vec<WallSegment>,
    pub portals: Vec<Portal>,
    pub wall_solids: Vec<OrientedBox>,
    pub placements: Vec<Placement>,
    pub lights: Vec<Light>,
    pub materials: MaterialAssignment,
    pub diagnostics: Vec<Diagnostic>,
}

impl SceneSpec {
    pub fn area(&self) -> f64 {
        self.rooms.iter().map(|r| r.polygon.area()).sum()
    }

    pub fn room_at(&self, p: Point2) -> Option<&Room> {
        self.rooms.iter().find(|r| r.polygon.contains(p))
    }

    pub fn count(&self, source: PlacementSource) -> usize {
        self.placements.iter().filter(|p| p.source == source).count()
    }
}

pub fn write_scene(scene: &SceneSpec) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(scene).expect("scene serializes");
    out.push(b'\n');
    out
}

pub fn parse_scene(bytes: &[u8]) -> Result<SceneSpec, SceneError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| SceneError::Schema {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}
