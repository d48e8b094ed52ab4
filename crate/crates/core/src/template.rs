//! Environment templates: the scan-derived walls, openings and large-object
//! boxes that condition scene generation.
//!
//! The on-disk form is JSON (`.tmpl.json`); see `docs/formats/template.md`.
//! Unknown top-level keys are folded into `meta`. Unknown keys anywhere else
//! are schema errors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{OrientedBox, Point2};

pub const DEFAULT_WALL_THICKNESS: f64 = 0.16;
const UNIT_TOL: f64 = 1e-6;
const FIT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("unknown category `{value}` at `{path}`")]
    UnknownCategory { path: String, value: String },
}

impl TemplateError {
    /// Dotted path of the offending field, e.g. `walls[2].openings[0].top`.
    pub fn path(&self) -> &str {
        match self {
            TemplateError::Schema { path, .. }
            | TemplateError::Validation { path, .. }
            | TemplateError::UnknownCategory { path, .. } => path,
        }
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> TemplateError {
    TemplateError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> TemplateError {
    TemplateError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

/// The sixteen object categories a scan can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScanCategory {
    Storage,
    Sofa,
    Table,
    Chair,
    Bed,
    Refrigerator,
    Oven,
    Stove,
    Dishwasher,
    WasherDryer,
    Fireplace,
    Sink,
    Bathtub,
    Toilet,
    Stairs,
    Television,
}

impl ScanCategory {
    pub const ALL: [ScanCategory; 16] = [
        ScanCategory::Storage,
        ScanCategory::Sofa,
        ScanCategory::Table,
        ScanCategory::Chair,
        ScanCategory::Bed,
        ScanCategory::Refrigerator,
        ScanCategory::Oven,
        ScanCategory::Stove,
        ScanCategory::Dishwasher,
        ScanCategory::WasherDryer,
        ScanCategory::Fireplace,
        ScanCategory::Sink,
        ScanCategory::Bathtub,
        ScanCategory::Toilet,
        ScanCategory::Stairs,
        ScanCategory::Television,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScanCategory::Storage => "storage",
            ScanCategory::Sofa => "sofa",
            ScanCategory::Table => "table",
            ScanCategory::Chair => "chair",
            ScanCategory::Bed => "bed",
            ScanCategory::Refrigerator => "refrigerator",
            ScanCategory::Oven => "oven",
            ScanCategory::Stove => "stove",
            ScanCategory::Dishwasher => "dishwasher",
            ScanCategory::WasherDryer => "washerDryer",
            ScanCategory::Fireplace => "fireplace",
            ScanCategory::Sink => "sink",
            ScanCategory::Bathtub => "bathtub",
            ScanCategory::Toilet => "toilet",
            ScanCategory::Stairs => "stairs",
            ScanCategory::Television => "television",
        }
    }
}

impl fmt::Display for ScanCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScanCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScanCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// A rectangular cutout in a wall, in wall-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpeningSpec {
    /// Distance along the wall from its start point to the near edge.
    pub offset: f64,
    pub width: f64,
    /// Height of the lower edge above the floor.
    pub bottom: f64,
    pub top: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub start: Point2,
    pub end: Point2,
    pub height: f64,
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    #[serde(default)]
    pub openings: Vec<OpeningSpec>,
}

fn default_thickness() -> f64 {
    DEFAULT_WALL_THICKNESS
}

impl WallSpec {
    pub fn length(&self) -> f64 {
        self.start.dist(self.end)
    }

    /// Unit direction from start to end.
    pub fn direction(&self) -> Point2 {
        self.end.sub(self.start).scale(1.0 / self.length())
    }

    /// Point on the centerline `s` meters from the start.
    pub fn point_at(&self, s: f64) -> Point2 {
        self.start.add(self.direction().scale(s))
    }

    pub fn yaw(&self) -> f64 {
        let d = self.end.sub(self.start);
        d.z.atan2(d.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScannedObject {
    pub category: ScanCategory,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    /// Unit facing direction in the top-down plane.
    pub forward: Point2,
    pub wall_mounted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentTemplate {
    pub meta: BTreeMap<String, Value>,
    pub walls: Vec<WallSpec>,
    pub objects: Vec<ScannedObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    center: [f64; 3],
    half_extents: [f64; 3],
    yaw: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    category: String,
    #[serde(rename = "box")]
    bbox: RawBox,
    forward: [f64; 2],
    #[serde(default)]
    wall_mounted: bool,
}

fn decode<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, TemplateError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." {
            prefix.to_string()
        } else if inner.starts_with('[') {
            format!("{prefix}{inner}")
        } else {
            format!("{prefix}.{inner}")
        };
        schema(path, e.into_inner().to_string())
    })
}

fn positive(path: &str, v: f64) -> Result<(), TemplateError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive, got {v}")))
    }
}

fn finite(path: &str, vals: &[f64]) -> Result<(), TemplateError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(path, "must be finite"))
    }
}

impl EnvironmentTemplate {
    /// Check every invariant; errors name the first offending field.
    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.walls.len() < 3 {
            return Err(invalid(
                "walls",
                format!("at least 3 walls required, got {}", self.walls.len()),
            ));
        }
        for (i, w) in self.walls.iter().enumerate() {
            let p = format!("walls[{i}]");
            finite(&format!("{p}.start"), &[w.start.x, w.start.z])?;
            finite(&format!("{p}.end"), &[w.end.x, w.end.z])?;
            if w.start == w.end {
                return Err(invalid(format!("{p}.end"), "wall start and end coincide"));
            }
            positive(&format!("{p}.height"), w.height)?;
            positive(&format!("{p}.thickness"), w.thickness)?;
            let len = w.length();
            let mut spans: Vec<(f64, f64, usize)> = Vec::new();
            for (j, o) in w.openings.iter().enumerate() {
                let op = format!("{p}.openings[{j}]");
                finite(&op, &[o.offset, o.width, o.bottom, o.top])?;
                if o.offset < 0.0 {
                    return Err(invalid(format!("{op}.offset"), "must be >= 0"));
                }
                positive(&format!("{op}.width"), o.width)?;
                if o.offset + o.width > len + FIT_TOL {
                    return Err(invalid(
                        format!("{op}.width"),
                        format!("opening ends at {} beyond wall length {len}", o.offset + o.width),
                    ));
                }
                if o.bottom < 0.0 {
                    return Err(invalid(format!("{op}.bottom"), "must be >= 0"));
                }
                if o.bottom >= o.top {
                    return Err(invalid(
                        format!("{op}.top"),
                        format!("top {} must exceed bottom {}", o.top, o.bottom),
                    ));
                }
                if o.top > w.height + FIT_TOL {
                    return Err(invalid(
                        format!("{op}.top"),
                        format!("top {} exceeds wall height {}", o.top, w.height),
                    ));
                }
                spans.push((o.offset, o.offset + o.width, j));
            }
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            for pair in spans.windows(2) {
                if pair[1].0 < pair[0].1 - FIT_TOL {
                    return Err(invalid(
                        format!("{p}.openings[{}].offset", pair[1].2),
                        "openings overlap",
                    ));
                }
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            let p = format!("objects[{i}]");
            let n = o.forward.norm();
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
                return Err(invalid(
                    format!("{p}.forward"),
                    format!("must have unit norm, got {n}"),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(write_template(self)))
    }
}

fn parse_object(raw: RawObject, i: usize) -> Result<ScannedObject, TemplateError> {
    let p = format!("objects[{i}]");
    let category = raw
        .category
        .parse::<ScanCategory>()
        .map_err(|value| TemplateError::UnknownCategory {
            path: format!("{p}.category"),
            value,
        })?;
    let b = raw.bbox;
    finite(&format!("{p}.box.center"), &b.center)?;
    for (k, h) in b.half_extents.iter().enumerate() {
        positive(&format!("{p}.box.half_extents[{k}]"), *h)?;
    }
    finite(&format!("{p}.box.yaw"), &[b.yaw])?;
    let bbox = OrientedBox::new(b.center, b.half_extents, b.yaw)
        .map_err(|e| invalid(format!("{p}.box"), e.to_string()))?;
    Ok(ScannedObject {
        category,
        bbox,
        forward: raw.forward.into(),
        wall_mounted: raw.wall_mounted,
    })
}

/// Parse and validate a template document.
pub fn parse_template(bytes: &[u8]) -> Result<EnvironmentTemplate, TemplateError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| schema("$", e.to_string()))?;
    let Value::Object(mut top) = root else {
        return Err(schema("$", "document must be an object"));
    };
    let walls_v = top.remove("walls").ok_or_else(|| schema("walls", "missing field"))?;
    let objects_v = top.remove("objects").unwrap_or(Value::Array(Vec::new()));
    let mut meta: BTreeMap<String, Value> = match top.remove("meta") {
        None => BTreeMap::new(),
        Some(Value::Object(m)) => m.into_iter().collect(),
        Some(_) => return Err(schema("meta", "must be an object")),
    };
    for (k, v) in top {
        if meta.contains_key(&k) {
            return Err(schema(k.clone(), "key present both at top level and in meta"));
        }
        meta.insert(k, v);
    }

    let walls: Vec<WallSpec> = decode(walls_v, "walls")?;
    let raw_objects: Vec<RawObject> = decode(objects_v, "objects")?;
    let objects = raw_objects
        .into_iter()
        .enumerate()
        .map(|(i, r)| parse_object(r, i))
        .collect::<Result<Vec<_>, _>>()?;

    let t = EnvironmentTemplate { meta, walls, objects };
    t.validate()?;
    Ok(t)
}

/// Canonical serialization: pretty JSON, stable key order, trailing newline.
pub fn write_template(t: &EnvironmentTemplate) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(t).expect("template serializes");
    out.push(b'\n');
    out
}

/// Convenience for building meta maps in code.
pub fn meta_from<I, K>(pairs: I) -> BTreeMap<String, Value>
where
    I: IntoIterator<Item = (K, Value)>,
    K: Into<String>,
{
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.into(), v);
    }
    m.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn square_doc() -> Value {
        json!({
            "walls": [
                {"start": [0.0, 0.0], "end": [4.0, 0.0], "height": 2.5},
                {"start": [4.0, 0.0], "end": [4.0, 3.0], "height": 2.5},
                {"start": [4.0, 3.0], "end": [0.0, 3.0], "height": 2.5},
                {"start": [0.0, 3.0], "end": [0.0, 0.0], "height": 2.5}
            ]
        })
    }

    fn parse_value(v: &Value) -> Result<EnvironmentTemplate, TemplateError> {
        parse_template(serde_json::to_string(v).unwrap().as_bytes())
    }

    #[test]
    fn minimal_square_room() {
        let t = parse_value(&square_doc()).unwrap();
        assert_eq!(t.walls.len(), 4);
        assert!(t.objects.is_empty());
        assert_eq!(t.walls[0].thickness, DEFAULT_WALL_THICKNESS);
    }

    #[test]
    fn inverted_opening_rejected() {
        let mut doc = square_doc();
        doc["walls"][1]["openings"] =
            json!([{"offset": 0.5, "width": 1.0, "bottom": 0.9, "top": 0.5}]);
        let err = parse_value(&doc).unwrap_err();
        assert!(matches!(err, TemplateError::Validation { .. }));
        assert_eq!(err.path(), "walls[1].openings[0].top");
    }

    #[test]
    fn too_few_walls() {
        let mut doc = square_doc();
        doc["walls"].as_array_mut().unwrap().truncate(2);
        assert_eq!(parse_value(&doc).unwrap_err().path(), "walls");
    }

    #[test]
    fn schema_errors_carry_paths() {
        let mut doc = square_doc();
        doc["walls"][2].as_object_mut().unwrap().remove("height");
        let err = parse_value(&doc).unwrap_err();
        assert!(matches!(err, TemplateError::Schema { .. }), "{err}");
        assert!(err.path().starts_with("walls[2]"), "{}", err.path());

        let mut doc = square_doc();
        doc["walls"][0]["colour"] = json!("red");
        let err = parse_value(&doc).unwrap_err();
        assert!(err.path().starts_with("walls[0]"), "{}", err.path());

        assert!(matches!(
            parse_template(b"{not json"),
            Err(TemplateError::Schema { .. })
        ));
    }

    #[test]
    fn unknown_category() {
        let mut doc = square_doc();
        doc["objects"] = json!([{
            "category": "whiteboard",
            "box": {"center": [1.0, 0.5, 1.0], "half_extents": [0.5, 0.5, 0.1], "yaw": 0.0},
            "forward": [0.0, 1.0]
        }]);
        let err = parse_value(&doc).unwrap_err();
        assert_eq!(
            err,
            TemplateError::UnknownCategory {
                path: "objects[0].category".into(),
                value: "whiteboard".into()
            }
        );
    }

    #[test]
    fn forward_must_be_unit() {
        let mut doc = square_doc();
        doc["objects"] = json!([{
            "category": "sofa",
            "box": {"center": [1.0, 0.4, 1.0], "half_extents": [0.9, 0.4, 0.45], "yaw": 0.0},
            "forward": [0.0, 0.9]
        }]);
        assert_eq!(parse_value(&doc).unwrap_err().path(), "objects[0].forward");
    }

    #[test]
    fn unknown_top_level_keys_go_to_meta() {
        let mut doc = square_doc();
        doc["scan_id"] = json!("abc");
        doc["meta"] = json!({"units": "m"});
        let t = parse_value(&doc).unwrap();
        assert_eq!(t.meta["scan_id"], json!("abc"));
        assert_eq!(t.meta["units"], json!("m"));
    }

    #[test]
    fn overlapping_openings_rejected() {
        let mut doc = square_doc();
        doc["walls"][0]["openings"] = json!([
            {"offset": 0.5, "width": 1.0, "bottom": 0.0, "top": 2.0},
            {"offset": 1.2, "width": 1.0, "bottom": 0.9, "top": 2.0}
        ]);
        assert_eq!(parse_value(&doc).unwrap_err().path(), "walls[0].openings[1].offset");
    }

    #[test]
    fn unicode_meta_is_idempotent() {
        let mut doc = square_doc();
        doc["meta"] = json!({"scan": "Küche / 台所", "operator": "Zoë"});
        let t = parse_value(&doc).unwrap();
        let once = write_template(&t);
        let twice = write_template(&parse_template(&once).unwrap());
        assert_eq!(once, twice);
        assert_eq!(parse_template(&once).unwrap(), t);
    }
}
