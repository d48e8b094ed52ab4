//! Asset catalog: placeable asset definitions, the scan-category to asset-type
//! map, and IoU-gated replacement selection.
//!
//! Catalog files are JSON (`.catalog.json`); see `docs/formats/catalog.md`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{footprint_iou, obb_iou, yaw_from_forward, OrientedBox, Point2};
use crate::rng::SceneRng;
use crate::template::{ScanCategory, ScannedObject};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("catalog schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("category `{category}` maps to asset type `{asset_type}` which no asset provides")]
    DanglingType { category: String, asset_type: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> CatalogError {
    CatalogError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placeable {
    Floor,
    Surface,
    Wall,
}

/// Horizontal support rectangle in the asset's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceptacleSurface {
    /// Rectangle center in the asset footprint frame.
    pub center: Point2,
    pub half_size: [f64; 2],
    /// Height of the surface above the asset's bottom face.
    pub height: f64,
}

impl ReceptacleSurface {
    pub fn area(&self) -> f64 {
        4.0 * self.half_size[0] * self.half_size[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetTags {
    pub is_clutter: bool,
    pub is_small: bool,
    pub is_target_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetDef {
    pub id: String,
    pub asset_type: String,
    /// Half extents `(x, y, z)`; local `+z` is the asset's front.
    pub bounding: [f64; 3],
    pub placeable_on: Placeable,
    #[serde(default)]
    pub receptacle_surfaces: Vec<ReceptacleSurface>,
    #[serde(default)]
    pub tags: AssetTags,
    /// Key into the object material palettes.
    #[serde(default)]
    pub material_class: Option<String>,
}

impl AssetDef {
    pub fn footprint_area(&self) -> f64 {
        4.0 * self.bounding[0] * self.bounding[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackMode {
    /// Skip the scanned object and record a diagnostic.
    #[default]
    Skip,
    /// Use the best-IoU candidate even below the threshold.
    BestIou,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    assets: Vec<AssetDef>,
    category_map: BTreeMap<ScanCategory, Vec<String>>,
}

/// Immutable, validated asset catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    assets: Vec<AssetDef>,
    category_map: BTreeMap<ScanCategory, Vec<String>>,
    by_type: BTreeMap<String, Vec<usize>>,
}

impl Catalog {
    pub fn new(
        assets: Vec<AssetDef>,
        category_map: BTreeMap<ScanCategory, Vec<String>>,
    ) -> Result<Self, CatalogError> {
        if assets.is_empty() {
            return Err(schema("assets", "catalog must contain at least one asset"));
        }
        let mut ids = BTreeSet::new();
        let mut by_type: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, a) in assets.iter().enumerate() {
            let p = format!("assets[{i}]");
            if a.id.is_empty() {
                return Err(schema(format!("{p}.id"), "must be non-empty"));
            }
            if !ids.insert(a.id.as_str()) {
                return Err(schema(format!("{p}.id"), format!("duplicate id `{}`", a.id)));
            }
            if a.asset_type.is_empty() {
                return Err(schema(format!("{p}.asset_type"), "must be non-empty"));
            }
            for (k, h) in a.bounding.iter().enumerate() {
                if !(h.is_finite() && *h > 0.0) {
                    return Err(schema(format!("{p}.bounding[{k}]"), "must be positive"));
                }
            }
            for (k, s) in a.receptacle_surfaces.iter().enumerate() {
                let sp = format!("{p}.receptacle_surfaces[{k}]");
                if !(s.half_size[0] > 0.0 && s.half_size[1] > 0.0) {
                    return Err(schema(format!("{sp}.half_size"), "must be positive"));
                }
                let fits = s.center.x.abs() + s.half_size[0] <= a.bounding[0] + 1e-9
                    && s.center.z.abs() + s.half_size[1] <= a.bounding[2] + 1e-9;
                if !fits {
                    return Err(schema(sp, "surface extends beyond the asset footprint"));
                }
                if !(s.height >= 0.0 && s.height <= 2.0 * a.bounding[1] + 1e-9) {
                    return Err(schema(format!("{sp}.height"), "must lie within the asset height"));
                }
            }
            by_type.entry(a.asset_type.clone()).or_default().push(i);
        }
        for c in ScanCategory::ALL {
            match category_map.get(&c) {
                Some(types) if !types.is_empty() => {
                    for t in types {
                        if !by_type.contains_key(t) {
                            return Err(CatalogError::DanglingType {
                                category: c.to_string(),
                                asset_type: t.clone(),
                            });
                        }
                    }
                }
                _ => {
                    return Err(schema(
                        format!("category_map.{c}"),
                        "every scan category needs at least one asset type",
                    ))
                }
            }
        }
        Ok(Catalog {
            assets,
            category_map,
            by_type,
        })
    }

    pub fn assets(&self) -> &[AssetDef] {
        &self.assets
    }

    pub fn category_map(&self) -> &BTreeMap<ScanCategory, Vec<String>> {
        &self.category_map
    }

    pub fn asset(&self, id: &str) -> Option<&AssetDef> {
        self.assets.iter().find(|a| a.id == id)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.by_type.keys().map(String::as_str)
    }

    pub fn assets_of_type<'a>(&'a self, asset_type: &str) -> impl Iterator<Item = &'a AssetDef> + 'a {
        self.by_type
            .get(asset_type)
            .into_iter()
            .flatten()
            .map(move |&i| &self.assets[i])
    }

    /// Whether `asset_type` is one of the types mapped from `category`.
    pub fn is_mapped(&self, category: ScanCategory, asset_type: &str) -> bool {
        self.category_map
            .get(&category)
            .is_some_and(|ts| ts.iter().any(|t| t == asset_type))
    }

    /// Assets satisfying `pred`, sorted by id.
    pub fn filtered(&self, pred: impl Fn(&AssetDef) -> bool) -> Vec<&AssetDef> {
        let mut v: Vec<&AssetDef> = self.assets.iter().filter(|a| pred(a)).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    pub fn to_json(&self) -> Vec<u8> {
        let file = CatalogFile {
            assets: self.assets.clone(),
            category_map: self.category_map.clone(),
        };
        let mut out = serde_json::to_vec_pretty(&file).expect("catalog serializes");
        out.push(b'\n');
        out
    }
}

pub fn load_catalog(bytes: &[u8]) -> Result<Catalog, CatalogError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let file: CatalogFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    Catalog::new(file.assets, file.category_map)
}

/// Box an asset would occupy standing in for `scanned`: same center, facing
/// the scanned forward direction.
pub fn candidate_box(asset: &AssetDef, scanned: &ScannedObject) -> OrientedBox {
    OrientedBox::new(
        scanned.bbox.center(),
        asset.bounding,
        yaw_from_forward(scanned.forward),
    )
    .expect("catalog bounding is validated")
}

/// A replacement candidate with its overlap scores against the scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<'a> {
    pub asset: &'a AssetDef,
    pub iou: f64,
    pub footprint_iou: f64,
}

fn scored_candidates<'a>(scanned: &ScannedObject, catalog: &'a Catalog) -> Vec<Candidate<'a>> {
    let mut out: Vec<Candidate<'a>> = Vec::new();
    if let Some(types) = catalog.category_map.get(&scanned.category) {
        for t in types {
            for a in catalog.assets_of_type(t) {
                let b = candidate_box(a, scanned);
                out.push(Candidate {
                    asset: a,
                    iou: obb_iou(&b, &scanned.bbox),
                    footprint_iou: footprint_iou(&b, &scanned.bbox),
                });
            }
        }
    }
    out.sort_by(|x, y| x.asset.id.cmp(&y.asset.id));
    out.dedup_by(|x, y| x.asset.id == y.asset.id);
    out
}

/// Semantically mapped assets whose box IoU with the scan is at least `tau`,
/// sorted by asset id.
pub fn eligible_assets<'a>(
    scanned: &ScannedObject,
    catalog: &'a Catalog,
    tau: f64,
) -> Vec<Candidate<'a>> {
    scored_candidates(scanned, catalog)
        .into_iter()
        .filter(|c| c.iou >= tau)
        .collect()
}

/// Uniform draw over the eligible set. With `FallbackMode::BestIou`, an empty
/// eligible set falls back to the highest-IoU mapped candidate.
pub fn sample_replacement<'a>(
    scanned: &ScannedObject,
    catalog: &'a Catalog,
    tau: f64,
    fallback: FallbackMode,
    rng: &mut SceneRng,
) -> Option<Candidate<'a>> {
    let eligible = eligible_assets(scanned, catalog, tau);
    if !eligible.is_empty() {
        return Some(eligible[rng.random_range(0..eligible.len())]);
    }
    match fallback {
        FallbackMode::Skip => None,
        FallbackMode::BestIou => scored_candidates(scanned, catalog)
            .into_iter()
            .filter(|c| c.iou > 0.0)
            .max_by(|a, b| a.iou.total_cmp(&b.iou)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn asset(id: &str, ty: &str, b: [f64; 3]) -> AssetDef {
        AssetDef {
            id: id.into(),
            asset_type: ty.into(),
            bounding: b,
            placeable_on: Placeable::Floor,
            receptacle_surfaces: vec![],
            tags: AssetTags::default(),
            material_class: None,
        }
    }

    fn full_map(ty: &str) -> BTreeMap<ScanCategory, Vec<String>> {
        ScanCategory::ALL.iter().map(|c| (*c, vec![ty.to_string()])).collect()
    }

    fn sofa_scan() -> ScannedObject {
        ScannedObject {
            category: ScanCategory::Sofa,
            bbox: OrientedBox::new([0.0, 0.4, 0.0], [1.0, 0.4, 0.5], 0.0).unwrap(),
            forward: Point2::new(0.0, 1.0),
            wall_mounted: false,
        }
    }

    #[test]
    fn dangling_type_rejected() {
        let mut map = full_map("sofa");
        map.insert(ScanCategory::Stairs, vec!["hovercraft".into()]);
        let err = Catalog::new(vec![asset("s", "sofa", [1.0, 0.4, 0.5])], map).unwrap_err();
        assert_eq!(
            err,
            CatalogError::DanglingType {
                category: "stairs".into(),
                asset_type: "hovercraft".into()
            }
        );
    }

    #[test]
    fn empty_catalog_rejected() {
        let bytes = br#"{"assets": [], "category_map": {}}"#;
        assert!(matches!(load_catalog(bytes), Err(CatalogError::Schema { .. })));
    }

    #[test]
    fn receptacle_must_fit() {
        let mut a = asset("t", "sofa", [0.5, 0.4, 0.5]);
        a.receptacle_surfaces.push(ReceptacleSurface {
            center: Point2::new(0.2, 0.0),
            half_size: [0.4, 0.4],
            height: 0.8,
        });
        assert!(matches!(
            Catalog::new(vec![a], full_map("sofa")),
            Err(CatalogError::Schema { .. })
        ));
    }

    #[test]
    fn sofa_eligibility_matches_analytic_iou() {
        // Scanned sofa 2.0 x 0.8 x 1.0; candidates share center and yaw, so
        // IoU = product of per-axis min / max overlaps for nested boxes.
        let cat = Catalog::new(
            vec![
                asset("sofa_same", "sofa", [1.0, 0.4, 0.5]),
                asset("sofa_long", "sofa", [1.2, 0.4, 0.5]),
                asset("sofa_small", "sofa", [0.8, 0.35, 0.45]),
            ],
            full_map("sofa"),
        )
        .unwrap();
        let scan = sofa_scan();
        let all = eligible_assets(&scan, &cat, 1e-9);
        let ious: BTreeMap<&str, f64> = all.iter().map(|c| (c.asset.id.as_str(), c.iou)).collect();
        assert!((ious["sofa_same"] - 1.0).abs() < 1e-12);
        assert!((ious["sofa_long"] - 1.0 / 1.2).abs() < 1e-12);
        let small = (0.8 * 0.35 * 0.45) / (1.0 * 0.4 * 0.5);
        assert!((ious["sofa_small"] - small).abs() < 1e-12);

        let gated: Vec<&str> = eligible_assets(&scan, &cat, 0.75)
            .iter()
            .map(|c| c.asset.id.as_str())
            .collect();
        assert_eq!(gated, vec!["sofa_long", "sofa_same"]);
    }

    #[test]
    fn strict_threshold_at_point_seven_five() {
        // Width scale s on one axis gives IoU = s exactly (nested, same center).
        let cat = Catalog::new(
            vec![
                asset("low", "sofa", [0.74, 0.4, 0.5]),
                asset("high", "sofa", [0.76, 0.4, 0.5]),
            ],
            full_map("sofa"),
        )
        .unwrap();
        let ids: Vec<&str> = eligible_assets(&sofa_scan(), &cat, 0.75)
            .iter()
            .map(|c| c.asset.id.as_str())
            .collect();
        assert_eq!(ids, vec!["high"]);
    }

    #[test]
    fn eligibility_is_order_invariant_and_monotone() {
        let assets = vec![
            asset("a", "sofa", [1.0, 0.4, 0.5]),
            asset("b", "sofa", [0.9, 0.4, 0.5]),
            asset("c", "sofa", [0.7, 0.3, 0.4]),
            asset("d", "sofa", [1.3, 0.5, 0.6]),
        ];
        let fwd = Catalog::new(assets.clone(), full_map("sofa")).unwrap();
        let mut rev_assets = assets;
        rev_assets.reverse();
        let rev = Catalog::new(rev_assets, full_map("sofa")).unwrap();
        let scan = sofa_scan();
        let ids = |c: &Catalog, tau| {
            eligible_assets(&scan, c, tau)
                .iter()
                .map(|x| x.asset.id.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&fwd, 0.5), ids(&rev, 0.5));
        let mut prev = usize::MAX;
        for tau in [0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 1.0] {
            let n = ids(&fwd, tau).len();
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn replacement_sampling() {
        let cat = Catalog::new(
            vec![
                asset("a", "sofa", [1.0, 0.4, 0.5]),
                asset("b", "sofa", [0.98, 0.4, 0.5]),
                asset("c", "sofa", [0.96, 0.4, 0.5]),
                asset("tiny", "sofa", [0.2, 0.2, 0.2]),
            ],
            full_map("sofa"),
        )
        .unwrap();
        let mut rng = stream_rng(3, Stream::Semantic);
        let n = 30_000;
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            let c = sample_replacement(&sofa_scan(), &cat, 0.75, FallbackMode::Skip, &mut rng).unwrap();
            *counts.entry(c.asset.id.clone()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 3);
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (_, k) in counts {
            assert!((k as f64 - n as f64 * p).abs() < 3.0 * sigma);
        }

        let single = Catalog::new(vec![asset("only", "sofa", [1.0, 0.4, 0.5])], full_map("sofa")).unwrap();
        for _ in 0..10 {
            let c = sample_replacement(&sofa_scan(), &single, 0.75, FallbackMode::Skip, &mut rng).unwrap();
            assert_eq!(c.asset.id, "only");
        }

        let none = Catalog::new(vec![asset("tiny", "sofa", [0.2, 0.2, 0.2])], full_map("sofa")).unwrap();
        assert!(sample_replacement(&sofa_scan(), &none, 0.75, FallbackMode::Skip, &mut rng).is_none());
        let best = sample_replacement(&sofa_scan(), &none, 0.75, FallbackMode::BestIou, &mut rng).unwrap();
        assert_eq!(best.asset.id, "tiny");
    }
}
