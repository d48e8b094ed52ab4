//! Scene population: semantic replacements for scanned objects, small objects
//! on receptacles, floor clutter, lights and materials.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{sample_replacement, AssetDef, Catalog, FallbackMode, DEFAULT_IOU_THRESHOLD};
use crate::geometry::{footprints_overlap, obb_intersects, yaw_from_forward, OrientedBox, Point2, Polygon2D};
use crate::layout::{build_layout, door_clearance, Layout, LayoutConfig, LayoutError, PortalKind};
use crate::rng::{split, stream_rng, SceneRng, Stream};
use crate::scene::{
    Diagnostic, DiagnosticKind, Light, MaterialAssignment, Placement, PlacementMaterial, PlacementSource,
    RoomMaterials, SceneSpec, SupportSurface, SCENE_FORMAT,
};
use crate::template::{EnvironmentTemplate, ScannedObject};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("material palette `{0}` is empty")]
    EmptyPalette(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructurePalettes {
    pub wall: Vec<String>,
    pub floor: Vec<String>,
    pub ceiling: Vec<String>,
}

impl Default for StructurePalettes {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        StructurePalettes {
            wall: v(&["white_paint", "beige_plaster", "grey_concrete", "sage_wallpaper"]),
            floor: v(&["oak_planks", "walnut_parquet", "grey_tile", "beige_carpet"]),
            ceiling: v(&["white_paint", "textured_plaster"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Palettes {
    pub structure: StructurePalettes,
    /// Object palettes keyed by asset material class.
    pub object: BTreeMap<String, Vec<String>>,
}

impl Default for Palettes {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let object = [
            ("wood", v(&["light_oak", "dark_walnut", "white_laminate", "cherry"])),
            ("fabric", v(&["grey_linen", "navy_velvet", "beige_wool", "green_canvas"])),
            ("metal", v(&["brushed_steel", "black_enamel", "white_enamel"])),
            ("ceramic", v(&["white_glaze", "blue_glaze", "terracotta"])),
            ("plastic", v(&["red_plastic", "white_plastic", "black_plastic", "yellow_plastic"])),
            ("organic", v(&["fresh", "ripe", "dried"])),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Palettes {
            structure: StructurePalettes::default(),
            object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightConfig {
    /// Extra lights are drawn from `0..=floor(extra_lights_per_room * rooms)`.
    pub extra_lights_per_room: f64,
    pub intensity: [f64; 2],
    pub rgb_lo: f64,
    pub shadow_bias: [f64; 2],
    /// Distance of light sources below the ceiling.
    pub ceiling_drop: f64,
}

impl Default for LightConfig {
    fn default() -> Self {
        LightConfig {
            extra_lights_per_room: 1.0,
            intensity: [0.5, 2.0],
            rgb_lo: 0.6,
            shadow_bias: [0.0, 0.1],
            ceiling_drop: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub layout: LayoutConfig,
    /// IoU gate for semantic replacements.
    pub iou_threshold: f64,
    /// Minimum gap between any two placements, and between placements and walls.
    pub clearance: f64,
    /// Small objects per square meter of receptacle surface.
    pub lambda_small: f64,
    /// Clutter objects per square meter of free floor.
    pub lambda_clutter: f64,
    pub max_tries: u32,
    pub fallback: FallbackMode,
    /// Vertical tolerance when matching a raised scanned object to its support.
    pub support_tol: f64,
    pub lights: LightConfig,
    pub palettes: Palettes,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            layout: LayoutConfig::default(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            clearance: 0.01,
            lambda_small: 1.5,
            lambda_clutter: 0.15,
            max_tries: 50,
            fallback: FallbackMode::Skip,
            support_tol: 0.1,
            lights: LightConfig::default(),
            palettes: Palettes::default(),
        }
    }
}

/// Draw from Poisson(`mean`); zero for a non-positive mean.
pub fn poisson(mean: f64, rng: &mut SceneRng) -> u64 {
    if !(mean > 0.0) || !mean.is_finite() {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Uniform point inside `poly` by rejection from its bounding box.
pub fn sample_point_in_polygon(poly: &Polygon2D, rng: &mut SceneRng, tries: u32) -> Option<Point2> {
    let (lo, hi) = poly.bbox();
    for _ in 0..tries {
        let p = Point2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.z..=hi.z));
        if poly.contains(p) {
            return Some(p);
        }
    }
    None
}

fn diag(kind: DiagnosticKind, subject: impl Into<String>, detail: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind,
        subject: subject.into(),
        detail: detail.into(),
    }
}

/// Index of the scanned object each raised object rests on, if any.
fn scanned_supports(objects: &[ScannedObject], floor_y: f64, tol: f64) -> Vec<Option<usize>> {
    objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            if o.wall_mounted || o.bbox.bottom() <= floor_y + tol {
                return None;
            }
            let c = o.bbox.center_xz();
            objects
                .iter()
                .enumerate()
                .filter(|(j, s)| {
                    *j != i
                        && !s.wall_mounted
                        && s.bbox.top() < o.bbox.center()[1]
                        && (s.bbox.top() - o.bbox.bottom()).abs() <= tol
                        && s.bbox.footprint_distance(c) == 0.0
                })
                .min_by(|a, b| {
                    let da = (a.1.bbox.top() - o.bbox.bottom()).abs();
                    let db = (b.1.bbox.top() - o.bbox.bottom()).abs();
                    da.total_cmp(&db).then(a.0.cmp(&b.0))
                })
                .map(|(j, _)| j)
        })
        .collect()
}

fn support_depth(supports: &[Option<usize>], i: usize) -> usize {
    let mut depth = 0;
    let mut cur = supports[i];
    while let Some(j) = cur {
        depth += 1;
        if depth > supports.len() {
            break;
        }
        cur = supports[j];
    }
    depth
}

/// Highest receptacle surface of `parent` whose rectangle holds the child
/// footprint, in world coordinates.
fn holding_surface(
    parent: &Placement,
    parent_asset: &AssetDef,
    child: &OrientedBox,
) -> Option<SupportSurface> {
    parent_asset
        .receptacle_surfaces
        .iter()
        .map(|s| SupportSurface {
            center: parent.bbox.to_world(s.center),
            half_size: s.half_size,
            yaw: parent.bbox.yaw(),
            height: parent.bbox.bottom() + s.height,
        })
        .filter(|s| s.holds(child, 0.0))
        .max_by(|a, b| a.height.total_cmp(&b.height))
}

fn collides_with(
    b: &OrientedBox,
    walls: &[OrientedBox],
    placements: &[Placement],
    skip: Option<u32>,
    clearance: f64,
) -> Option<String> {
    if let Some(i) = walls.iter().position(|w| obb_intersects(b, w, clearance)) {
        return Some(format!("wall solid {i}"));
    }
    placements
        .iter()
        .filter(|p| Some(p.id) != skip)
        .find(|p| obb_intersects(b, &p.bbox, clearance))
        .map(|p| format!("placement {} ({})", p.id, p.asset_id))
}

/// Replace every scanned object with a catalog asset, keeping its floor
/// position and facing. Objects that cannot be placed are skipped with a
/// diagnostic. Placement ids start at `first_id`.
pub fn place_semantic(
    layout: &Layout,
    objects: &[ScannedObject],
    catalog: &Catalog,
    cfg: &GenConfig,
    rng: &mut SceneRng,
    diagnostics: &mut Vec<Diagnostic>,
) -> Vec<Placement> {
    let floor_y = layout.rooms.first().map_or(0.0, |r| r.floor_y);
    let supports = scanned_supports(objects, floor_y, cfg.support_tol);
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by_key(|&i| (support_depth(&supports, i), i));

    let mut placed: Vec<Placement> = Vec::new();
    let mut placement_of: Vec<Option<usize>> = vec![None; objects.len()];
    for i in order {
        let scan = &objects[i];
        let subject = format!("objects[{i}] ({})", scan.category);
        let Some(choice) = sample_replacement(scan, catalog, cfg.iou_threshold, cfg.fallback, rng) else {
            diagnostics.push(diag(
                DiagnosticKind::NoEligibleAsset,
                subject,
                format!("no mapped asset reaches IoU {}", cfg.iou_threshold),
            ));
            continue;
        };
        if choice.iou < cfg.iou_threshold {
            diagnostics.push(diag(
                DiagnosticKind::FallbackUsed,
                subject.clone(),
                format!("using {} at IoU {:.3}", choice.asset.id, choice.iou),
            ));
        }
        let asset = choice.asset;
        let xz = scan.bbox.center_xz();
        let yaw = yaw_from_forward(scan.forward);
        let Some(room) = layout.room_at(xz) else {
            diagnostics.push(diag(DiagnosticKind::OutsideRooms, subject, "center lies outside every room"));
            continue;
        };

        let mut parent = None;
        let mut support = None;
        let bbox = if scan.wall_mounted {
            OrientedBox::new([xz.x, scan.bbox.center()[1], xz.z], asset.bounding, yaw)
        } else if let Some(j) = supports[i] {
            let Some(pi) = placement_of[j] else {
                diagnostics.push(diag(
                    DiagnosticKind::MissingSupport,
                    subject,
                    format!("supporting objects[{j}] was not placed"),
                ));
                continue;
            };
            let host = &placed[pi];
            let host_asset = catalog.asset(&host.asset_id).expect("placed asset exists");
            let probe = OrientedBox::resting(xz, host.bbox.top(), asset.bounding, yaw)
                .expect("catalog bounding is validated");
            let Some(surface) = holding_surface(host, host_asset, &probe) else {
                diagnostics.push(diag(
                    DiagnosticKind::MissingSupport,
                    subject,
                    format!("{} does not fit on a surface of {}", asset.id, host.asset_id),
                ));
                continue;
            };
            parent = Some(host.id);
            support = Some(surface);
            OrientedBox::resting(xz, surface.height, asset.bounding, yaw)
        } else {
            if scan.bbox.bottom() > room.floor_y + cfg.support_tol {
                diagnostics.push(diag(
                    DiagnosticKind::Unsupported,
                    subject.clone(),
                    "raised object without support; kept scanned height",
                ));
                OrientedBox::new([xz.x, scan.bbox.center()[1], xz.z], asset.bounding, yaw)
            } else {
                OrientedBox::resting(xz, room.floor_y, asset.bounding, yaw)
            }
        }
        .expect("catalog bounding is validated");

        if let Some(hit) = collides_with(&bbox, &layout.wall_solids, &placed, parent, cfg.clearance) {
            diagnostics.push(diag(
                DiagnosticKind::Collision,
                subject,
                format!("{} would collide with {hit}", asset.id),
            ));
            continue;
        }
        placement_of[i] = Some(placed.len());
        placed.push(Placement {
            id: placed.len() as u32,
            asset_id: asset.id.clone(),
            asset_type: asset.asset_type.clone(),
            bbox,
            source: PlacementSource::Semantic,
            parent,
            support,
            room: room.id.clone(),
            scanned_index: Some(i),
        });
    }
    placed
}

/// Scatter small objects on the receptacle surfaces of `placements`. Each
/// surface receives Poisson(`lambda_small` × area) draws; each draw is
/// rejection-sampled up to `max_tries` times. Returned ids continue after
/// `placements`.
pub fn place_small(
    layout: &Layout,
    placements: &[Placement],
    catalog: &Catalog,
    cfg: &GenConfig,
    rng: &mut SceneRng,
    diagnostics: &mut Vec<Diagnostic>,
) -> Vec<Placement> {
    let smalls = catalog.filtered(|a| a.tags.is_small);
    let mut added: Vec<Placement> = Vec::new();
    if smalls.is_empty() {
        return added;
    }
    let base = placements.len() as u32;
    for parent in placements {
        let Some(parent_asset) = catalog.asset(&parent.asset_id) else {
            continue;
        };
        for (k, surf) in parent_asset.receptacle_surfaces.iter().enumerate() {
            let n = poisson(cfg.lambda_small * surf.area(), rng);
            let support = SupportSurface {
                center: parent.bbox.to_world(surf.center),
                half_size: surf.half_size,
                yaw: parent.bbox.yaw(),
                height: parent.bbox.bottom() + surf.height,
            };
            for _ in 0..n {
                let asset = smalls[rng.random_range(0..smalls.len())];
                let mut done = false;
                for _ in 0..cfg.max_tries.max(1) {
                    let rel_yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let lx = surf.center.x + rng.random_range(-surf.half_size[0]..=surf.half_size[0]);
                    let lz = surf.center.z + rng.random_range(-surf.half_size[1]..=surf.half_size[1]);
                    let xz = parent.bbox.to_world(Point2::new(lx, lz));
                    let Ok(b) = OrientedBox::resting(xz, support.height, asset.bounding, parent.bbox.yaw() + rel_yaw)
                    else {
                        continue;
                    };
                    if !support.holds(&b, 0.0) {
                        continue;
                    }
                    if collides_with(&b, &layout.wall_solids, placements, Some(parent.id), cfg.clearance).is_some()
                        || collides_with(&b, &[], &added, None, cfg.clearance).is_some()
                    {
                        continue;
                    }
                    added.push(Placement {
                        id: base + added.len() as u32,
                        asset_id: asset.id.clone(),
                        asset_type: asset.asset_type.clone(),
                        bbox: b,
                        source: PlacementSource::Small,
                        parent: Some(parent.id),
                        support: Some(support),
                        room: parent.room.clone(),
                        scanned_index: None,
                    });
                    done = true;
                    break;
                }
                if !done {
                    diagnostics.push(diag(
                        DiagnosticKind::SmallRejected,
                        format!("placement {} surface {k}", parent.id),
                        format!("{} found no free spot in {} tries", asset.id, cfg.max_tries),
                    ));
                }
            }
        }
    }
    added
}

/// Floor area of `room` not covered by floor-standing placements.
pub fn free_floor_area(layout: &Layout, room_id: &str, placements: &[Placement], floor_eps: f64) -> f64 {
    let Some(room) = layout.room(room_id) else {
        return 0.0;
    };
    let covered: f64 = placements
        .iter()
        .filter(|p| p.room == room_id && p.parent.is_none() && p.bbox.bottom() <= room.floor_y + floor_eps)
        .map(|p| p.bbox.footprint_area())
        .sum();
    (room.polygon.area() - covered).max(0.0)
}

/// Door swing rectangles for every door portal.
pub fn door_clearances(layout: &Layout) -> Vec<OrientedBox> {
    layout
        .portals
        .iter()
        .filter(|p| p.kind == PortalKind::Door)
        .map(|p| door_clearance(&layout.walls[p.wall_index], &p.opening))
        .collect()
}

/// Scatter clutter on free floor, Poisson(`lambda_clutter` × free area) per
/// room, never inside a door's clearance rectangle.
pub fn place_clutter(
    layout: &Layout,
    placements: &[Placement],
    catalog: &Catalog,
    cfg: &GenConfig,
    rng: &mut SceneRng,
    diagnostics: &mut Vec<Diagnostic>,
) -> Vec<Placement> {
    let clutter = catalog.filtered(|a| a.tags.is_clutter);
    let mut added: Vec<Placement> = Vec::new();
    if clutter.is_empty() {
        return added;
    }
    let doors = door_clearances(layout);
    let base = placements.len() as u32;
    for room in &layout.rooms {
        let free = free_floor_area(layout, &room.id, placements, cfg.layout.floor_eps);
        let n = poisson(cfg.lambda_clutter * free, rng);
        let (lo, hi) = room.polygon.bbox();
        for _ in 0..n {
            let asset = clutter[rng.random_range(0..clutter.len())];
            let mut done = false;
            for _ in 0..cfg.max_tries.max(1) {
                let xz = Point2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.z..=hi.z));
                let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let Ok(b) = OrientedBox::resting(xz, room.floor_y, asset.bounding, yaw) else {
                    continue;
                };
                if !b.footprint().iter().all(|&c| room.polygon.contains(c)) {
                    continue;
                }
                if doors.iter().any(|d| footprints_overlap(&b, d)) {
                    continue;
                }
                if collides_with(&b, &layout.wall_solids, placements, None, cfg.clearance).is_some()
                    || collides_with(&b, &[], &added, None, cfg.clearance).is_some()
                {
                    continue;
                }
                added.push(Placement {
                    id: base + added.len() as u32,
                    asset_id: asset.id.clone(),
                    asset_type: asset.asset_type.clone(),
                    bbox: b,
                    source: PlacementSource::Clutter,
                    parent: None,
                    support: None,
                    room: room.id.clone(),
                    scanned_index: None,
                });
                done = true;
                break;
            }
            if !done {
                diagnostics.push(diag(
                    DiagnosticKind::ClutterRejected,
                    room.id.clone(),
                    format!("{} found no free spot in {} tries", asset.id, cfg.max_tries),
                ));
            }
        }
    }
    added
}

fn light_in(room: &crate::layout::Room, cfg: &LightConfig, rng: &mut SceneRng) -> Light {
    let p = sample_point_in_polygon(&room.polygon, rng, 1000).unwrap_or_else(|| room.polygon.interior_point());
    let y = (room.ceiling_y - cfg.ceiling_drop).max(room.floor_y + 0.5 * (room.ceiling_y - room.floor_y));
    let [ilo, ihi] = cfg.intensity;
    let [blo, bhi] = cfg.shadow_bias;
    let lo = cfg.rgb_lo.clamp(0.0, 1.0);
    Light {
        room: room.id.clone(),
        position: [p.x, y, p.z],
        intensity: rng.random_range(ilo..=ihi),
        color: [
            rng.random_range(lo..=1.0),
            rng.random_range(lo..=1.0),
            rng.random_range(lo..=1.0),
        ],
        shadow_bias: rng.random_range(blo..=bhi),
    }
}

/// One light per room, then `Uniform{0..=floor(extra × rooms)}` extra lights
/// in uniformly chosen rooms.
pub fn sample_lighting(layout: &Layout, cfg: &LightConfig, rng: &mut SceneRng) -> Vec<Light> {
    let mut lights: Vec<Light> = layout.rooms.iter().map(|r| light_in(r, cfg, rng)).collect();
    if layout.rooms.is_empty() {
        return lights;
    }
    let budget = (cfg.extra_lights_per_room.max(0.0) * layout.rooms.len() as f64).floor() as u64;
    let extra = rng.random_range(0..=budget);
    for _ in 0..extra {
        let room = &layout.rooms[rng.random_range(0..layout.rooms.len())];
        lights.push(light_in(room, cfg, rng));
    }
    lights
}

fn check_palettes(p: &Palettes) -> Result<(), GenerateError> {
    for (slot, v) in [
        ("structure.wall", &p.structure.wall),
        ("structure.floor", &p.structure.floor),
        ("structure.ceiling", &p.structure.ceiling),
    ] {
        if v.is_empty() {
            return Err(GenerateError::EmptyPalette(slot.into()));
        }
    }
    for (k, v) in &p.object {
        if v.is_empty() {
            return Err(GenerateError::EmptyPalette(format!("object.{k}")));
        }
    }
    Ok(())
}

fn pick<'a>(v: &'a [String], rng: &mut SceneRng) -> &'a str {
    &v[rng.random_range(0..v.len())]
}

/// Independent uniform structure materials per room and an object material
/// per placement whose asset has a material class with a palette.
pub fn sample_materials(
    layout: &Layout,
    placements: &[Placement],
    catalog: &Catalog,
    palettes: &Palettes,
    rng: &mut SceneRng,
) -> Result<MaterialAssignment, GenerateError> {
    check_palettes(palettes)?;
    let s = &palettes.structure;
    let rooms = layout
        .rooms
        .iter()
        .map(|r| RoomMaterials {
            room: r.id.clone(),
            wall: pick(&s.wall, rng).to_string(),
            floor: pick(&s.floor, rng).to_string(),
            ceiling: pick(&s.ceiling, rng).to_string(),
        })
        .collect();
    let mut per_placement = Vec::new();
    for p in placements {
        let class = catalog.asset(&p.asset_id).and_then(|a| a.material_class.as_deref());
        if let Some(palette) = class.and_then(|c| palettes.object.get(c)) {
            per_placement.push(PlacementMaterial {
                placement: p.id,
                material: pick(palette, rng).to_string(),
            });
        }
    }
    Ok(MaterialAssignment {
        rooms,
        placements: per_placement,
    })
}

fn assign_portal_assets(layout: &mut Layout, catalog: &Catalog, rng: &mut SceneRng) {
    let doors = catalog.filtered(|a| a.asset_type == "door");
    let windows = catalog.filtered(|a| a.asset_type == "window");
    for p in &mut layout.portals {
        let pool = match p.kind {
            PortalKind::Door => &doors,
            PortalKind::Window => &windows,
        };
        if !pool.is_empty() {
            p.asset_id = Some(pool[rng.random_range(0..pool.len())].id.clone());
        }
    }
}

/// Generate one scene variant. Output is a pure function of the inputs.
pub fn generate_scene(
    template: &EnvironmentTemplate,
    catalog: &Catalog,
    cfg: &GenConfig,
    seed: u64,
) -> Result<SceneSpec, GenerateError> {
    check_palettes(&cfg.palettes)?;
    let mut layout_rng = stream_rng(seed, Stream::Layout);
    let mut layout = build_layout(template, &cfg.layout, &mut layout_rng)?;
    assign_portal_assets(&mut layout, catalog, &mut layout_rng);

    let mut diagnostics = Vec::new();
    let mut placements = place_semantic(
        &layout,
        &template.objects,
        catalog,
        cfg,
        &mut stream_rng(seed, Stream::Semantic),
        &mut diagnostics,
    );
    let small = place_small(
        &layout,
        &placements,
        catalog,
        cfg,
        &mut stream_rng(seed, Stream::Small),
        &mut diagnostics,
    );
    placements.extend(small);
    let clutter = place_clutter(
        &layout,
        &placements,
        catalog,
        cfg,
        &mut stream_rng(seed, Stream::Clutter),
        &mut diagnostics,
    );
    placements.extend(clutter);
    let lights = sample_lighting(&layout, &cfg.lights, &mut stream_rng(seed, Stream::Light));
    let materials = sample_materials(
        &layout,
        &placements,
        catalog,
        &cfg.palettes,
        &mut stream_rng(seed, Stream::Material),
    )?;

    Ok(SceneSpec {
        format: SCENE_FORMAT.to_string(),
        seed,
        template_digest: template.digest(),
        rooms: layout.rooms,
        walls: layout.walls,
        portals: layout.portals,
        wall_solids: layout.wall_solids,
        placements,
        lights,
        materials,
        diagnostics,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("scene {index} (seed {seed}): {error}")]
pub struct BatchError {
    pub index: usize,
    pub seed: u64,
    pub error: GenerateError,
}

/// Seed of batch member `index`.
pub fn batch_seed(base_seed: u64, index: usize) -> u64 {
    split(base_seed, index as u64)
}

/// Generate `n` variants with seeds `split(base_seed, i)` on `workers`
/// threads. Results are ordered by index regardless of scheduling.
pub fn generate_batch(
    template: &EnvironmentTemplate,
    catalog: &Catalog,
    cfg: &GenConfig,
    base_seed: u64,
    n: usize,
    workers: usize,
) -> Vec<Result<SceneSpec, BatchError>> {
    let run = |i: usize| {
        let seed = batch_seed(base_seed, i);
        generate_scene(template, catalog, cfg, seed).map_err(|error| BatchError { index: i, seed, error })
    };
    if workers <= 1 {
        return (0..n).map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(run).collect()),
        Err(_) => (0..n).map(run).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{load_catalog, ReceptacleSurface};
    use crate::layout::WallSegment;
    use crate::scene::write_scene;
    use crate::template::{parse_template, ScanCategory};

    const CATALOG: &[u8] = include_bytes!("../../../data/catalog/desk.catalog.json");
    const SIX_ROOM: &[u8] = include_bytes!("../../../data/templates/six_room.tmpl.json");
    const SQUARE: &[u8] = include_bytes!("../../../data/templates/square_room.tmpl.json");

    fn quiet() -> GenConfig {
        GenConfig {
            lambda_small: 0.0,
            lambda_clutter: 0.0,
            ..GenConfig::default()
        }
    }

    fn asset(id: &str, ty: &str, b: [f64; 3]) -> AssetDef {
        AssetDef {
            id: id.into(),
            asset_type: ty.into(),
            bounding: b,
            placeable_on: crate::catalog::Placeable::Floor,
            receptacle_surfaces: vec![],
            tags: Default::default(),
            material_class: None,
        }
    }

    fn full_map(ty: &str) -> BTreeMap<ScanCategory, Vec<String>> {
        ScanCategory::ALL.iter().map(|c| (*c, vec![ty.to_string()])).collect()
    }

    fn square_layout() -> Layout {
        let t = parse_template(SQUARE).unwrap();
        build_layout(&t, &LayoutConfig::default(), &mut stream_rng(0, Stream::Layout)).unwrap()
    }

    #[test]
    fn poisson_zero_mean() {
        let mut rng = stream_rng(1, Stream::Small);
        assert_eq!(poisson(0.0, &mut rng), 0);
        assert_eq!(poisson(-1.0, &mut rng), 0);
    }

    #[test]
    fn fixture_generates_without_diagnostics() {
        let t = parse_template(SIX_ROOM).unwrap();
        let c = load_catalog(CATALOG).unwrap();
        let s = generate_scene(&t, &c, &quiet(), 5).unwrap();
        assert_eq!(s.rooms.len(), 6);
        assert!(s.diagnostics.is_empty(), "{:?}", s.diagnostics);
        assert_eq!(s.placements.len(), t.objects.len());
        for (i, p) in s.placements.iter().enumerate() {
            assert_eq!(p.id as usize, i);
        }
    }

    #[test]
    fn television_rests_on_its_table() {
        let t = parse_template(SIX_ROOM).unwrap();
        let c = load_catalog(CATALOG).unwrap();
        let s = generate_scene(&t, &c, &quiet(), 11).unwrap();
        let tvs: Vec<_> = s
            .placements
            .iter()
            .filter(|p| p.asset_type == "television" && p.parent.is_some())
            .collect();
        assert_eq!(tvs.len(), 2);
        for tv in tvs {
            let host = &s.placements[tv.parent.unwrap() as usize];
            assert!((tv.bbox.bottom() - host.bbox.top()).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let t = parse_template(SIX_ROOM).unwrap();
        let c = load_catalog(CATALOG).unwrap();
        let cfg = GenConfig::default();
        let a = write_scene(&generate_scene(&t, &c, &cfg, 1).unwrap());
        let b = write_scene(&generate_scene(&t, &c, &cfg, 1).unwrap());
        let d = write_scene(&generate_scene(&t, &c, &cfg, 2).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn batch_matches_single_and_is_worker_independent() {
        let t = parse_template(SIX_ROOM).unwrap();
        let c = load_catalog(CATALOG).unwrap();
        let cfg = GenConfig::default();
        let one = generate_batch(&t, &c, &cfg, 9, 1, 1);
        assert_eq!(one[0].as_ref().unwrap(), &generate_scene(&t, &c, &cfg, split(9, 0)).unwrap());
        let serial = generate_batch(&t, &c, &cfg, 9, 12, 1);
        let parallel = generate_batch(&t, &c, &cfg, 9, 12, 4);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn hostile_catalog_skips_overlapping_chair() {
        let doc = serde_json::json!({
            "walls": [
                {"start": [0.0, 0.0], "end": [4.0, 0.0], "height": 2.5},
                {"start": [4.0, 0.0], "end": [4.0, 4.0], "height": 2.5},
                {"start": [4.0, 4.0], "end": [0.0, 4.0], "height": 2.5},
                {"start": [0.0, 4.0], "end": [0.0, 0.0], "height": 2.5}
            ],
            "objects": [
                {"category": "chair", "box": {"center": [1.5, 0.45, 2.0], "half_extents": [0.3, 0.45, 0.3], "yaw": 0.0},
                 "forward": [0.0, 1.0], "wall_mounted": false},
                {"category": "chair", "box": {"center": [2.1, 0.45, 2.0], "half_extents": [0.3, 0.45, 0.3], "yaw": 0.0},
                 "forward": [0.0, 1.0], "wall_mounted": false}
            ]
        });
        let t = parse_template(doc.to_string().as_bytes()).unwrap();
        // Every chair replacement is 0.62 wide, so the two 0.6 m apart overlap.
        let c = Catalog::new(vec![asset("wide_chair", "chair", [0.31, 0.45, 0.3])], full_map("chair")).unwrap();
        let s = generate_scene(&t, &c, &quiet(), 3).unwrap();
        assert_eq!(s.placements.len(), 1);
        assert_eq!(s.placements[0].scanned_index, Some(0));
        assert_eq!(s.diagnostics.len(), 1);
        assert_eq!(s.diagnostics[0].kind, DiagnosticKind::Collision);
    }

    #[test]
    fn no_objects_no_placements() {
        let layout = square_layout();
        let c = load_catalog(CATALOG).unwrap();
        let mut diags = vec![];
        let p = place_semantic(&layout, &[], &c, &quiet(), &mut stream_rng(0, Stream::Semantic), &mut diags);
        assert!(p.is_empty() && diags.is_empty());
    }

    fn counter_scene(surface_half: [f64; 2], small_half: f64) -> (Layout, Vec<Placement>, Catalog) {
        let layout = square_layout();
        let mut counter = asset("counter", "counter", [0.6, 0.45, 0.6]);
        counter.receptacle_surfaces = vec![ReceptacleSurface {
            center: Point2::new(0.0, 0.0),
            half_size: surface_half,
            height: 0.9,
        }];
        let mut small = asset("cube", "cube", [small_half, 0.02, small_half]);
        small.tags.is_small = true;
        let c = Catalog::new(vec![counter.clone(), small], full_map("counter")).unwrap();
        let p = Placement {
            id: 0,
            asset_id: "counter".into(),
            asset_type: "counter".into(),
            bbox: OrientedBox::resting(Point2::new(2.0, 1.5), 0.0, counter.bounding, 0.3).unwrap(),
            source: PlacementSource::Semantic,
            parent: None,
            support: None,
            room: layout.rooms[0].id.clone(),
            scanned_index: Some(0),
        };
        (layout, vec![p], c)
    }

    #[test]
    fn small_objects_fit_their_surface() {
        let (layout, parents, c) = counter_scene([0.5, 0.5], 0.05);
        let cfg = GenConfig {
            lambda_small: 6.0,
            ..GenConfig::default()
        };
        let mut diags = vec![];
        let kids = place_small(&layout, &parents, &c, &cfg, &mut stream_rng(4, Stream::Small), &mut diags);
        assert!(!kids.is_empty());
        for (k, kid) in kids.iter().enumerate() {
            assert_eq!(kid.id as usize, k + 1);
            assert_eq!(kid.parent, Some(0));
            assert!(kid.support.unwrap().holds(&kid.bbox, 1e-9));
            assert!((kid.bbox.bottom() - 0.9).abs() < 1e-12);
            for other in &kids[..k] {
                assert!(!obb_intersects(&kid.bbox, &other.bbox, cfg.clearance));
            }
        }
    }

    #[test]
    fn tiny_receptacle_gets_no_children() {
        let (layout, parents, c) = counter_scene([0.03, 0.03], 0.05);
        let cfg = GenConfig {
            lambda_small: 1e3,
            ..GenConfig::default()
        };
        let mut diags = vec![];
        let kids = place_small(&layout, &parents, &c, &cfg, &mut stream_rng(4, Stream::Small), &mut diags);
        assert!(kids.is_empty());
        assert!(diags.iter().all(|d| d.kind == DiagnosticKind::SmallRejected));
    }

    #[test]
    fn clutter_avoids_door_clearance() {
        let mut layout = square_layout();
        layout.walls.push(WallSegment {
            start: Point2::new(0.0, 0.0),
            end: Point2::new(3.0, 0.0),
            height: 2.5,
            thickness: 0.16,
        });
        layout.portals.push(crate::layout::Portal {
            kind: PortalKind::Door,
            wall_index: layout.walls.len() - 1,
            opening: crate::template::OpeningSpec {
                offset: 1.0,
                width: 0.9,
                bottom: 0.0,
                top: 2.0,
            },
            door_state: None,
            exterior: true,
            adjacent_rooms: vec![],
            asset_id: None,
        });
        let c = load_catalog(CATALOG).unwrap();
        let cfg = GenConfig {
            lambda_clutter: 3.0,
            ..GenConfig::default()
        };
        let zones = door_clearances(&layout);
        assert_eq!(zones.len(), 1);
        let mut placed = 0;
        for seed in 0..50 {
            let mut diags = vec![];
            let clutter = place_clutter(&layout, &[], &c, &cfg, &mut stream_rng(seed, Stream::Clutter), &mut diags);
            placed += clutter.len();
            for p in &clutter {
                assert!(!footprints_overlap(&p.bbox, &zones[0]));
                assert!(p.bbox.footprint().iter().all(|&q| layout.rooms[0].polygon.contains(q)));
            }
        }
        assert!(placed > 100);
    }

    #[test]
    fn full_room_gets_no_clutter() {
        let layout = square_layout();
        let c = load_catalog(CATALOG).unwrap();
        let block = Placement {
            id: 0,
            asset_id: "bed_a".into(),
            asset_type: "bed".into(),
            bbox: OrientedBox::resting(Point2::new(1.5, 2.0), 0.0, [1.5, 0.3, 2.0], 0.0).unwrap(),
            source: PlacementSource::Semantic,
            parent: None,
            support: None,
            room: layout.rooms[0].id.clone(),
            scanned_index: Some(0),
        };
        assert_eq!(free_floor_area(&layout, &layout.rooms[0].id, std::slice::from_ref(&block), 0.05), 0.0);
        let mut diags = vec![];
        let out = place_clutter(&layout, &[block], &c, &GenConfig::default(), &mut stream_rng(0, Stream::Clutter), &mut diags);
        assert!(out.is_empty());
    }

    #[test]
    fn lights_cover_rooms_and_respect_bounds() {
        let t = parse_template(SIX_ROOM).unwrap();
        let layout = build_layout(&t, &LayoutConfig::default(), &mut stream_rng(0, Stream::Layout)).unwrap();
        let cfg = LightConfig::default();
        let mut rng = stream_rng(2, Stream::Light);
        let mut total = 0;
        while total < 10_000 {
            let lights = sample_lighting(&layout, &cfg, &mut rng);
            assert!(lights.len() >= 6 && lights.len() <= 12);
            for r in &layout.rooms {
                assert!(lights.iter().any(|l| l.room == r.id));
            }
            for l in &lights {
                let room = layout.room(&l.room).unwrap();
                assert!(room.polygon.contains(Point2::new(l.position[0], l.position[2])));
                assert!(l.position[1] < room.ceiling_y);
                assert!((0.5..=2.0).contains(&l.intensity));
                assert!(l.color.iter().all(|c| (0.6..=1.0).contains(c)));
                assert!((0.0..=0.1).contains(&l.shadow_bias));
            }
            total += lights.len();
        }
        let single = sample_lighting(
            &square_layout(),
            &LightConfig {
                extra_lights_per_room: 0.0,
                ..cfg
            },
            &mut rng,
        );
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn material_palettes() {
        let layout = square_layout();
        let c = load_catalog(CATALOG).unwrap();
        let mut p = Palettes::default();
        p.structure.wall = vec![];
        let err = sample_materials(&layout, &[], &c, &p, &mut stream_rng(0, Stream::Material)).unwrap_err();
        assert_eq!(err, GenerateError::EmptyPalette("structure.wall".into()));

        let t = parse_template(SIX_ROOM).unwrap();
        let six = build_layout(&t, &LayoutConfig::default(), &mut stream_rng(0, Stream::Layout)).unwrap();
        let mut one = Palettes::default();
        one.structure = StructurePalettes {
            wall: vec!["w".into()],
            floor: vec!["f".into()],
            ceiling: vec!["c".into()],
        };
        let m = sample_materials(&six, &[], &c, &one, &mut stream_rng(0, Stream::Material)).unwrap();
        assert!(m.rooms.iter().all(|r| r.wall == "w" && r.floor == "f" && r.ceiling == "c"));
    }

    #[test]
    fn floor_palette_uniform() {
        let layout = square_layout();
        let c = load_catalog(CATALOG).unwrap();
        let p = Palettes::default();
        let mut rng = stream_rng(8, Stream::Material);
        let n = 10_000;
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            let m = sample_materials(&layout, &[], &c, &p, &mut rng).unwrap();
            *counts.entry(m.rooms[0].floor.clone()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for v in counts.values() {
            assert!((*v as f64 - n as f64 / 4.0).abs() < 3.0 * sigma);
        }
    }
}
