//! Navigation episode specs.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedBox, Point2};
use crate::rng::SceneRng;
use crate::scene::SceneSpec;

use super::grid::OccupancyGrid;
use super::NavConfig;

/// Number of field-of-view lattice points: 48.0, 48.2, ..., 65.0 degrees.
pub const FOV_STEPS: u32 = 86;
/// Start headings are multiples of this many degrees.
pub const YAW_STEP_DEG: u32 = 30;

pub fn fov_from_index(i: u32) -> f64 {
    (480 + 2 * i) as f64 / 10.0
}

pub fn step_budget(area_m2: f64, cfg: &NavConfig) -> u32 {
    if area_m2 < cfg.area_cutoff {
        cfg.short_budget
    } else {
        cfg.long_budget
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error("no reachable placement of type `{0}`")]
    UnreachableTarget(String),
    #[error("no free cell is at least the minimum start distance from every `{0}`")]
    NoValidStart(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub scene: String,
    pub seed: u64,
    pub start: Point2,
    /// Heading in degrees, a multiple of 30.
    pub start_yaw_deg: u32,
    pub target_type: String,
    pub step_budget: u32,
    pub fov_deg: f64,
}

fn targets_of<'a>(scene: &'a SceneSpec, ty: &'a str) -> impl Iterator<Item = &'a OrientedBox> + 'a {
    scene.placements.iter().filter(move |p| p.asset_type == ty).map(|p| &p.bbox)
}

/// Components from which some instance of `ty` is within visibility range.
fn target_components(scene: &SceneSpec, grid: &OccupancyGrid, labels: &[usize], ty: &str, cfg: &NavConfig) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for b in targets_of(scene, ty) {
        for k in 0..grid.blocked.len() {
            if grid.is_free(k) && !out.contains(&labels[k]) && b.footprint_distance(grid.center(k)) <= cfg.visibility_dist {
                out.insert(labels[k]);
            }
        }
    }
    out
}

/// Free cells that may start an episode for `ty`.
fn start_cells(scene: &SceneSpec, grid: &OccupancyGrid, labels: &[usize], ty: &str, cfg: &NavConfig) -> Result<Vec<usize>, EpisodeError> {
    let comps = target_components(scene, grid, labels, ty, cfg);
    if comps.is_empty() {
        return Err(EpisodeError::UnreachableTarget(ty.to_string()));
    }
    let boxes: Vec<&OrientedBox> = targets_of(scene, ty).collect();
    let cells: Vec<usize> = (0..grid.blocked.len())
        .filter(|&k| grid.is_free(k) && comps.contains(&labels[k]))
        .filter(|&k| {
            let c = grid.center(k);
            boxes.iter().all(|b| b.footprint_distance(c) >= cfg.min_start_dist)
        })
        .collect();
    if cells.is_empty() {
        return Err(EpisodeError::NoValidStart(ty.to_string()));
    }
    Ok(cells)
}

/// `per_target` episodes for each target type. Starts are distinct cells
/// drawn uniformly from those in a component that can see the target and at
/// least `min_start_dist` from every instance of it.
pub fn sample_episodes(
    scene: &SceneSpec,
    scene_ref: &str,
    grid: &OccupancyGrid,
    cfg: &NavConfig,
    targets: &[String],
    per_target: usize,
    rng: &mut SceneRng,
) -> Result<Vec<EpisodeSpec>, EpisodeError> {
    let (labels, _) = grid.components();
    let budget = step_budget(scene.area(), cfg);
    let mut out = Vec::with_capacity(targets.len() * per_target);
    for ty in targets {
        let cells = start_cells(scene, grid, &labels, ty, cfg)?;
        let picks: Vec<usize> = if per_target <= cells.len() {
            index::sample(rng, cells.len(), per_target).into_vec()
        } else {
            (0..per_target).map(|_| rng.random_range(0..cells.len())).collect()
        };
        for i in picks {
            out.push(EpisodeSpec {
                scene: scene_ref.to_string(),
                seed: scene.seed,
                start: grid.center(cells[i]),
                start_yaw_deg: YAW_STEP_DEG * rng.random_range(0..360 / YAW_STEP_DEG),
                target_type: ty.clone(),
                step_budget: budget,
                fov_deg: fov_from_index(rng.random_range(0..FOV_STEPS)),
            });
        }
    }
    Ok(out)
}

/// Pick `n` distinct target types present in the scene that admit
/// episodes, restricted to `allowed` when given. Fewer are returned when the
/// scene does not have enough.
pub fn choose_targets(
    scene: &SceneSpec,
    grid: &OccupancyGrid,
    cfg: &NavConfig,
    allowed: Option<&BTreeSet<String>>,
    n: usize,
    rng: &mut SceneRng,
) -> Vec<String> {
    let (labels, _) = grid.components();
    let types: BTreeSet<&str> = scene.placements.iter().map(|p| p.asset_type.as_str()).collect();
    let usable: Vec<String> = types
        .into_iter()
        .filter(|t| allowed.is_none_or(|a| a.contains(*t)))
        .filter(|t| start_cells(scene, grid, &labels, t, cfg).is_ok())
        .map(str::to_string)
        .collect();
    let k = n.min(usable.len());
    let mut picked: Vec<usize> = index::sample(rng, usable.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| usable[i].clone()).collect()
}

/// Problems with an episode against its scene, empty when it is sound.
pub fn check_episode(ep: &EpisodeSpec, scene: &SceneSpec, grid: &OccupancyGrid, cfg: &NavConfig) -> Vec<String> {
    let mut out = Vec::new();
    let (labels, _) = grid.components();
    let Some(k) = grid.cell_at(ep.start).filter(|&k| grid.is_free(k)) else {
        out.push("start is not on a free cell".to_string());
        return out;
    };
    let comps = target_components(scene, grid, &labels, &ep.target_type, cfg);
    if !comps.contains(&labels[k]) {
        out.push("no target is reachable from the start".to_string());
    }
    if targets_of(scene, &ep.target_type).any(|b| b.footprint_distance(ep.start) < cfg.min_start_dist) {
        out.push("start is too close to a target".to_string());
    }
    if ep.step_budget != step_budget(scene.area(), cfg) {
        out.push(format!("budget {} does not follow the area cutoff", ep.step_budget));
    }
    if ep.start_yaw_deg % YAW_STEP_DEG != 0 || ep.start_yaw_deg >= 360 {
        out.push(format!("start heading {} is off the 30° lattice", ep.start_yaw_deg));
    }
    let i = ((ep.fov_deg * 10.0 - 480.0) / 2.0).round();
    if !((0.0..FOV_STEPS as f64).contains(&i) && fov_from_index(i as u32) == ep.fov_deg) {
        out.push(format!("fov {} is off the lattice", ep.fov_deg));
    }
    out
}
