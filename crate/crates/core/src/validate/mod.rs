//! Scene checking and navigability analysis: invariants, occupancy grids,
//! geodesic diameter, environment metrics, episode sampling and previews.

mod episodes;
mod grid;
mod invariants;
mod metrics;
mod paths;
mod preview;

use serde::{Deserialize, Serialize};

pub use episodes::{
    check_episode, choose_targets, fov_from_index, sample_episodes, step_budget, EpisodeError, EpisodeSpec,
    FOV_STEPS,
};
pub use grid::{obstacles, rasterize, OccupancyGrid};
pub use invariants::*;
pub use metrics::{render_metrics_table, scene_metrics, MetricsError, SceneMetrics};
pub use paths::{distances_from, longest_shortest_path, longest_shortest_path_with, LongestPath, StepCount, EXACT_LIMIT};
pub use preview::render_preview;

/// Agent and episode parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    pub agent_radius: f64,
    /// Obstacles whose bottom is at or above this height do not block.
    pub agent_height: f64,
    pub cell: f64,
    /// Free-cell count below which the longest path is computed exactly.
    pub exact_limit: usize,
    /// Scenes smaller than this (m²) get the short step budget.
    pub area_cutoff: f64,
    pub short_budget: u32,
    pub long_budget: u32,
    /// Minimum distance from a start to every instance of the target type.
    pub min_start_dist: f64,
    /// A target counts as reachable if a free cell lies within this distance.
    pub visibility_dist: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        NavConfig {
            agent_radius: 0.2,
            agent_height: 0.6,
            cell: 0.05,
            exact_limit: EXACT_LIMIT,
            area_cutoff: 70.0,
            short_budget: 250,
            long_budget: 500,
            min_start_dist: 1.0,
            visibility_dist: 1.0,
        }
    }
}
