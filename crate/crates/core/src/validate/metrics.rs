use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{PlacementSource, SceneSpec};
use crate::template::EnvironmentTemplate;

use super::grid::OccupancyGrid;
use super::paths::longest_shortest_path_with;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("scene template digest {scene} does not match template digest {template}")]
    DigestMismatch { scene: String, template: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub area_m2: f64,
    /// Free-space geodesic diameter.
    pub longest_path_m: f64,
    pub longest_path_exact: bool,
    pub n_rooms: usize,
    pub n_objects: usize,
    pub n_scanned_objects: usize,
}

/// Area, geodesic diameter and counts for one scene. When a template is
/// given it must be the one the scene was generated from.
pub fn scene_metrics(
    scene: &SceneSpec,
    template: Option<&EnvironmentTemplate>,
    grid: &OccupancyGrid,
    exact_limit: usize,
) -> Result<SceneMetrics, MetricsError> {
    if let Some(t) = template {
        let digest = t.digest();
        if digest != scene.template_digest {
            return Err(MetricsError::DigestMismatch {
                scene: scene.template_digest.clone(),
                template: digest,
            });
        }
    }
    let path = longest_shortest_path_with(grid, exact_limit);
    Ok(SceneMetrics {
        area_m2: scene.area(),
        longest_path_m: path.length_m,
        longest_path_exact: path.exact,
        n_rooms: scene.rooms.len(),
        n_objects: scene.placements.len(),
        n_scanned_objects: scene.count(PlacementSource::Semantic),
    })
}

const HEADER: [&str; 6] = ["Environment", "Area (m²)", "Longest Path (m)", "# Rooms", "# Objects", "# Scanned Objects"];

/// Aligned plain-text table, one row per named scene. Approximate path
/// lengths are marked with `~`.
pub fn render_metrics_table(rows: &[(String, SceneMetrics)]) -> String {
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|(name, m)| {
            [
                name.clone(),
                format!("{:.1}", m.area_m2),
                format!("{}{:.1}", if m.longest_path_exact { "" } else { "~" }, m.longest_path_m),
                m.n_rooms.to_string(),
                m.n_objects.to_string(),
                m.n_scanned_objects.to_string(),
            ]
        })
        .collect();
    let mut width = HEADER.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: [&str; 6]| {
        let mut s = String::new();
        for (k, c) in row.iter().enumerate() {
            let pad = width[k] - c.chars().count();
            if k == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(HEADER);
    let total: usize = width.iter().sum::<usize>() + 2 * (width.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in &cells {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3], &row[4], &row[5]]));
    }
    out
}
