//! Occupancy rasterization and free-space connectivity.

use serde::{Deserialize, Serialize};

use crate::geometry::{OrientedBox, Point2};
use crate::layout::PortalKind;
use crate::scene::SceneSpec;

use super::NavConfig;

/// Top-down occupancy grid. Cell `(i, j)` covers
/// `origin + [i, i+1) × cell` in x and `origin + [j, j+1) × cell` in z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Point2,
    pub cell: f64,
    pub nx: usize,
    pub nz: usize,
    /// Row-major by z, `true` where an agent centered in the cell would collide.
    pub blocked: Vec<bool>,
}

pub const NEIGHBORS: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl OccupancyGrid {
    pub fn from_cells(origin: Point2, cell: f64, nx: usize, nz: usize, blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), nx * nz, "cell count mismatch");
        OccupancyGrid {
            origin,
            cell,
            nx,
            nz,
            blocked,
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn center(&self, k: usize) -> Point2 {
        let (i, j) = self.coords(k);
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.cell,
            self.origin.z + (j as f64 + 0.5) * self.cell,
        )
    }

    /// Cell containing `p`, if it lies on the grid.
    pub fn cell_at(&self, p: Point2) -> Option<usize> {
        let fi = ((p.x - self.origin.x) / self.cell).floor();
        let fj = ((p.z - self.origin.z) / self.cell).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.nz as f64 {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }

    pub fn is_free(&self, k: usize) -> bool {
        !self.blocked[k]
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    /// Free cells reachable in one step from `k`, with step kind (`false`
    /// orthogonal, `true` diagonal). A diagonal step needs both orthogonal
    /// cells it passes free.
    pub fn for_each_step(&self, k: usize, mut f: impl FnMut(usize, bool)) {
        let (i, j) = self.coords(k);
        let (i, j) = (i as i64, j as i64);
        let free = |a: i64, b: i64| {
            a >= 0 && b >= 0 && (a as usize) < self.nx && (b as usize) < self.nz && !self.blocked[self.index(a as usize, b as usize)]
        };
        for (di, dj) in NEIGHBORS {
            let (a, b) = (i + di as i64, j + dj as i64);
            if !free(a, b) {
                continue;
            }
            let diagonal = di != 0 && dj != 0;
            if diagonal && !(free(i + di as i64, j) && free(i, j + dj as i64)) {
                continue;
            }
            f(self.index(a as usize, b as usize), diagonal);
        }
    }

    /// Component label per cell (`usize::MAX` for blocked cells) and the
    /// number of components. Labels follow cell order.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.blocked.len()];
        let mut n = 0;
        let mut stack = Vec::new();
        for s in 0..self.blocked.len() {
            if self.blocked[s] || label[s] != usize::MAX {
                continue;
            }
            label[s] = n;
            stack.push(s);
            while let Some(k) = stack.pop() {
                self.for_each_step(k, |m, _| {
                    if label[m] == usize::MAX {
                        label[m] = n;
                        stack.push(m);
                    }
                });
            }
            n += 1;
        }
        (label, n)
    }

    /// The grid rotated a quarter turn: cell `(i, j)` moves to `(nz-1-j, i)`.
    pub fn rotated(&self) -> OccupancyGrid {
        let (nx, nz) = (self.nz, self.nx);
        let mut blocked = vec![true; nx * nz];
        for j in 0..self.nz {
            for i in 0..self.nx {
                blocked[i * nx + (self.nz - 1 - j)] = self.blocked[self.index(i, j)];
            }
        }
        OccupancyGrid::from_cells(self.origin, self.cell, nx, nz, blocked)
    }
}

/// Footprints that block an agent: walls and unsupported placements whose
/// bottom is below the agent's height, plus closed doors. Surface objects and
/// anything hung higher are ignored.
pub fn obstacles(scene: &SceneSpec, cfg: &NavConfig) -> Vec<OrientedBox> {
    let mut out: Vec<OrientedBox> = scene
        .wall_solids
        .iter()
        .filter(|w| w.bottom() < cfg.agent_height)
        .copied()
        .collect();
    for p in &scene.portals {
        if p.kind != PortalKind::Door {
            continue;
        }
        let closed = p.door_state.as_ref().is_some_and(|d| d.has_leaf && d.openness <= 0.0);
        if !closed {
            continue;
        }
        if let Some(w) = scene.walls.get(p.wall_index) {
            if let Ok(b) = w.piece(p.opening.offset, p.opening.offset + p.opening.width, p.opening.bottom, p.opening.top) {
                out.push(b);
            }
        }
    }
    out.extend(
        scene
            .placements
            .iter()
            .filter(|p| p.parent.is_none() && p.bbox.bottom() < cfg.agent_height)
            .map(|p| p.bbox),
    );
    out
}

/// Rasterize `scene` for a disc agent of radius `cfg.agent_radius`. A cell is
/// blocked when its center lies outside every room or within the radius of
/// an obstacle footprint.
pub fn rasterize(scene: &SceneSpec, cfg: &NavConfig) -> OccupancyGrid {
    let cell = cfg.cell;
    let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for r in &scene.rooms {
        let (a, b) = r.polygon.bbox();
        lo = Point2::new(lo.x.min(a.x), lo.z.min(a.z));
        hi = Point2::new(hi.x.max(b.x), hi.z.max(b.z));
    }
    if scene.rooms.is_empty() {
        return OccupancyGrid::from_cells(Point2::new(0.0, 0.0), cell, 0, 0, vec![]);
    }
    let nx = ((hi.x - lo.x) / cell).ceil().max(1.0) as usize;
    let nz = ((hi.z - lo.z) / cell).ceil().max(1.0) as usize;
    let mut grid = OccupancyGrid::from_cells(lo, cell, nx, nz, vec![false; nx * nz]);

    for k in 0..nx * nz {
        let c = grid.center(k);
        grid.blocked[k] = !scene.rooms.iter().any(|r| r.polygon.contains(c));
    }
    let r = cfg.agent_radius;
    for b in obstacles(scene, cfg) {
        let fp = b.footprint();
        let min_x = fp.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - r;
        let max_x = fp.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + r;
        let min_z = fp.iter().map(|p| p.z).fold(f64::INFINITY, f64::min) - r;
        let max_z = fp.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max) + r;
        let i0 = (((min_x - lo.x) / cell).floor().max(0.0) as usize).min(nx);
        let i1 = (((max_x - lo.x) / cell).ceil().max(0.0) as usize).min(nx);
        let j0 = (((min_z - lo.z) / cell).floor().max(0.0) as usize).min(nz);
        let j1 = (((max_z - lo.z) / cell).ceil().max(0.0) as usize).min(nz);
        for j in j0..j1 {
            for i in i0..i1 {
                let k = grid.index(i, j);
                if !grid.blocked[k] && b.footprint_distance(grid.center(k)) < r {
                    grid.blocked[k] = true;
                }
            }
        }
    }
    grid
}
