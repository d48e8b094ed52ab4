//! Geodesic distances on the occupancy grid.
//!
//! Path lengths are kept as `a + b·√2` cell units with integer `a`, `b`, so
//! comparisons and the reported diameter are exact.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::grid::OccupancyGrid;

/// Grids with fewer free cells than this get an exact diameter.
pub const EXACT_LIMIT: usize = 10_000;

/// Path length of `orth` orthogonal and `diag` diagonal steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StepCount {
    pub orth: u32,
    pub diag: u32,
}

impl StepCount {
    pub const ZERO: StepCount = StepCount { orth: 0, diag: 0 };

    pub fn new(orth: u32, diag: u32) -> Self {
        StepCount { orth, diag }
    }

    pub fn step(self, diagonal: bool) -> Self {
        if diagonal {
            StepCount::new(self.orth, self.diag + 1)
        } else {
            StepCount::new(self.orth + 1, self.diag)
        }
    }

    pub fn plus(self, o: StepCount) -> Self {
        StepCount::new(self.orth + o.orth, self.diag + o.diag)
    }

    /// Length in cell units.
    pub fn units(self) -> f64 {
        self.orth as f64 + self.diag as f64 * std::f64::consts::SQRT_2
    }
}

impl Ord for StepCount {
    fn cmp(&self, other: &Self) -> Ordering {
        let da = self.orth as i64 - other.orth as i64;
        let db = self.diag as i64 - other.diag as i64;
        // sign of da + db·√2
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            (1, _) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for StepCount {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths. Unreached cells are `None`.
pub fn distances_from(grid: &OccupancyGrid, source: usize) -> Vec<Option<StepCount>> {
    let mut dist: Vec<Option<StepCount>> = vec![None; grid.blocked.len()];
    if grid.blocked[source] {
        return dist;
    }
    let mut heap = BinaryHeap::new();
    dist[source] = Some(StepCount::ZERO);
    heap.push(Reverse((StepCount::ZERO, source)));
    while let Some(Reverse((d, k))) = heap.pop() {
        if dist[k].is_some_and(|best| best < d) {
            continue;
        }
        grid.for_each_step(k, |m, diagonal| {
            let nd = d.step(diagonal);
            if dist[m].is_none_or(|old| nd < old) {
                dist[m] = Some(nd);
                heap.push(Reverse((nd, m)));
            }
        });
    }
    dist
}

fn farthest(dist: &[Option<StepCount>]) -> (usize, StepCount) {
    let mut best = (usize::MAX, StepCount::ZERO);
    for (k, d) in dist.iter().enumerate() {
        if let Some(d) = d {
            if best.0 == usize::MAX || *d > best.1 {
                best = (k, *d);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongestPath {
    pub length_m: f64,
    pub steps: StepCount,
    /// Whether the value is the exact diameter or a double-sweep lower bound.
    pub exact: bool,
    pub endpoints: Option<(usize, usize)>,
}

/// Exact diameter of the component containing `cells` by eccentricity
/// bounding: each sweep from a source `v` caps every other cell's
/// eccentricity at `d(u, v) + ecc(v)`, and cells whose cap cannot beat the
/// best diameter so far are dropped. In the worst case this is one sweep per
/// cell, which is the all-pairs computation.
fn exact_component_diameter(grid: &OccupancyGrid, cells: &[usize]) -> (StepCount, (usize, usize)) {
    let n = grid.blocked.len();
    let mut upper: Vec<Option<StepCount>> = vec![None; n];
    let mut alive: Vec<usize> = cells.to_vec();
    let mut best = (StepCount::ZERO, (cells[0], cells[0]));
    let mut pick_high = true;
    // start from a double-sweep endpoint, which tends to be peripheral
    let mut next = farthest(&distances_from(grid, cells[0])).0;
    loop {
        let v = next;
        let dist = distances_from(grid, v);
        let (far, ecc) = farthest(&dist);
        if ecc > best.0 {
            best = (ecc, (v.min(far), v.max(far)));
        }
        for &u in &alive {
            let d = dist[u].expect("component cells are mutually reachable");
            let cap = d.plus(ecc);
            if upper[u].is_none_or(|old| cap < old) {
                upper[u] = Some(cap);
            }
        }
        upper[v] = Some(ecc);
        alive.retain(|&u| upper[u].is_some_and(|c| c > best.0));
        if alive.is_empty() {
            return best;
        }
        // alternate between the loosest cap and the tightest one
        next = if pick_high {
            *alive.iter().max_by(|a, b| upper[**a].cmp(&upper[**b]).then(b.cmp(a))).unwrap()
        } else {
            *alive.iter().min_by(|a, b| upper[**a].cmp(&upper[**b]).then(a.cmp(b))).unwrap()
        };
        pick_high = !pick_high;
    }
}

fn double_sweep(grid: &OccupancyGrid, start: usize) -> (StepCount, (usize, usize)) {
    let (a, _) = farthest(&distances_from(grid, start));
    let (b, d) = farthest(&distances_from(grid, a));
    (d, (a.min(b), a.max(b)))
}

/// Longest shortest path between two free cells, over all connected
/// components, in meters. Exact when the grid has fewer than `exact_limit`
/// free cells, otherwise a double-sweep lower bound per component.
pub fn longest_shortest_path_with(grid: &OccupancyGrid, exact_limit: usize) -> LongestPath {
    let (label, n) = grid.components();
    let exact = grid.free_count() < exact_limit;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, l) in label.iter().enumerate() {
        if *l != usize::MAX {
            members[*l].push(k);
        }
    }
    let mut best: Option<(StepCount, (usize, usize))> = None;
    for cells in members.iter().filter(|c| !c.is_empty()) {
        let r = if exact {
            exact_component_diameter(grid, cells)
        } else {
            double_sweep(grid, cells[0])
        };
        if best.is_none_or(|b| r.0 > b.0) {
            best = Some(r);
        }
    }
    let (steps, endpoints) = match best {
        Some((s, e)) => (s, Some(e)),
        None => (StepCount::ZERO, None),
    };
    LongestPath {
        length_m: steps.units() * grid.cell,
        steps,
        exact,
        endpoints,
    }
}

pub fn longest_shortest_path(grid: &OccupancyGrid) -> LongestPath {
    longest_shortest_path_with(grid, EXACT_LIMIT)
}
