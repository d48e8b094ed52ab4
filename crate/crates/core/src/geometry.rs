//! Geometric primitives: upright oriented boxes, simple polygons and planar
//! face extraction from wall centerlines.
//!
//! World frame is right-handed with `y` up. Top-down quantities live in the
//! `(x, z)` plane and are carried by [`Point2`]. A yaw `θ` rotates the box's
//! local `x` axis onto `(cos θ, sin θ)` and its local `z` axis onto
//! `(-sin θ, cos θ)` in that plane.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

/// A point (or vector) in the top-down `(x, z)` plane. Serialized as `[x, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2 { x: v[0], z: v[1] }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.z]
    }
}

impl Point2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Point2 { x, z }
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.z + o.z)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.z * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

/// Wrap an angle into `[-π, π)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = (yaw + PI).rem_euclid(two_pi) - PI;
    if y >= PI {
        y -= two_pi;
    }
    if y < -PI {
        y = -PI;
    }
    y
}

/// Yaw that turns the local `+z` axis onto `forward`.
pub fn yaw_from_forward(forward: Point2) -> f64 {
    normalize_yaw((-forward.x).atan2(forward.z))
}

/// Unit forward direction (local `+z`) of a box with the given yaw.
pub fn forward_from_yaw(yaw: f64) -> Point2 {
    Point2::new(-yaw.sin(), yaw.cos())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    center: [f64; 3],
    half_extents: [f64; 3],
    yaw: f64,
}

/// Yaw-rotated 3D box. Half extents are ordered `(x, y, z)` in the box frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct OrientedBox {
    center: [f64; 3],
    half_extents: [f64; 3],
    yaw: f64,
}

impl TryFrom<RawBox> for OrientedBox {
    type Error = GeometryError;

    fn try_from(r: RawBox) -> Result<Self, Self::Error> {
        OrientedBox::new(r.center, r.half_extents, r.yaw)
    }
}

impl From<OrientedBox> for RawBox {
    fn from(b: OrientedBox) -> Self {
        RawBox {
            center: b.center,
            half_extents: b.half_extents,
            yaw: b.yaw,
        }
    }
}

impl OrientedBox {
    pub fn new(center: [f64; 3], half_extents: [f64; 3], yaw: f64) -> Result<Self, GeometryError> {
        if center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidBox("center must be finite".into()));
        }
        if half_extents.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(GeometryError::InvalidBox(
                "half_extents must all be positive".into(),
            ));
        }
        if !yaw.is_finite() {
            return Err(GeometryError::InvalidBox("yaw must be finite".into()));
        }
        Ok(OrientedBox {
            center,
            half_extents,
            yaw: normalize_yaw(yaw),
        })
    }

    /// Box resting with its bottom face at `bottom`.
    pub fn resting(
        xz: Point2,
        bottom: f64,
        half_extents: [f64; 3],
        yaw: f64,
    ) -> Result<Self, GeometryError> {
        OrientedBox::new([xz.x, bottom + half_extents[1], xz.z], half_extents, yaw)
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn half_extents(&self) -> [f64; 3] {
        self.half_extents
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn center_xz(&self) -> Point2 {
        Point2::new(self.center[0], self.center[2])
    }

    pub fn bottom(&self) -> f64 {
        self.center[1] - self.half_extents[1]
    }

    pub fn top(&self) -> f64 {
        self.center[1] + self.half_extents[1]
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents[0] * self.half_extents[1] * self.half_extents[2]
    }

    pub fn footprint_area(&self) -> f64 {
        4.0 * self.half_extents[0] * self.half_extents[2]
    }

    /// Local `x` and `z` axes in the top-down plane.
    pub fn axes(&self) -> (Point2, Point2) {
        let (s, c) = self.yaw.sin_cos();
        (Point2::new(c, s), Point2::new(-s, c))
    }

    /// Footprint corners, counter-clockwise.
    pub fn footprint(&self) -> [Point2; 4] {
        let (u, v) = self.axes();
        let c = self.center_xz();
        let hu = u.scale(self.half_extents[0]);
        let hv = v.scale(self.half_extents[2]);
        [
            c.sub(hu).sub(hv),
            c.add(hu).sub(hv),
            c.add(hu).add(hv),
            c.sub(hu).add(hv),
        ]
    }

    /// Express a world point in the box's footprint frame.
    pub fn to_local(&self, p: Point2) -> Point2 {
        let (u, v) = self.axes();
        let d = p.sub(self.center_xz());
        Point2::new(d.dot(u), d.dot(v))
    }

    /// Map a footprint-frame point back to the world.
    pub fn to_world(&self, local: Point2) -> Point2 {
        let (u, v) = self.axes();
        self.center_xz().add(u.scale(local.x)).add(v.scale(local.z))
    }

    /// Euclidean distance from `p` to the footprint rectangle (0 inside).
    pub fn footprint_distance(&self, p: Point2) -> f64 {
        let q = self.to_local(p);
        let dx = (q.x.abs() - self.half_extents[0]).max(0.0);
        let dz = (q.z.abs() - self.half_extents[2]).max(0.0);
        dx.hypot(dz)
    }

    /// Whether a 3D point lies in the closed box.
    pub fn contains_point(&self, p: [f64; 3]) -> bool {
        let q = self.to_local(Point2::new(p[0], p[2]));
        q.x.abs() <= self.half_extents[0]
            && q.z.abs() <= self.half_extents[2]
            && (p[1] - self.center[1]).abs() <= self.half_extents[1]
    }

    /// Grow every half extent by `d` (`d >= 0`).
    pub fn inflated(&self, d: f64) -> OrientedBox {
        OrientedBox {
            center: self.center,
            half_extents: [
                self.half_extents[0] + d,
                self.half_extents[1] + d,
                self.half_extents[2] + d,
            ],
            yaw: self.yaw,
        }
    }

    /// Same box with a rigid transform applied: yaw rotation `rot` about the
    /// world origin followed by translation `t`.
    pub fn transformed(&self, rot: f64, t: [f64; 3]) -> OrientedBox {
        let (s, c) = rot.sin_cos();
        let [x, y, z] = self.center;
        OrientedBox {
            center: [c * x - s * z + t[0], y + t[1], s * x + c * z + t[2]],
            half_extents: self.half_extents,
            yaw: normalize_yaw(self.yaw + rot),
        }
    }

    fn sort_key(&self) -> [f64; 7] {
        [
            self.center[0],
            self.center[1],
            self.center[2],
            self.half_extents[0],
            self.half_extents[1],
            self.half_extents[2],
            self.yaw,
        ]
    }
}

fn canonical_pair<'a>(a: &'a OrientedBox, b: &'a OrientedBox) -> (&'a OrientedBox, &'a OrientedBox) {
    let (ka, kb) = (a.sort_key(), b.sort_key());
    for (x, y) in ka.iter().zip(kb.iter()) {
        match x.total_cmp(y) {
            Ordering::Less => return (a, b),
            Ordering::Greater => return (b, a),
            Ordering::Equal => {}
        }
    }
    (a, b)
}

fn vertical_overlap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    (a.top().min(b.top()) - a.bottom().max(b.bottom())).max(0.0)
}

/// Area of the intersection of two upright box footprints.
pub fn footprint_intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (a, b) = canonical_pair(a, b);
    let clipped = clip_convex(&a.footprint(), &b.footprint());
    signed_area(&clipped).max(0.0)
}

/// Volume intersection-over-union of two upright boxes.
pub fn obb_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let dy = vertical_overlap(a, b);
    if dy <= 0.0 {
        return 0.0;
    }
    let inter = footprint_intersection_area(a, b) * dy;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Top-down (footprint) intersection-over-union; reported for diagnostics.
pub fn footprint_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = footprint_intersection_area(a, b);
    let union = a.footprint_area() + b.footprint_area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn project(corners: &[Point2; 4], axis: Point2) -> (f64, f64) {
    corners
        .iter()
        .map(|c| c.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        })
}

/// Whether two upright boxes, each grown by `clearance / 2`, overlap.
///
/// Contact on the closed boundary does not count as overlap.
pub fn obb_intersects(a: &OrientedBox, b: &OrientedBox, clearance: f64) -> bool {
    let pad = (clearance * 0.5).max(0.0);
    let (a, b) = canonical_pair(a, b);
    let (a, b) = (a.inflated(pad), b.inflated(pad));
    if a.top() <= b.bottom() || b.top() <= a.bottom() {
        return false;
    }
    footprints_overlap(&a, &b)
}

/// Separating-axis test on the footprints alone; touching is not overlap.
pub fn footprints_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let (a, b) = canonical_pair(a, b);
    let (ca, cb) = (a.footprint(), b.footprint());
    let (au, av) = a.axes();
    let (bu, bv) = b.axes();
    for axis in [au, av, bu, bv] {
        let (min_a, max_a) = project(&ca, axis);
        let (min_b, max_b) = project(&cb, axis);
        if max_a <= min_b || max_b <= min_a {
            return false;
        }
    }
    true
}

/// Shoelace signed area; positive for counter-clockwise rings.
pub fn signed_area(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        s += p.cross(q);
    }
    0.5 * s
}

/// Sutherland-Hodgman clip of `subject` by the convex CCW ring `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b.sub(a);
        let inside = |p: Point2| edge.cross(p.sub(a)) >= 0.0;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (cin, pin) = (inside(cur), inside(prev));
            if cin {
                if !pin {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if pin {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn line_intersection(p: Point2, q: Point2, a: Point2, b: Point2) -> Point2 {
    let r = q.sub(p);
    let s = b.sub(a);
    let denom = r.cross(s);
    if denom.abs() < 1e-300 {
        return p;
    }
    let t = a.sub(p).cross(s) / denom;
    p.add(r.scale(t))
}

/// Distance from `p` to the segment `a..b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

const BOUNDARY_EPS: f64 = 1e-9;

/// Simple counter-clockwise polygon. Serialized as a list of `[x, z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct Polygon2D {
    vertices: Vec<Point2>,
}

impl TryFrom<Vec<Point2>> for Polygon2D {
    type Error = GeometryError;

    fn try_from(v: Vec<Point2>) -> Result<Self, Self::Error> {
        Polygon2D::new(v)
    }
}

impl From<Polygon2D> for Vec<Point2> {
    fn from(p: Polygon2D) -> Self {
        p.vertices
    }
}

impl Polygon2D {
    /// Validate `vertices` as a simple CCW ring.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::InvalidPolygon("non-finite vertex".into()));
        }
        if signed_area(&vertices) <= 0.0 {
            return Err(GeometryError::InvalidPolygon(
                "ring must be counter-clockwise with positive area".into(),
            ));
        }
        if !is_simple_ring(&vertices) {
            return Err(GeometryError::InvalidPolygon("ring self-intersects".into()));
        }
        Ok(Polygon2D { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] × [z0, z1]`.
    pub fn rect(x0: f64, z0: f64, x1: f64, z1: f64) -> Result<Self, GeometryError> {
        Polygon2D::new(vec![
            Point2::new(x0, z0),
            Point2::new(x1, z0),
            Point2::new(x1, z1),
            Point2::new(x0, z1),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn centroid(&self) -> Point2 {
        let a = self.area();
        let (mut cx, mut cz) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cz += (p.z + q.z) * w;
        }
        Point2::new(cx / (6.0 * a), cz / (6.0 * a))
    }

    /// `(min, max)` corners of the bounding rectangle.
    pub fn bbox(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = Point2::new(lo.x.min(p.x), lo.z.min(p.z));
            hi = Point2::new(hi.x.max(p.x), hi.z.max(p.z));
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(p, self)
    }

    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// A point just inside the ring, next to the midpoint of its longest edge.
    pub fn interior_point(&self) -> Point2 {
        let (lo, hi) = self.bbox();
        let span = (hi.x - lo.x).min(hi.z - lo.z);
        self.interior_probe(1e-3 * span)
    }

    /// A point strictly inside the ring, `offset` away from its longest edge.
    fn interior_probe(&self, offset: f64) -> Point2 {
        let (a, b) = self
            .edges()
            .max_by(|x, y| x.0.dist(x.1).total_cmp(&y.0.dist(y.1)))
            .expect("polygon has edges");
        let d = b.sub(a);
        let len = d.norm();
        let left = Point2::new(-d.z / len, d.x / len);
        a.add(d.scale(0.5)).add(left.scale(offset))
    }
}

fn crossing_parity(p: Point2, ring: &[Point2]) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.z > p.z) != (b.z > p.z) {
            let x = a.x + (p.z - a.z) * (b.x - a.x) / (b.z - a.z);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Even-odd membership test. Points on the boundary (within 1e-9 m) count as
/// inside.
pub fn point_in_polygon(p: Point2, poly: &Polygon2D) -> bool {
    if poly.boundary_distance(p) <= BOUNDARY_EPS {
        return true;
    }
    crossing_parity(p, &poly.vertices)
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| q.sub(p).cross(r.sub(p));
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.z >= p.z.min(q.z)
            && r.z <= p.z.max(q.z)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// Whether a closed ring is simple: non-adjacent edges never touch and no
/// vertex repeats.
pub fn is_simple_ring(ring: &[Point2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if ring[i] == ring[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Ear-clipping triangulation of a simple CCW ring.
pub fn triangulate(poly: &Polygon2D) -> Vec<[Point2; 3]> {
    let v = poly.vertices();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let mut out = Vec::with_capacity(v.len().saturating_sub(2));
    while idx.len() > 3 {
        let n = idx.len();
        let ear = (0..n).find(|&i| {
            let (a, b, c) = (v[idx[(i + n - 1) % n]], v[idx[i]], v[idx[(i + 1) % n]]);
            if b.sub(a).cross(c.sub(b)) <= 0.0 {
                return false;
            }
            idx.iter().all(|&k| {
                let p = v[k];
                if p == a || p == b || p == c {
                    return true;
                }
                !(b.sub(a).cross(p.sub(a)) >= 0.0 && c.sub(b).cross(p.sub(b)) >= 0.0 && a.sub(c).cross(p.sub(c)) >= 0.0)
            })
        });
        // A simple ring always has an ear; the fallback only guards against
        // rounding on nearly collinear input.
        let i = ear.unwrap_or(0);
        out.push([v[idx[(i + n - 1) % n]], v[idx[i]], v[idx[(i + 1) % n]]]);
        idx.remove(i);
    }
    out.push([v[idx[0]], v[idx[1]], v[idx[2]]]);
    out
}

/// Area of the intersection of two simple polygons.
pub fn polygon_intersection_area(a: &Polygon2D, b: &Polygon2D) -> f64 {
    let (alo, ahi) = a.bbox();
    let (blo, bhi) = b.bbox();
    if alo.x >= bhi.x || blo.x >= ahi.x || alo.z >= bhi.z || blo.z >= ahi.z {
        return 0.0;
    }
    let tb = triangulate(b);
    triangulate(a)
        .iter()
        .map(|ta| {
            tb.iter()
                .map(|t| signed_area(&clip_convex(ta, t)).max(0.0))
                .sum::<f64>()
        })
        .sum()
}

/// Monotone-chain convex hull, counter-clockwise.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.z.total_cmp(&b.z)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && lower[lower.len() - 1]
                .sub(lower[lower.len() - 2])
                .cross(p.sub(lower[lower.len() - 2]))
                <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && upper[upper.len() - 1]
                .sub(upper[upper.len() - 2])
                .cross(p.sub(upper[upper.len() - 2]))
                <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// A 2D line segment in the top-down plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment2 {
    pub a: Point2,
    pub b: Point2,
}

impl Segment2 {
    pub fn new(a: Point2, b: Point2) -> Self {
        Segment2 { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
}

/// Registry of planar-graph vertices that merges points closer than `tol`.
struct VertexSet {
    pts: Vec<Point2>,
    tol: f64,
}

impl VertexSet {
    fn find_or_insert(&mut self, p: Point2) -> usize {
        if let Some(i) = self.pts.iter().position(|q| q.dist(p) <= self.tol) {
            return i;
        }
        self.pts.push(p);
        self.pts.len() - 1
    }
}

fn snap_endpoints(segments: &[Segment2], tol: f64) -> (Vec<Point2>, Vec<(usize, usize)>) {
    let ends: Vec<Point2> = segments.iter().flat_map(|s| [s.a, s.b]).collect();
    let mut parent: Vec<usize> = (0..ends.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..ends.len() {
        for j in (i + 1)..ends.len() {
            if ends[i].dist(ends[j]) <= tol {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut cluster_of: HashMap<usize, usize> = HashMap::new();
    let mut sums: Vec<(Point2, f64)> = Vec::new();
    let mut vid = vec![0usize; ends.len()];
    for (i, slot) in vid.iter_mut().enumerate() {
        let r = root(&mut parent, i);
        let c = *cluster_of.entry(r).or_insert_with(|| {
            sums.push((Point2::default(), 0.0));
            sums.len() - 1
        });
        sums[c].0 = sums[c].0.add(ends[i]);
        sums[c].1 += 1.0;
        *slot = c;
    }
    let verts = sums.into_iter().map(|(s, n)| s.scale(1.0 / n)).collect();
    let segs = (0..segments.len()).map(|i| (vid[2 * i], vid[2 * i + 1])).collect();
    (verts, segs)
}

/// Undirected planar graph with angularly sorted adjacency.
struct PlanarGraph {
    pts: Vec<Point2>,
    adj: Vec<Vec<usize>>,
}

impl PlanarGraph {
    fn from_edges(pts: Vec<Point2>, edges: &BTreeSet<(usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); pts.len()];
        for &(u, v) in edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        PlanarGraph { pts, adj }
    }

    fn remove_edge(&mut self, u: usize, v: usize) {
        self.adj[u].retain(|&w| w != v);
        self.adj[v].retain(|&w| w != u);
    }

    /// Strip vertices of degree one until none remain.
    fn prune_dangling(&mut self) {
        let mut stack: Vec<usize> = (0..self.pts.len()).filter(|&v| self.adj[v].len() == 1).collect();
        while let Some(v) = stack.pop() {
            if self.adj[v].len() != 1 {
                continue;
            }
            let u = self.adj[v][0];
            self.remove_edge(u, v);
            if self.adj[u].len() == 1 {
                stack.push(u);
            }
        }
    }

    /// Edges whose removal disconnects their component (iterative Tarjan).
    fn bridges(&self) -> Vec<(usize, usize)> {
        let n = self.pts.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut out = Vec::new();
        let mut timer = 0;
        for s in 0..n {
            if disc[s] != usize::MAX || self.adj[s].is_empty() {
                continue;
            }
            // (vertex, parent, next neighbour index)
            let mut stack: Vec<(usize, usize, usize)> = vec![(s, usize::MAX, 0)];
            disc[s] = timer;
            low[s] = timer;
            timer += 1;
            while let Some(&mut (v, p, ref mut k)) = stack.last_mut() {
                if *k < self.adj[v].len() {
                    let w = self.adj[v][*k];
                    *k += 1;
                    if w == p {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, v, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if p != usize::MAX {
                        low[p] = low[p].min(low[v]);
                        if low[v] > disc[p] {
                            out.push((p, v));
                        }
                    }
                }
            }
        }
        out
    }

    fn sort_adjacency(&mut self) {
        for v in 0..self.pts.len() {
            let o = self.pts[v];
            let pts = &self.pts;
            self.adj[v].sort_by(|&a, &b| {
                let da = pts[a].sub(o);
                let db = pts[b].sub(o);
                da.z.atan2(da.x).total_cmp(&db.z.atan2(db.x))
            });
        }
    }

    /// Trace every face boundary keeping the face on the left of each
    /// half-edge. Returns vertex-id walks.
    fn face_walks(&self) -> Vec<Vec<usize>> {
        let mut visited: Vec<Vec<bool>> = self.adj.iter().map(|a| vec![false; a.len()]).collect();
        let mut walks = Vec::new();
        for u0 in 0..self.pts.len() {
            for k0 in 0..self.adj[u0].len() {
                if visited[u0][k0] {
                    continue;
                }
                let mut walk = Vec::new();
                let (mut u, mut k) = (u0, k0);
                loop {
                    visited[u][k] = true;
                    walk.push(u);
                    let v = self.adj[u][k];
                    let deg = self.adj[v].len();
                    let back = self.adj[v]
                        .iter()
                        .position(|&w| w == u)
                        .expect("undirected adjacency");
                    let next = (back + deg - 1) % deg;
                    u = v;
                    k = next;
                    if u == u0 && k == k0 {
                        break;
                    }
                }
                walks.push(walk);
            }
        }
        walks
    }
}

/// Split a closed walk that revisits vertices into simple cycles.
fn split_simple_cycles(walk: &[usize]) -> Vec<Vec<usize>> {
    let mut cycles = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for &v in walk {
        if let Some(pos) = stack.iter().position(|&w| w == v) {
            let cycle: Vec<usize> = stack.drain(pos..).collect();
            if cycle.len() >= 3 {
                cycles.push(cycle);
            }
        }
        stack.push(v);
    }
    if stack.len() >= 3 {
        cycles.push(stack);
    }
    cycles
}

fn drop_collinear(ring: Vec<Point2>) -> Vec<Point2> {
    let mut ring = ring;
    loop {
        let n = ring.len();
        if n < 3 {
            return ring;
        }
        let scale = ring
            .iter()
            .map(|p| p.x.abs().max(p.z.abs()))
            .fold(1.0, f64::max);
        let idx = (0..n).find(|&i| {
            let a = ring[(i + n - 1) % n];
            let b = ring[i];
            let c = ring[(i + 1) % n];
            let cross = b.sub(a).cross(c.sub(b));
            cross.abs() <= 1e-12 * scale * scale && b.sub(a).dot(c.sub(b)) > 0.0
        });
        match idx {
            Some(i) => {
                ring.remove(i);
            }
            None => return ring,
        }
    }
}

fn rotate_to_min(ring: &mut [Point2]) {
    let start = (0..ring.len())
        .min_by(|&i, &j| {
            ring[i]
                .x
                .total_cmp(&ring[j].x)
                .then(ring[i].z.total_cmp(&ring[j].z))
        })
        .unwrap_or(0);
    ring.rotate_left(start);
}

/// Bounded faces of the planar subdivision induced by `segments`.
///
/// Endpoints closer than `snap_tol` are merged, endpoints within `snap_tol`
/// of another segment split it (T-junctions), and proper crossings split both
/// segments. Edges that bound no face (dangling chains, bridges) are dropped.
/// Faces nested inside another face without a shared wall are dropped; the
/// enclosing face is reported by its outer boundary. Output is sorted by
/// centroid and every ring starts at its lexicographically smallest vertex.
pub fn extract_faces(segments: &[Segment2], snap_tol: f64) -> Result<Vec<Polygon2D>, GeometryError> {
    if segments.is_empty() {
        return Err(GeometryError::DegenerateInput("no segments".into()));
    }
    if segments.iter().any(|s| !(s.a.is_finite() && s.b.is_finite())) {
        return Err(GeometryError::DegenerateInput("non-finite coordinate".into()));
    }
    let tol = snap_tol.max(0.0);
    let (pts, raw) = snap_endpoints(segments, tol);
    let mut seg_ids: Vec<(usize, usize)> = Vec::new();
    {
        let mut seen = BTreeSet::new();
        for (u, v) in raw {
            if u != v && seen.insert((u.min(v), u.max(v))) {
                seg_ids.push((u, v));
            }
        }
    }
    if seg_ids.is_empty() {
        return Err(GeometryError::DegenerateInput(
            "all segments collapse under snapping".into(),
        ));
    }
    if all_collinear(&pts, &seg_ids) {
        return Err(GeometryError::DegenerateInput("all segments are collinear".into()));
    }

    let mut verts = VertexSet { pts, tol };
    let mut splits: Vec<Vec<(f64, usize)>> = seg_ids
        .iter()
        .map(|&(u, v)| vec![(0.0, u), (1.0, v)])
        .collect();

    // T-junctions: existing vertices touching a segment interior. A vertex
    // that snaps onto a segment is first moved onto it.
    let base_count = verts.pts.len();
    for w in 0..base_count {
        let p = verts.pts[w];
        let host = seg_ids.iter().find_map(|&(u, v)| {
            if w == u || w == v {
                return None;
            }
            let (a, b) = (verts.pts[u], verts.pts[v]);
            let ab = b.sub(a);
            let t = p.sub(a).dot(ab) / ab.dot(ab);
            (t > 0.0 && t < 1.0 && point_segment_distance(p, a, b) <= tol).then(|| a.add(ab.scale(t)))
        });
        if let Some(q) = host {
            verts.pts[w] = q;
        }
    }
    for (si, &(u, v)) in seg_ids.iter().enumerate() {
        let (a, b) = (verts.pts[u], verts.pts[v]);
        let ab = b.sub(a);
        let len2 = ab.dot(ab);
        for w in 0..base_count {
            if w == u || w == v {
                continue;
            }
            let p = verts.pts[w];
            let t = p.sub(a).dot(ab) / len2;
            if t > 0.0 && t < 1.0 && point_segment_distance(p, a, b) <= tol {
                splits[si].push((t, w));
            }
        }
    }

    // Proper crossings.
    for i in 0..seg_ids.len() {
        for j in (i + 1)..seg_ids.len() {
            let (a, b) = (verts.pts[seg_ids[i].0], verts.pts[seg_ids[i].1]);
            let (c, d) = (verts.pts[seg_ids[j].0], verts.pts[seg_ids[j].1]);
            let r = b.sub(a);
            let s = d.sub(c);
            let denom = r.cross(s);
            if denom.abs() <= 1e-12 * r.norm() * s.norm() {
                continue;
            }
            let t = c.sub(a).cross(s) / denom;
            let uu = c.sub(a).cross(r) / denom;
            if t > 0.0 && t < 1.0 && uu > 0.0 && uu < 1.0 {
                let p = a.add(r.scale(t));
                let w = verts.find_or_insert(p);
                splits[i].push((t, w));
                splits[j].push((uu, w));
            }
        }
    }

    let mut edges = BTreeSet::new();
    for list in &mut splits {
        list.sort_by(|x, y| x.0.total_cmp(&y.0));
        list.dedup_by_key(|e| e.1);
        for pair in list.windows(2) {
            let (u, v) = (pair[0].1, pair[1].1);
            if u != v {
                edges.insert((u.min(v), u.max(v)));
            }
        }
    }

    let mut graph = PlanarGraph::from_edges(verts.pts, &edges);
    graph.prune_dangling();
    for (u, v) in graph.bridges() {
        graph.remove_edge(u, v);
    }
    graph.prune_dangling();
    graph.sort_adjacency();

    let mut faces: Vec<Polygon2D> = Vec::new();
    for walk in graph.face_walks() {
        for cycle in split_simple_cycles(&walk) {
            let ring: Vec<Point2> = cycle.iter().map(|&v| graph.pts[v]).collect();
            if signed_area(&ring) <= 1e-9 {
                continue;
            }
            let mut ring = drop_collinear(ring);
            rotate_to_min(&mut ring);
            if let Ok(poly) = Polygon2D::new(ring) {
                faces.push(poly);
            }
        }
    }

    let probes: Vec<Point2> = faces
        .iter()
        .map(|f| {
            let (lo, hi) = f.bbox();
            f.interior_probe(1e-7 * (1.0 + lo.dist(hi)))
        })
        .collect();
    let nested: Vec<bool> = (0..faces.len())
        .map(|g| {
            (0..faces.len()).any(|f| {
                f != g
                    && faces[f].area() > faces[g].area()
                    && crossing_parity(probes[g], &faces[f].vertices)
            })
        })
        .collect();
    let mut faces: Vec<Polygon2D> = faces
        .into_iter()
        .zip(nested)
        .filter_map(|(f, n)| (!n).then_some(f))
        .collect();
    faces.sort_by(|a, b| {
        let (ca, cb) = (a.centroid(), b.centroid());
        ca.x.total_cmp(&cb.x).then(ca.z.total_cmp(&cb.z))
    });
    Ok(faces)
}

fn all_collinear(pts: &[Point2], segs: &[(usize, usize)]) -> bool {
    let (a, b) = (pts[segs[0].0], pts[segs[0].1]);
    let dir = b.sub(a);
    let len = dir.norm();
    segs.iter()
        .flat_map(|&(u, v)| [u, v])
        .all(|w| (pts[w].sub(a).cross(dir) / len).abs() <= 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangulation_preserves_area() {
        let l = Polygon2D::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(4.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 3.0),
            Point2::new(0.0, 3.0),
        ])
        .unwrap();
        let tris = triangulate(&l);
        assert_eq!(tris.len(), 4);
        let total: f64 = tris.iter().map(|t| signed_area(t)).sum();
        assert!((total - l.area()).abs() < 1e-12);
        assert!(tris.iter().all(|t| signed_area(t) > 0.0));
        assert!((polygon_intersection_area(&l, &l) - l.area()).abs() < 1e-9);
        let sq = Polygon2D::rect(0.5, 0.5, 2.0, 2.0).unwrap();
        // overlap: [0.5,2]x[0.5,1] plus [0.5,1]x[1,2]
        assert!((polygon_intersection_area(&l, &sq) - (0.75 + 0.5)).abs() < 1e-9);
        let far = Polygon2D::rect(5.0, 5.0, 6.0, 6.0).unwrap();
        assert_eq!(polygon_intersection_area(&l, &far), 0.0);
    }
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(x: f64, y: f64, z: f64) -> OrientedBox {
        OrientedBox::new([x, y, z], [0.5, 0.5, 0.5], 0.0).unwrap()
    }

    /// Monte-Carlo estimate of IoU by sampling the union's bounding volume.
    fn mc_iou(a: &OrientedBox, b: &OrientedBox, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for bx in [a, b] {
            for c in bx.footprint() {
                lo[0] = lo[0].min(c.x);
                hi[0] = hi[0].max(c.x);
                lo[2] = lo[2].min(c.z);
                hi[2] = hi[2].max(c.z);
            }
            lo[1] = lo[1].min(bx.bottom());
            hi[1] = hi[1].max(bx.top());
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for _ in 0..n {
            let p = [
                rng.random_range(lo[0]..hi[0]),
                rng.random_range(lo[1]..hi[1]),
                rng.random_range(lo[2]..hi[2]),
            ];
            let (ia, ib) = (a.contains_point(p), b.contains_point(p));
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                union += 1;
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn yaw_is_normalized() {
        assert_eq!(normalize_yaw(PI), -PI);
        assert!((normalize_yaw(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_yaw(0.25), 0.25);
        let f = Point2::new(0.6, 0.8);
        let back = forward_from_yaw(yaw_from_forward(f));
        assert!(back.dist(f) < 1e-12);
    }

    #[test]
    fn box_rejects_nonpositive_extent() {
        assert!(OrientedBox::new([0.0; 3], [1.0, 0.0, 1.0], 0.0).is_err());
        assert!(OrientedBox::new([0.0; 3], [1.0, -1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn iou_identical_and_disjoint() {
        let a = cube(0.0, 0.0, 0.0);
        assert!((obb_iou(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(obb_iou(&a, &cube(2.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn iou_half_offset_is_one_third() {
        let a = cube(0.0, 0.0, 0.0);
        let b = cube(0.5, 0.0, 0.0);
        let iou = obb_iou(&a, &b);
        assert!((iou - 1.0 / 3.0).abs() < 1e-12);
        assert!((mc_iou(&a, &b, 1_000_000, 3) - 1.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn iou_rotated_45_matches_monte_carlo() {
        let a = cube(0.0, 0.0, 0.0);
        let b = OrientedBox::new([0.0; 3], [0.5; 3], PI / 4.0).unwrap();
        let oracle = mc_iou(&a, &b, 1_000_000, 11);
        assert!((obb_iou(&a, &b) - oracle).abs() < 1e-2, "{} vs {}", obb_iou(&a, &b), oracle);
        // Octagon intersection: 1 - 4 * (corner triangle) with leg (sqrt2 - 1)/sqrt2.
        let leg: f64 = 1.0 - 1.0 / 2f64.sqrt();
        let inter = 1.0 - 2.0 * leg * leg;
        assert!((obb_iou(&a, &b) - inter / (2.0 - inter)).abs() < 1e-12);
    }

    #[test]
    fn footprint_iou_ignores_height() {
        let a = OrientedBox::new([0.0, 0.5, 0.0], [0.5, 0.5, 0.5], 0.0).unwrap();
        let b = OrientedBox::new([0.0, 1.0, 0.0], [0.5, 1.0, 0.5], 0.0).unwrap();
        assert!((footprint_iou(&a, &b) - 1.0).abs() < 1e-12);
        assert!((obb_iou(&a, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn touching_faces_do_not_intersect() {
        let a = cube(0.0, 0.0, 0.0);
        let b = cube(1.0, 0.0, 0.0);
        assert!(!obb_intersects(&a, &b, 0.0));
        assert!(obb_intersects(&a, &b, 0.02));
        let stacked = cube(0.0, 1.0, 0.0);
        assert!(!obb_intersects(&a, &stacked, 0.0));
    }

    #[test]
    fn intersects_agrees_with_point_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut disagreements = 0;
        for _ in 0..10_000 {
            let rand_box = |rng: &mut ChaCha8Rng| {
                OrientedBox::new(
                    [rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)],
                    [rng.random_range(0.1..0.8), rng.random_range(0.1..0.8), rng.random_range(0.1..0.8)],
                    rng.random_range(-PI..PI),
                )
                .unwrap()
            };
            let a = rand_box(&mut rng);
            let b = rand_box(&mut rng);
            let sat = obb_intersects(&a, &b, 0.0);
            // Sample points inside each box; any point inside both proves overlap.
            let mut hit = false;
            'outer: for (p, q) in [(&a, &b), (&b, &a)] {
                let (u, v) = p.axes();
                let h = p.half_extents();
                for _ in 0..4000 {
                    let lx = rng.random_range(-h[0]..h[0]);
                    let lz = rng.random_range(-h[2]..h[2]);
                    let p2 = p.center_xz().add(u.scale(lx)).add(v.scale(lz));
                    let y = p.center()[1] + rng.random_range(-h[1]..h[1]);
                    if q.contains_point([p2.x, y, p2.z]) {
                        hit = true;
                        break 'outer;
                    }
                }
            }
            if hit && !sat {
                panic!("sampling found overlap the SAT test missed: {a:?} {b:?}");
            }
            if sat && !hit {
                let iou = obb_iou(&a, &b);
                let inter = iou * (a.volume() + b.volume()) / (1.0 + iou);
                if inter > 5e-3 * a.volume().min(b.volume()) {
                    disagreements += 1;
                }
            }
        }
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn polygon_validation() {
        assert!(Polygon2D::rect(0.0, 0.0, 1.0, 1.0).is_ok());
        let cw = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        assert!(Polygon2D::new(cw).is_err());
        let bowtie = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(Polygon2D::new(bowtie).is_err());
    }

    #[test]
    fn point_in_polygon_basics() {
        let sq = Polygon2D::rect(0.0, 0.0, 2.0, 2.0).unwrap();
        assert!(point_in_polygon(sq.centroid(), &sq));
        assert!(!point_in_polygon(Point2::new(3.0, 1.0), &sq));
        assert!(point_in_polygon(Point2::new(2.0, 1.0), &sq));
        assert!(point_in_polygon(Point2::new(0.0, 0.0), &sq));
    }

    /// Winding number, computed from summed signed angles.
    fn winding_number(p: Point2, poly: &Polygon2D) -> i32 {
        let mut total = 0.0;
        for (a, b) in poly.edges() {
            let (u, v) = (a.sub(p), b.sub(p));
            total += u.cross(v).atan2(u.dot(v));
        }
        (total / (2.0 * PI)).round() as i32
    }

    #[test]
    fn point_in_polygon_matches_winding_oracle() {
        let poly = Polygon2D::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(4.0, 3.0),
            Point2::new(2.5, 1.2),
            Point2::new(1.0, 3.5),
            Point2::new(-0.5, 1.5),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = Point2::new(rng.random_range(-1.0..5.0), rng.random_range(-1.0..4.0));
            if poly.boundary_distance(p) < 1e-6 {
                continue;
            }
            assert_eq!(point_in_polygon(p, &poly), winding_number(p, &poly) != 0, "{p:?}");
        }
    }

    fn rect_segments(x0: f64, z0: f64, x1: f64, z1: f64) -> Vec<Segment2> {
        let p = [
            Point2::new(x0, z0),
            Point2::new(x1, z0),
            Point2::new(x1, z1),
            Point2::new(x0, z1),
        ];
        (0..4).map(|i| Segment2::new(p[i], p[(i + 1) % 4])).collect()
    }

    #[test]
    fn faces_single_rectangle() {
        let faces = extract_faces(&rect_segments(0.0, 0.0, 3.0, 4.0), 0.05).unwrap();
        assert_eq!(faces.len(), 1);
        assert!((faces[0].area() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn faces_ignore_dangling_wall() {
        let mut segs = rect_segments(0.0, 0.0, 3.0, 4.0);
        segs.push(Segment2::new(Point2::new(0.0, 2.0), Point2::new(1.5, 2.0)));
        let faces = extract_faces(&segs, 0.05).unwrap();
        assert_eq!(faces.len(), 1);
        assert!((faces[0].area() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn faces_two_squares_shared_edge() {
        let mut segs = rect_segments(0.0, 0.0, 3.0, 3.0);
        segs.push(Segment2::new(Point2::new(3.0, 0.0), Point2::new(6.0, 0.0)));
        segs.push(Segment2::new(Point2::new(6.0, 0.0), Point2::new(6.0, 3.0)));
        segs.push(Segment2::new(Point2::new(6.0, 3.0), Point2::new(3.0, 3.0)));
        assert_eq!(segs.len(), 7);
        let faces = extract_faces(&segs, 0.05).unwrap();
        assert_eq!(faces.len(), 2);
        for f in &faces {
            assert!((f.area() - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn faces_snap_small_gaps_and_split_crossings() {
        // Corner gaps of 2 cm and a cross-shaped pair of interior walls.
        let segs = vec![
            Segment2::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0)),
            Segment2::new(Point2::new(4.0, 0.02), Point2::new(4.0, 4.0)),
            Segment2::new(Point2::new(3.99, 4.0), Point2::new(0.0, 4.0)),
            Segment2::new(Point2::new(0.0, 4.0), Point2::new(0.0, 0.01)),
            Segment2::new(Point2::new(2.0, 0.0), Point2::new(2.0, 4.0)),
            Segment2::new(Point2::new(0.0, 2.0), Point2::new(4.0, 2.0)),
        ];
        let faces = extract_faces(&segs, 0.05).unwrap();
        assert_eq!(faces.len(), 4);
        let total: f64 = faces.iter().map(|f| f.area()).sum();
        assert!((total - 16.0).abs() < 0.2);
    }

    #[test]
    fn faces_t_junction_with_gap() {
        // Interior wall stops 3 cm short of the far wall.
        let mut segs = rect_segments(0.0, 0.0, 4.0, 3.0);
        segs.push(Segment2::new(Point2::new(2.0, 0.0), Point2::new(2.0, 2.97)));
        let faces = extract_faces(&segs, 0.05).unwrap();
        assert_eq!(faces.len(), 2);
    }

    #[test]
    fn faces_drop_nested_island() {
        let mut segs = rect_segments(0.0, 0.0, 10.0, 10.0);
        segs.extend(rect_segments(4.0, 4.0, 5.0, 5.0));
        let faces = extract_faces(&segs, 0.05).unwrap();
        assert_eq!(faces.len(), 1);
        assert!((faces[0].area() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn faces_degenerate_inputs() {
        assert!(matches!(extract_faces(&[], 0.05), Err(GeometryError::DegenerateInput(_))));
        let line = vec![
            Segment2::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)),
            Segment2::new(Point2::new(2.0, 0.0), Point2::new(3.0, 0.0)),
        ];
        assert!(matches!(extract_faces(&line, 0.05), Err(GeometryError::DegenerateInput(_))));
        let tiny = vec![Segment2::new(Point2::new(0.0, 0.0), Point2::new(0.01, 0.0))];
        assert!(matches!(extract_faces(&tiny, 0.05), Err(GeometryError::DegenerateInput(_))));
        let open = vec![
            Segment2::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)),
            Segment2::new(Point2::new(1.0, 0.0), Point2::new(1.0, 1.0)),
        ];
        assert!(extract_faces(&open, 0.05).unwrap().is_empty());
    }

    fn arb_box() -> impl Strategy<Value = OrientedBox> {
        (
            -2.0..2.0f64,
            -1.0..1.0f64,
            -2.0..2.0f64,
            0.05..1.5f64,
            0.05..1.5f64,
            0.05..1.5f64,
            -PI..PI,
        )
            .prop_map(|(x, y, z, hx, hy, hz, yaw)| {
                OrientedBox::new([x, y, z], [hx, hy, hz], yaw).unwrap()
            })
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_reflexive(a in arb_box(), b in arb_box()) {
            prop_assert!((obb_iou(&a, &b) - obb_iou(&b, &a)).abs() <= 1e-12);
            prop_assert!((obb_iou(&a, &a) - 1.0).abs() <= 1e-12);
            let v = obb_iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn iou_rigid_equivariance(a in arb_box(), b in arb_box(), rot in -PI..PI,
                                  tx in -50.0..50.0f64, ty in -5.0..5.0f64, tz in -50.0..50.0f64) {
            let t = [tx, ty, tz];
            let before = obb_iou(&a, &b);
            let after = obb_iou(&a.transformed(rot, t), &b.transformed(rot, t));
            prop_assert!((before - after).abs() <= 1e-9, "{} vs {}", before, after);
        }

        #[test]
        fn intersects_symmetric_and_monotone(a in arb_box(), b in arb_box(), c1 in 0.0..0.5f64, c2 in 0.0..0.5f64) {
            let (lo, hi) = (c1.min(c2), c1.max(c2));
            prop_assert_eq!(obb_intersects(&a, &b, lo), obb_intersects(&b, &a, lo));
            if obb_intersects(&a, &b, lo) {
                prop_assert!(obb_intersects(&a, &b, hi));
            }
        }

        #[test]
        fn faces_bounded_by_hull(cuts in proptest::collection::vec((0.5..9.5f64, any::<bool>()), 0..8)) {
            let mut segs = rect_segments(0.0, 0.0, 10.0, 10.0);
            for (c, vertical) in cuts {
                segs.push(if vertical {
                    Segment2::new(Point2::new(c, 0.0), Point2::new(c, 10.0))
                } else {
                    Segment2::new(Point2::new(0.0, c), Point2::new(10.0, c))
                });
            }
            let faces = extract_faces(&segs, 0.05).unwrap();
            let ends: Vec<Point2> = segs.iter().flat_map(|s| [s.a, s.b]).collect();
            let hull = signed_area(&convex_hull(&ends));
            let total: f64 = faces.iter().map(|f| f.area()).sum();
            prop_assert!(total <= hull + 1e-6);
            for f in &faces {
                prop_assert!(is_simple_ring(f.vertices()));
                prop_assert!(f.area() > 0.0);
            }
        }
    }
}
