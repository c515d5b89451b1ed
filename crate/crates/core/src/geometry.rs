//! Planar computational-geometry kernel.
//!
//! Everything here works on plain `f64` points in meters. Convex polygons are
//! stored counter-clockwise; degenerate hulls (a point or a segment) are
//! allowed wherever a [`ConvexSet`] is accepted.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D point or vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    #[inline]
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        self.rotated_sc(s, c)
    }

    #[inline]
    pub fn rotated_sc(self, s: f64, c: f64) -> Vec2 {
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Convex hull of a point set, counter-clockwise, without collinear points.
///
/// One vertex is a point, two a segment, three or more a proper polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet {
    vertices: Vec<Vec2>,
}

impl ConvexSet {
    /// Wraps vertices that are already a CCW convex loop. Not checked.
    pub fn from_ccw_unchecked(vertices: Vec<Vec2>) -> Self {
        debug_assert!(!vertices.is_empty());
        Self { vertices }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Vec2> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// True if `p` lies inside or on the set, within `tol` meters.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        point_distance_to_set(p, self) <= tol
    }
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[Vec2]) -> Result<ConvexSet> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Ok(ConvexSet { vertices: pts });
    }

    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    // All points collinear: the chain collapses onto the two extremes.
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    Ok(ConvexSet { vertices: hull })
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn segment_segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// True if `p` is inside or on a CCW polygon with at least 3 vertices.
pub fn polygon_contains(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    (0..n).all(|i| (poly[(i + 1) % n] - poly[i]).cross(p - poly[i]) >= 0.0)
}

fn edges(vs: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    let n = vs.len();
    // A point yields one zero-length edge, a segment yields it twice; both are harmless.
    (0..n).map(move |i| (vs[i], vs[(i + 1) % n]))
}

/// Minimal distance between two convex regions; zero when they intersect.
pub fn set_distance(a: &ConvexSet, b: &ConvexSet) -> f64 {
    polygon_distance(&a.vertices, &b.vertices)
}

/// [`set_distance`] on raw CCW vertex loops.
pub fn polygon_distance(a: &[Vec2], b: &[Vec2]) -> f64 {
    if a.len() >= 3 && b.iter().any(|&p| polygon_contains(a, p)) {
        return 0.0;
    }
    if b.len() >= 3 && a.iter().any(|&p| polygon_contains(b, p)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (a0, a1) in edges(a) {
        for (b0, b1) in edges(b) {
            best = best.min(segment_segment_distance(a0, a1, b0, b1));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

/// Distance from a point to a convex set (zero inside).
pub fn point_distance_to_set(p: Vec2, s: &ConvexSet) -> f64 {
    let vs = &s.vertices;
    if vs.len() >= 3 && polygon_contains(vs, p) {
        return 0.0;
    }
    edges(vs)
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Result of a separating-axis overlap query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penetration {
    /// Minimal translation distance, meters.
    pub depth: f64,
    /// Unit direction along which `b` must move (by `depth`) to separate from `a`.
    pub normal: Vec2,
}

fn project(vs: &[Vec2], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vs {
        let d = v.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Separating-axis test over both polygons' edge normals.
///
/// Returns `None` when a separating axis exists. Ties between axes keep the
/// lowest edge index of `a`, then of `b`; on a single axis pushing `b` along
/// the outward normal wins over the opposite direction.
pub fn penetration_polygons(a: &[Vec2], b: &[Vec2]) -> Option<Penetration> {
    debug_assert!(a.len() >= 3 && b.len() >= 3);
    let mut best: Option<Penetration> = None;
    for poly in [a, b] {
        for (p0, p1) in edges(poly) {
            let axis = (p1 - p0).perp();
            let len = axis.norm();
            if len == 0.0 {
                continue;
            }
            // CCW loop: outward normal is the clockwise perpendicular.
            let axis = -axis * (1.0 / len);
            let (a_lo, a_hi) = project(a, axis);
            let (b_lo, b_hi) = project(b, axis);
            let forward = a_hi - b_lo;
            let backward = b_hi - a_lo;
            if forward < 0.0 || backward < 0.0 {
                return None;
            }
            let (depth, normal) = if forward <= backward {
                (forward, axis)
            } else {
                (backward, -axis)
            };
            if best.is_none_or(|p| depth < p.depth) {
                best = Some(Penetration { depth, normal });
            }
        }
    }
    best
}

/// [`penetration_polygons`] on hulls. Requires at least 3 vertices on each side.
pub fn penetration(a: &ConvexSet, b: &ConvexSet) -> Option<Penetration> {
    penetration_polygons(&a.vertices, &b.vertices)
}

/// Signed area of a CCW loop.
pub fn polygon_area(vs: &[Vec2]) -> f64 {
    let n = vs.len();
    (0..n).map(|i| vs[i].cross(vs[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Area centroid; falls back to the vertex mean for degenerate loops.
pub fn polygon_centroid(vs: &[Vec2]) -> Vec2 {
    let area = polygon_area(vs);
    if area.abs() < 1e-15 {
        return vertex_mean(vs);
    }
    let n = vs.len();
    let mut c = Vec2::ZERO;
    for i in 0..n {
        let (p, q) = (vs[i], vs[(i + 1) % n]);
        c += (p + q) * p.cross(q);
    }
    c * (1.0 / (6.0 * area))
}

pub fn vertex_mean(vs: &[Vec2]) -> Vec2 {
    let mut c = Vec2::ZERO;
    for &v in vs {
        c += v;
    }
    c * (1.0 / vs.len() as f64)
}

/// True if the loop is convex and counter-clockwise with at least 3 vertices.
pub fn is_convex_ccw(vs: &[Vec2]) -> bool {
    let n = vs.len();
    if n < 3 || polygon_area(vs) <= 0.0 {
        return false;
    }
    (0..n).all(|i| {
        let (a, b, c) = (vs[i], vs[(i + 1) % n], vs[(i + 2) % n]);
        (b - a).cross(c - b) >= 0.0
    })
}
