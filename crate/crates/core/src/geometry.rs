//! Exact 2-D primitives: vectors, segments, polygons, ray casting, overlap.
//!
//! All predicates share one absolute tolerance, [`EPS`]. Contact within the
//! tolerance is treated as *not* overlapping, so two shapes that merely touch
//! never register as intersecting.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance (meters, or m/s in velocity space) for geometric predicates.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("segment endpoints coincide")]
    DegenerateSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product (a.k.a. 2-D determinant).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction; `None` for (near-)zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > EPS).then(|| self / n)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Left-hand perpendicular (rotation by +90°).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Clamp the magnitude to `max_len`.
    pub fn clamp_norm(self, max_len: f64) -> Vec2 {
        let n = self.norm();
        if n > max_len && n > 0.0 {
            self * (max_len / n)
        } else {
            self
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Rigid-body pose: translation plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self { position, heading }
    }

    /// Map a body-frame point into the world frame.
    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.position + p.rotate(self.heading)
    }

    /// Map a world-frame point into the body frame.
    pub fn inverse_apply(&self, p: Vec2) -> Vec2 {
        (p - self.position).rotate(-self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Result<Self, GeometryError> {
        if a.distance(b) <= EPS {
            return Err(GeometryError::DegenerateSegment);
        }
        Ok(Self { a, b })
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let d = self.b - self.a;
        let t = ((p - self.a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
        self.a + d * t
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    /// Ray parameter `t ≥ 0` at which `origin + t·dir` meets this segment.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        let w = self.a - origin;
        if denom.abs() <= EPS {
            // Parallel. Collinear overlap: nearest endpoint ahead of the origin.
            if w.cross(dir).abs() > EPS {
                return None;
            }
            let ta = w.dot(dir);
            let tb = (self.b - origin).dot(dir);
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            if hi < 0.0 {
                return None;
            }
            return Some(lo.max(0.0));
        }
        let t = w.cross(e) / denom;
        let s = w.cross(dir) / denom;
        if t >= -EPS && (-EPS..=1.0 + EPS).contains(&s) {
            Some(t.max(0.0))
        } else {
            None
        }
    }

    /// Proper or touching intersection test between two closed segments.
    pub fn intersects(&self, o: &Segment) -> bool {
        let d1 = orient(o.a, o.b, self.a);
        let d2 = orient(o.a, o.b, self.b);
        let d3 = orient(self.a, self.b, o.a);
        let d4 = orient(self.a, self.b, o.b);
        if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
            && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
        {
            return true;
        }
        (d1.abs() <= EPS && on_segment(o.a, o.b, self.a))
            || (d2.abs() <= EPS && on_segment(o.a, o.b, self.b))
            || (d3.abs() <= EPS && on_segment(self.a, self.b, o.a))
            || (d4.abs() <= EPS && on_segment(self.a, self.b, o.b))
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

/// Simple polygon with counterclockwise vertex order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<Vec2>,
        }
        let raw = Raw::deserialize(d)?;
        Polygon::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

impl Polygon {
    /// Validates the vertex list and reorders clockwise input to CCW.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        let area = signed_area(&vertices);
        if area.abs() <= EPS {
            return Err(GeometryError::Degenerate);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let ei = Segment {
                a: vertices[i],
                b: vertices[(i + 1) % n],
            };
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let ej = Segment {
                    a: vertices[j],
                    b: vertices[(j + 1) % n],
                };
                if ei.intersects(&ej) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle from two opposite corners.
    pub fn rect(min: Vec2, max: Vec2) -> Result<Self, GeometryError> {
        Self::new(vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment {
            a: self.vertices[i],
            b: self.vertices[(i + 1) % n],
        })
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            orient(
                self.vertices[i],
                self.vertices[(i + 1) % n],
                self.vertices[(i + 2) % n],
            ) >= -EPS
        })
    }

    pub fn transformed(&self, pose: &Pose) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| pose.apply(v)).collect(),
        }
    }

    /// Strict interior test (boundary points within [`EPS`] are outside).
    pub fn contains(&self, p: Vec2) -> bool {
        if self.boundary_distance(p) <= EPS {
            return false;
        }
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|e| e.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the closed polygon (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut c = Vec2::ZERO;
        let mut a2 = 0.0;
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let w = p.cross(q);
            a2 += w;
            c += (p + q) * w;
        }
        c / (3.0 * a2)
    }

    /// Ear-clipping triangulation into CCW triangles.
    pub fn triangulate(&self) -> Vec<[Vec2; 3]> {
        let mut idx: Vec<usize> = (0..self.vertices.len()).collect();
        let v = &self.vertices;
        let mut tris = Vec::with_capacity(v.len() - 2);
        let mut guard = 0;
        while idx.len() > 3 && guard < 10_000 {
            guard += 1;
            let n = idx.len();
            let mut clipped = false;
            for k in 0..n {
                let (ip, ic, inx) = (idx[(k + n - 1) % n], idx[k], idx[(k + 1) % n]);
                let (a, b, c) = (v[ip], v[ic], v[inx]);
                if orient(a, b, c) <= EPS {
                    continue;
                }
                let blocked = idx.iter().any(|&m| {
                    m != ip && m != ic && m != inx && point_in_triangle_closed(v[m], a, b, c)
                });
                if !blocked {
                    tris.push([a, b, c]);
                    idx.remove(k);
                    clipped = true;
                    break;
                }
            }
            if !clipped {
                // Only collinear runs remain; drop a flat vertex.
                let n = idx.len();
                let flat = (0..n).find(|&k| {
                    orient(v[idx[(k + n - 1) % n]], v[idx[k]], v[idx[(k + 1) % n]]).abs() <= EPS
                });
                match flat {
                    Some(k) => {
                        idx.remove(k);
                    }
                    None => break,
                }
            }
        }
        if idx.len() == 3 {
            let t = [v[idx[0]], v[idx[1]], v[idx[2]]];
            if orient(t[0], t[1], t[2]) > EPS {
                tris.push(t);
            }
        }
        tris
    }
}

fn point_in_triangle_closed(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    orient(a, b, p) >= -EPS && orient(b, c, p) >= -EPS && orient(c, a, p) >= -EPS
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

/// Distance along a unit-direction ray to the nearest polygon edge, clamped
/// to `max_range`.
pub fn ray_cast(origin: Vec2, direction: Vec2, obstacles: &[Polygon], max_range: f64) -> f64 {
    debug_assert!((direction.norm() - 1.0).abs() < 1e-6);
    obstacles
        .iter()
        .flat_map(|p| p.edges())
        .filter_map(|e| e.ray_hit(origin, direction))
        .fold(max_range, f64::min)
        .clamp(0.0, max_range)
}

/// True iff the interiors of `p` (placed at `pose_p`) and `q` (at `pose_q`)
/// intersect. Boundary contact alone is not an overlap.
pub fn polygons_overlap(p: &Polygon, pose_p: &Pose, q: &Polygon, pose_q: &Pose) -> bool {
    let a = p.transformed(pose_p);
    let b = q.transformed(pose_q);
    world_polygons_overlap(&a, &b)
}

/// Overlap test for polygons already expressed in world coordinates.
pub fn world_polygons_overlap(a: &Polygon, b: &Polygon) -> bool {
    if !bbox_overlap(a.vertices(), b.vertices()) {
        return false;
    }
    match (a.is_convex(), b.is_convex()) {
        (true, true) => convex_overlap(a.vertices(), b.vertices()),
        _ => {
            let ta = if a.is_convex() {
                vec![a.vertices().to_vec()]
            } else {
                a.triangulate().iter().map(|t| t.to_vec()).collect()
            };
            let tb = if b.is_convex() {
                vec![b.vertices().to_vec()]
            } else {
                b.triangulate().iter().map(|t| t.to_vec()).collect()
            };
            ta.iter()
                .any(|x| tb.iter().any(|y| convex_overlap(x, y)))
        }
    }
}

fn bbox_overlap(a: &[Vec2], b: &[Vec2]) -> bool {
    let bb = |v: &[Vec2]| {
        v.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    };
    let (ax0, ay0, ax1, ay1) = bb(a);
    let (bx0, by0, bx1, by1) = bb(b);
    ax0 < bx1 - EPS && bx0 < ax1 - EPS && ay0 < by1 - EPS && by0 < ay1 - EPS
}

/// Separating-axis test on two convex vertex rings.
fn convex_overlap(a: &[Vec2], b: &[Vec2]) -> bool {
    for ring in [a, b] {
        let n = ring.len();
        for i in 0..n {
            let Some(axis) = (ring[(i + 1) % n] - ring[i]).perp().normalized() else {
                continue;
            };
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            if amax <= bmin + EPS || bmax <= amin + EPS {
                return false;
            }
        }
    }
    true
}

fn project(ring: &[Vec2], axis: Vec2) -> (f64, f64) {
    ring.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let d = v.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Allowed region `{v : (v − point)·normal ≥ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub point: Vec2,
    pub normal: Vec2,
}

impl HalfPlane {
    /// `normal` is renormalized; panics on a zero normal.
    pub fn new(point: Vec2, normal: Vec2) -> Self {
        let normal = normal
            .normalized()
            .expect("half-plane normal must be non-zero");
        Self { point, normal }
    }

    pub fn contains(&self, v: Vec2) -> bool {
        point_to_halfplane_distance(v, self) >= -EPS
    }

    /// Boundary direction with the allowed side on its left.
    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.normal.y, -self.normal.x)
    }
}

/// Signed distance of `v` to the boundary of `h`: positive inside the
/// allowed half-plane, negative when violating.
pub fn point_to_halfplane_distance(v: Vec2, h: &HalfPlane) -> f64 {
    (v - h.point).dot(h.normal)
}
