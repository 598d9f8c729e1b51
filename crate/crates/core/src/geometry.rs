//! Exact 2D primitives for convex polygons.
//!
//! All lengths are millimetres and all angles radians. Polygons are stored
//! counter-clockwise and are strictly convex; derived regions (hulls, clip
//! results) may have more than [`MAX_OBJECT_VERTICES`] vertices, object
//! models may not.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};

/// Tolerance for orientation (cross-product) tests, in mm².
pub const ORIENT_EPS: f64 = 1e-6;
/// Two points closer than this are treated as coincident, in mm.
pub const COINCIDENT_EPS: f64 = 1e-9;
/// Object models must enclose more than this area, in mm².
pub const MIN_OBJECT_AREA: f64 = 1.0;
/// Maximum vertex count of an object model.
pub const MAX_OBJECT_VERTICES: usize = 8;
/// Clip results at or below this area are reported as empty.
const CLIP_AREA_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2 { x: v[0], y: v[1] }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn from_angle(angle: f64) -> Self {
        Point2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Rotated by +90°.
    pub fn perp(self) -> Self {
        Point2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Wrap an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = (theta + PI).rem_euclid(two_pi);
    if r >= two_pi {
        r = 0.0;
    }
    r - PI
}

/// Planar pose; `theta` is kept in `[-π, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Unit vector along the pose's x axis.
    pub fn axis(&self) -> Point2 {
        Point2::from_angle(self.theta)
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && (-PI..PI).contains(&self.theta)
    }
}

/// Line segment; behaves as a degenerate convex shape for distance queries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pts: [Point2; 2],
}

impl Segment {
    pub fn new(a: Point2, b: Point2) -> Self {
        Segment { pts: [a, b] }
    }

    pub fn a(&self) -> Point2 {
        self.pts[0]
    }

    pub fn b(&self) -> Point2 {
        self.pts[1]
    }
}

/// Rectangle with an arbitrary orientation. `axis_u` is the gripper closing
/// axis; `half_width` is measured along it and `half_length` across it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedRect {
    pub center: Point2,
    pub axis_u: Point2,
    pub half_width: f64,
    pub half_length: f64,
}

impl OrientedRect {
    pub fn new(center: Point2, axis_u: Point2, half_width: f64, half_length: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_length > 0.0) {
            return Err(GraspError::DegenerateInput(format!(
                "rectangle half extents must be positive, got {half_width} x {half_length}"
            )));
        }
        let n = axis_u.norm();
        if !n.is_finite() || n < COINCIDENT_EPS || !center.is_finite() {
            return Err(GraspError::DegenerateInput("rectangle axis must be a finite non-zero vector".into()));
        }
        Ok(OrientedRect {
            center,
            axis_u: axis_u * (1.0 / n),
            half_width,
            half_length,
        })
    }

    pub fn axis_v(&self) -> Point2 {
        self.axis_u.perp()
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point2; 4] {
        let u = self.axis_u * self.half_width;
        let v = self.axis_v() * self.half_length;
        let c = self.center;
        [c - u - v, c + u - v, c + u + v, c - u + v]
    }

    pub fn to_polygon(&self) -> ConvexPolygon {
        ConvexPolygon::from_ccw_unchecked(self.corners().to_vec())
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let d = p - self.center;
        d.dot(self.axis_u).abs() <= self.half_width + tol && d.dot(self.axis_v()).abs() <= self.half_length + tol
    }

    pub fn circumradius(&self) -> f64 {
        self.half_width.hypot(self.half_length)
    }
}

/// Strictly convex polygon with counter-clockwise vertices. Equality
/// compares vertex lists only.
#[derive(Clone, Debug)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
    area: f64,
    centroid: Point2,
    radius: f64,
}

impl PartialEq for ConvexPolygon {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

impl ConvexPolygon {
    /// Validate and build a polygon. Clockwise input is reoriented; anything
    /// that is not strictly convex within [`ORIENT_EPS`] is rejected.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(GraspError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(GraspError::InvalidPolygon(format!("non-finite vertex {p:?}")));
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        let mut turning = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let e0 = b - a;
            let e1 = c - b;
            if e0.norm() <= COINCIDENT_EPS {
                return Err(GraspError::InvalidPolygon(format!("duplicate vertex at index {}", (i + 1) % n)));
            }
            let cr = e0.cross(e1);
            if cr <= ORIENT_EPS {
                return Err(GraspError::InvalidPolygon(format!(
                    "not strictly convex at vertex {} (cross product {cr:.3e})",
                    (i + 1) % n
                )));
            }
            turning += e0.cross(e1).atan2(e0.dot(e1));
        }
        // A star polygon turns by a multiple of 2π greater than one.
        if (turning - 2.0 * PI).abs() > 1e-6 {
            return Err(GraspError::InvalidPolygon("polygon is self-intersecting".into()));
        }
        Ok(Self::from_ccw_unchecked(vertices))
    }

    /// Build an object model: a valid polygon with at most
    /// [`MAX_OBJECT_VERTICES`] vertices and area above [`MIN_OBJECT_AREA`].
    pub fn object(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() > MAX_OBJECT_VERTICES {
            return Err(GraspError::InvalidPolygon(format!(
                "object has {} vertices, at most {MAX_OBJECT_VERTICES} allowed",
                vertices.len()
            )));
        }
        let poly = Self::new(vertices)?;
        if poly.area <= MIN_OBJECT_AREA {
            return Err(GraspError::InvalidPolygon(format!(
                "object area {:.3} mm² is below {MIN_OBJECT_AREA} mm²",
                poly.area
            )));
        }
        Ok(poly)
    }

    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point2>) -> Self {
        let area = signed_area(&vertices);
        let centroid = polygon_centroid(&vertices, area);
        let radius = vertices.iter().map(|v| v.distance(centroid)).fold(0.0, f64::max);
        ConvexPolygon {
            vertices,
            area,
            centroid,
            radius,
        }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn centroid(&self) -> Point2 {
        self.centroid
    }

    /// Largest distance from the centroid to a vertex.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Edges as `(start, end)` pairs in counter-clockwise order.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn translated(&self, d: Point2) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
            area: self.area,
            centroid: self.centroid + d,
            radius: self.radius,
        }
    }

    pub fn rotated_about(&self, pivot: Point2, angle: f64) -> ConvexPolygon {
        let vertices = self.vertices.iter().map(|&v| pivot + (v - pivot).rotated(angle)).collect();
        ConvexPolygon::from_ccw_unchecked(vertices)
    }

    /// Interval covered by the polygon's projection onto `axis`.
    pub fn project(&self, axis: Point2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| v.dot(axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
    }

    /// Axis-aligned bounding box as `(min corner, max corner)`.
    pub fn bbox(&self) -> (Point2, Point2) {
        let (x0, x1) = self.project(Point2::new(1.0, 0.0));
        let (y0, y1) = self.project(Point2::new(0.0, 1.0));
        (Point2::new(x0, y0), Point2::new(x1, y1))
    }

    /// Smallest signed distance from `p` to an edge line, positive inside.
    pub fn inside_distance(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let e = b - a;
                e.cross(p - a) / e.norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `p` is inside or within `tol` of the boundary.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.inside_distance(p) >= -tol
    }

    /// Minimum width over all directions (attained normal to an edge).
    pub fn min_width(&self) -> f64 {
        self.edges()
            .map(|(a, b)| {
                let n = (b - a).perp().normalized();
                let (lo, hi) = self.project(n);
                hi - lo
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(a.distance(*b));
            }
        }
        best
    }
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n).map(|i| vertices[i].cross(vertices[(i + 1) % n])).sum();
    0.5 * twice
}

fn polygon_centroid(vertices: &[Point2], area: f64) -> Point2 {
    let n = vertices.len();
    if area.abs() <= f64::EPSILON {
        let sum = vertices.iter().fold(Point2::ORIGIN, |acc, &v| acc + v);
        return sum * (1.0 / n as f64);
    }
    // Shift to the first vertex for numerical stability.
    let o = vertices[0];
    let mut c = Point2::ORIGIN;
    for i in 0..n {
        let p = vertices[i] - o;
        let q = vertices[(i + 1) % n] - o;
        let w = p.cross(q);
        c += (p + q) * w;
    }
    o + c * (1.0 / (6.0 * area))
}

/// Shoelace area of a polygon, in mm².
pub fn polygon_area(poly: &ConvexPolygon) -> f64 {
    poly.area()
}

/// Convex hull by the monotone chain method. Collinear points are dropped.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(GraspError::DegenerateInput("non-finite point".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.distance(*b) <= COINCIDENT_EPS);
    if pts.len() < 3 {
        return Err(GraspError::DegenerateInput(format!(
            "convex hull needs 3 distinct points, got {}",
            pts.len()
        )));
    }
    let turn = |o: Point2, a: Point2, b: Point2| (a - o).cross(b - o);
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= ORIENT_EPS {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= ORIENT_EPS {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(GraspError::DegenerateInput("all points are collinear".into()));
    }
    Ok(ConvexPolygon::from_ccw_unchecked(hull))
}

/// Keep the part of `input` with `normal · p <= offset`.
fn clip_halfplane(input: &[Point2], normal: Point2, offset: f64, out: &mut Vec<Point2>) {
    out.clear();
    let n = input.len();
    for i in 0..n {
        let cur = input[i];
        let nxt = input[(i + 1) % n];
        let dc = normal.dot(cur) - offset;
        let dn = normal.dot(nxt) - offset;
        let cur_in = dc <= COINCIDENT_EPS;
        let nxt_in = dn <= COINCIDENT_EPS;
        if cur_in {
            out.push(cur);
        }
        if cur_in != nxt_in {
            let t = (dc / (dc - dn)).clamp(0.0, 1.0);
            out.push(cur + (nxt - cur) * t);
        }
    }
}

fn finish_clip(mut pts: Vec<Point2>) -> Option<ConvexPolygon> {
    pts.dedup_by(|a, b| a.distance(*b) <= COINCIDENT_EPS);
    while pts.len() > 1 && pts[0].distance(pts[pts.len() - 1]) <= COINCIDENT_EPS {
        pts.pop();
    }
    if pts.len() < 3 {
        return None;
    }
    // Drop vertices that lie on a straight run.
    let mut i = 0;
    while pts.len() >= 3 && i < pts.len() {
        let n = pts.len();
        let a = pts[(i + n - 1) % n];
        let b = pts[i];
        let c = pts[(i + 1) % n];
        if (b - a).cross(c - b) <= 1e-12 {
            pts.remove(i);
        } else {
            i += 1;
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let poly = ConvexPolygon::from_ccw_unchecked(pts);
    (poly.area > CLIP_AREA_EPS).then_some(poly)
}

/// Intersection of a convex polygon with an oriented rectangle, by
/// successive half-plane clipping against the rectangle's four edges.
/// Returns `None` when the intersection has zero area.
pub fn clip_polygon_to_rect(poly: &ConvexPolygon, rect: &OrientedRect) -> Option<ConvexPolygon> {
    if poly.centroid().distance(rect.center) > poly.radius() + rect.circumradius() {
        return None;
    }
    let u = rect.axis_u;
    let v = rect.axis_v();
    let cu = u.dot(rect.center);
    let cv = v.dot(rect.center);
    let planes = [
        (u, cu + rect.half_width),
        (-u, -cu + rect.half_width),
        (v, cv + rect.half_length),
        (-v, -cv + rect.half_length),
    ];
    let mut cur = poly.vertices().to_vec();
    let mut next = Vec::with_capacity(cur.len() + 4);
    for (normal, offset) in planes {
        clip_halfplane(&cur, normal, offset, &mut next);
        std::mem::swap(&mut cur, &mut next);
        if cur.len() < 3 {
            return None;
        }
    }
    finish_clip(cur)
}

/// Intersection of two convex polygons.
pub fn clip_convex(subject: &ConvexPolygon, clip: &ConvexPolygon) -> Option<ConvexPolygon> {
    if subject.centroid().distance(clip.centroid()) > subject.radius() + clip.radius() {
        return None;
    }
    let mut cur = subject.vertices().to_vec();
    let mut next = Vec::with_capacity(cur.len() + clip.len());
    for (a, b) in clip.edges() {
        // Inside of a CCW edge is to the left: (b - a) x (p - a) >= 0.
        let normal = -(b - a).perp();
        clip_halfplane(&cur, normal, normal.dot(a), &mut next);
        std::mem::swap(&mut cur, &mut next);
        if cur.len() < 3 {
            return None;
        }
    }
    finish_clip(cur)
}

/// True when the two regions share positive area.
pub fn overlaps_rect(poly: &ConvexPolygon, rect: &OrientedRect) -> bool {
    clip_polygon_to_rect(poly, rect).is_some()
}

/// Shapes usable in [`min_distance`]: polygons (solid) and segments.
pub trait ConvexShape {
    /// Boundary vertices in order.
    fn boundary(&self) -> &[Point2];
    /// Whether the shape encloses area.
    fn is_solid(&self) -> bool;
}

impl ConvexShape for ConvexPolygon {
    fn boundary(&self) -> &[Point2] {
        &self.vertices
    }
    fn is_solid(&self) -> bool {
        true
    }
}

impl ConvexShape for Segment {
    fn boundary(&self) -> &[Point2] {
        &self.pts
    }
    fn is_solid(&self) -> bool {
        false
    }
}

fn shape_edges(pts: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = pts.len();
    let count = if n == 2 { 1 } else { n };
    (0..count).map(move |i| (pts[i], pts[(i + 1) % n]))
}

fn solid_contains(pts: &[Point2], p: Point2) -> bool {
    shape_edges(pts).all(|(a, b)| (b - a).cross(p - a) >= 0.0)
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let e = b - a;
    let len_sq = e.norm_sq();
    if len_sq <= 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(e) / len_sq).clamp(0.0, 1.0);
    p.distance(a + e * t)
}

fn segments_cross(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> bool {
    let d1 = (q1 - q0).cross(p0 - q0);
    let d2 = (q1 - q0).cross(p1 - q0);
    let d3 = (p1 - p0).cross(q0 - p0);
    let d4 = (p1 - p0).cross(q1 - p0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Distance between two segments; zero when they intersect.
pub fn segment_distance(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> f64 {
    if segments_cross(p0, p1, q0, q1) {
        return 0.0;
    }
    point_segment_distance(p0, q0, q1)
        .min(point_segment_distance(p1, q0, q1))
        .min(point_segment_distance(q0, p0, p1))
        .min(point_segment_distance(q1, p0, p1))
}

/// Euclidean separation of two convex shapes; zero when they touch or
/// overlap. Symmetric in its arguments.
pub fn min_distance<A, B>(a: &A, b: &B) -> f64
where
    A: ConvexShape + ?Sized,
    B: ConvexShape + ?Sized,
{
    let pa = a.boundary();
    let pb = b.boundary();
    if (a.is_solid() && pb.iter().any(|&p| solid_contains(pa, p)))
        || (b.is_solid() && pa.iter().any(|&p| solid_contains(pb, p)))
    {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (a0, a1) in shape_edges(pa) {
        for (b0, b1) in shape_edges(pb) {
            best = best.min(segment_distance(a0, a1, b0, b1));
        }
    }
    best
}

fn grid_points(hull: &ConvexPolygon, lo: Point2, hi: Point2, pitch: f64) -> Option<Vec<Point2>> {
    let w = hi.x - lo.x;
    let h = hi.y - lo.y;
    let nx = ((w / pitch).floor() as usize).max(1);
    let ny = ((h / pitch).floor() as usize).max(1);
    if nx.saturating_mul(ny) > 4_000_000 {
        return None;
    }
    let x0 = lo.x + 0.5 * (w - (nx - 1) as f64 * pitch);
    let y0 = lo.y + 0.5 * (h - (ny - 1) as f64 * pitch);
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = Point2::new(x0 + i as f64 * pitch, y0 + j as f64 * pitch);
            if hull.inside_distance(p) > COINCIDENT_EPS {
                out.push(p);
            }
        }
    }
    Some(out)
}

/// Points strictly inside `hull` on a square grid centred on its bounding
/// box. The pitch is the largest (found by bisection) that still yields at
/// least `n` interior points. Deterministic for a given hull.
pub fn uniform_cover_points(hull: &ConvexPolygon, n: usize) -> Result<Vec<Point2>> {
    if n == 0 {
        return Err(GraspError::DegenerateInput("need at least one cover point".into()));
    }
    if hull.area() < MIN_OBJECT_AREA {
        return Err(GraspError::DegenerateInput(format!(
            "hull area {:.3e} mm² is too small to cover",
            hull.area()
        )));
    }
    let (lo, hi) = hull.bbox();
    let count = |pitch: f64| grid_points(hull, lo, hi, pitch).map(|g| g.len());
    let mut coarse = 2.0 * (hi.x - lo.x).max(hi.y - lo.y) + 1.0;
    if count(coarse).unwrap_or(0) >= n {
        return grid_points(hull, lo, hi, coarse).ok_or_else(|| unreachable_grid());
    }
    let mut fine = (hull.area() / n as f64).sqrt();
    loop {
        match count(fine) {
            Some(c) if c >= n => break,
            Some(_) => fine *= 0.5,
            None => {
                return Err(GraspError::DegenerateInput(
                    "hull is too thin to place the requested points".into(),
                ))
            }
        }
    }
    for _ in 0..64 {
        let mid = 0.5 * (fine + coarse);
        if count(mid).unwrap_or(usize::MAX) >= n {
            fine = mid;
        } else {
            coarse = mid;
        }
    }
    grid_points(hull, lo, hi, fine).ok_or_else(|| unreachable_grid())
}

fn unreachable_grid() -> GraspError {
    GraspError::DegenerateInput("cover grid too dense".into())
}

/// Random strictly convex polygon with `n_vertices` corners on an ellipse
/// with semi-axes `radius` and `radius * aspect`, randomly rotated and
/// centred at `center`.
pub fn random_convex_polygon<R: Rng + ?Sized>(
    rng: &mut R,
    n_vertices: usize,
    radius: f64,
    aspect: f64,
    center: Point2,
) -> ConvexPolygon {
    assert!((3..=MAX_OBJECT_VERTICES).contains(&n_vertices));
    let spacing = 2.0 * PI / n_vertices as f64;
    let phase = rng.random_range(0.0..2.0 * PI);
    let rotation = rng.random_range(0.0..2.0 * PI);
    let pts: Vec<Point2> = (0..n_vertices)
        .map(|k| {
            let t = phase + spacing * (k as f64 + rng.random_range(-0.35..0.35));
            let local = Point2::new(radius * t.cos(), radius * aspect * t.sin());
            center + local.rotated(rotation)
        })
        .collect();
    ConvexPolygon::object(pts).expect("points on an ellipse in angular order form a convex polygon")
}

/// Axis-aligned square with side `side` centred at `center`.
pub fn square(center: Point2, side: f64) -> ConvexPolygon {
    let h = 0.5 * side;
    ConvexPolygon::new(vec![
        center + Point2::new(-h, -h),
        center + Point2::new(h, -h),
        center + Point2::new(h, h),
        center + Point2::new(-h, h),
    ])
    .expect("square is convex")
}

/// Regular polygon with circumradius `radius`, first vertex at angle `phase`.
pub fn regular_polygon(center: Point2, radius: f64, n_vertices: usize, phase: f64) -> ConvexPolygon {
    let pts = (0..n_vertices)
        .map(|k| center + Point2::from_angle(phase + 2.0 * PI * k as f64 / n_vertices as f64) * radius)
        .collect();
    ConvexPolygon::new(pts).expect("regular polygon is convex")
}
