//! Planar primitives: points, orientation and incircle predicates,
//! circumcenters, convex polygons and half-plane clipping.
//!
//! Predicates are plain floating point with a scaled tolerance
//! [`EPS_GEOM`]. The scale is the magnitude of the coordinates after
//! translating to the first argument, so the threshold follows the local
//! feature size rather than the distance from the origin.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by every geometric predicate.
pub const EPS_GEOM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x1: f64, x2: f64) -> Self {
        Point2 { x1, x2 }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn try_new(x1: f64, x2: f64) -> Result<Self> {
        let p = Point2 { x1, x2 };
        if p.is_finite() {
            Ok(p)
        } else {
            Err(Error::NonFinite(p))
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    #[inline]
    pub fn dot(self, o: Point2) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2
    }

    /// z-component of the 3-D cross product.
    #[inline]
    pub fn cross(self, o: Point2) -> f64 {
        self.x1 * o.x2 - self.x2 * o.x1
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    #[inline]
    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Rotation by −90°: (a, b) ↦ (b, −a).
    #[inline]
    pub fn rot_cw(self) -> Point2 {
        Point2::new(self.x2, -self.x1)
    }

    /// Rotation by +90°: (a, b) ↦ (−b, a).
    #[inline]
    pub fn rot_ccw(self) -> Point2 {
        Point2::new(-self.x2, self.x1)
    }

    #[inline]
    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x1 + o.x1), 0.5 * (self.x2 + o.x2))
    }

    #[inline]
    pub fn max_abs(self) -> f64 {
        self.x1.abs().max(self.x2.abs())
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x1 * s, self.x2 * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x1, -self.x2)
    }
}

fn lex_less(a: Point2, b: Point2) -> bool {
    (a.x1, a.x2) < (b.x1, b.x2)
}

/// Twice the signed area of triangle `abc` (positive when counterclockwise).
///
/// The determinant is evaluated on a canonical (lexicographic) ordering of
/// the three points and the permutation sign applied afterwards, so any
/// swap of arguments negates the result exactly.
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> f64 {
    let mut pts = [a, b, c];
    let mut sign = 1.0;
    // three-element bubble sort tracking parity
    for (i, j) in [(0, 1), (1, 2), (0, 1)] {
        if lex_less(pts[j], pts[i]) {
            pts.swap(i, j);
            sign = -sign;
        }
    }
    let [p, q, r] = pts;
    sign * (q - p).cross(r - p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Collinear,
}

fn local_scale(base: Point2, others: &[Point2]) -> f64 {
    others
        .iter()
        .map(|&p| (p - base).max_abs())
        .fold(0.0, f64::max)
}

/// Classifies `abc` with the threshold `EPS_GEOM · scale²`.
pub fn orientation(a: Point2, b: Point2, c: Point2) -> Orientation {
    let det = orient2d(a, b, c);
    let scale = local_scale(a, &[b, c]);
    let tol = EPS_GEOM * scale * scale;
    if det > tol {
        Orientation::CounterClockwise
    } else if det < -tol {
        Orientation::Clockwise
    } else {
        Orientation::Collinear
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CirclePosition {
    Inside,
    On,
    Outside,
}

/// Position of `d` relative to the circumcircle of the ccw triangle `abc`.
pub fn incircle(a: Point2, b: Point2, c: Point2, d: Point2) -> Result<CirclePosition> {
    if orientation(a, b, c) != Orientation::CounterClockwise {
        return Err(Error::DegenerateTriangle);
    }
    let ad = a - d;
    let bd = b - d;
    let cd = c - d;
    let alift = ad.dot(ad);
    let blift = bd.dot(bd);
    let clift = cd.dot(cd);
    let det = alift * bd.cross(cd) + blift * cd.cross(ad) + clift * ad.cross(bd);
    let scale = local_scale(d, &[a, b, c]);
    let tol = EPS_GEOM * scale.powi(4);
    Ok(if det > tol {
        CirclePosition::Inside
    } else if det < -tol {
        CirclePosition::Outside
    } else {
        CirclePosition::On
    })
}

/// Center of the circle through `a`, `b`, `c`.
pub fn circumcenter(a: Point2, b: Point2, c: Point2) -> Result<Point2> {
    if orientation(a, b, c) == Orientation::Collinear {
        return Err(Error::DegenerateTriangle);
    }
    let b = b - a;
    let c = c - a;
    let d = 2.0 * b.cross(c);
    let bl = b.dot(b);
    let cl = c.dot(c);
    let ux = (c.x2 * bl - b.x2 * cl) / d;
    let uy = (b.x1 * cl - c.x1 * bl) / d;
    Ok(Point2::new(a.x1 + ux, a.x2 + uy))
}

/// Signed shoelace area of a closed vertex cycle.
pub fn shoelace(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let o = vertices[0];
    let mut acc = 0.0;
    for i in 1..n - 1 {
        acc += (vertices[i] - o).cross(vertices[i + 1] - o);
    }
    0.5 * acc
}

/// Counterclockwise convex polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validates: at least three vertices, all finite, pairwise distinct and
    /// strictly convex in counterclockwise order.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!("{n} vertices, need at least 3")));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(*p));
        }
        let diam = bbox_diameter(&vertices);
        for i in 0..n {
            for j in i + 1..n {
                if vertices[i].dist(vertices[j]) <= EPS_GEOM * diam {
                    return Err(Error::InvalidPolygon(format!(
                        "vertices {i} and {j} coincide"
                    )));
                }
            }
        }
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if orientation(a, b, c) != Orientation::CounterClockwise {
                return Err(Error::InvalidPolygon(format!(
                    "not strictly convex counterclockwise at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    /// Axis-aligned unit square `[0,1]²`.
    pub fn unit_square() -> Self {
        ConvexPolygon {
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
        }
    }

    fn from_clipped(vertices: Vec<Point2>) -> Self {
        ConvexPolygon { vertices }
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

    /// Directed edges `(v_i, v_{i+1})`, wrapping around.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    pub fn diameter(&self) -> f64 {
        bbox_diameter(&self.vertices)
    }

    /// Signed distance-like test: `true` when `p` is inside or on the boundary
    /// within tolerance `tol` (absolute length).
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.edges().all(|(a, b)| {
            let e = b - a;
            e.cross(p - a) >= -tol * e.norm()
        })
    }

    /// Distance from `p` to the closest boundary edge (unsigned).
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<Point2>> for ConvexPolygon {
    type Error = Error;
    fn try_from(v: Vec<Point2>) -> Result<Self> {
        ConvexPolygon::new(v)
    }
}

impl From<ConvexPolygon> for Vec<Point2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let e = b - a;
    let len2 = e.dot(e);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    p.dist(a + e * t)
}

/// Diagonal of the axis-aligned bounding box.
pub fn bbox_diameter(points: &[Point2]) -> f64 {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Point2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
        hi = Point2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
    }
    if points.is_empty() {
        0.0
    } else {
        (hi - lo).norm()
    }
}

/// Half-plane `{x : normal·x ≤ offset}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: Point2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: Point2, offset: f64) -> Self {
        HalfPlane { normal, offset }
    }

    /// Points at least as close to `p` as to `q`.
    pub fn bisector(p: Point2, q: Point2) -> Self {
        let normal = q - p;
        HalfPlane {
            normal,
            offset: 0.5 * (q.dot(q) - p.dot(p)),
        }
    }
}

/// Intersection of `poly` with a half-plane; `None` when empty or degenerate.
///
/// Vertices within tolerance of the cut line count as inside and are emitted
/// once; no intersection point is generated next to them.
pub fn clip_convex(poly: &ConvexPolygon, h: HalfPlane) -> Option<ConvexPolygon> {
    let verts = poly.vertices();
    let n = verts.len();
    let nn = h.normal.norm();
    if nn == 0.0 {
        return if h.offset >= 0.0 { Some(poly.clone()) } else { None };
    }
    let scale = verts.iter().map(|p| p.max_abs()).fold(0.0, f64::max).max(h.offset.abs() / nn);
    let tol = EPS_GEOM * nn * scale.max(poly.diameter());
    let side: Vec<f64> = verts.iter().map(|&p| h.normal.dot(p) - h.offset).collect();

    if side.iter().all(|&s| s <= tol) {
        return Some(poly.clone());
    }
    if side.iter().all(|&s| s >= -tol) {
        return None;
    }

    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let (p, q) = (verts[i], verts[j]);
        let (sp, sq) = (side[i], side[j]);
        if sp <= tol {
            out.push(p);
        }
        if (sp < -tol && sq > tol) || (sp > tol && sq < -tol) {
            let t = sp / (sp - sq);
            out.push(p + (q - p) * t);
        }
    }
    // drop near-duplicates created by cuts grazing a vertex
    let merge = EPS_GEOM * poly.diameter().max(1e-300);
    let mut dedup: Vec<Point2> = Vec::with_capacity(out.len());
    for p in out {
        if dedup.last().is_none_or(|l: &Point2| l.dist(p) > merge) {
            dedup.push(p);
        }
    }
    while dedup.len() > 1 && dedup[0].dist(*dedup.last().unwrap()) <= merge {
        dedup.pop();
    }
    if dedup.len() < 3 || shoelace(&dedup) <= 0.0 {
        return None;
    }
    Some(ConvexPolygon::from_clipped(dedup))
}

/// Positive shoelace area.
pub fn polygon_area(poly: &ConvexPolygon) -> f64 {
    shoelace(poly.vertices()).abs()
}

/// Crossing point of the open segments `pq` and `rs`, if they cross in a
/// single interior point.
pub fn segment_cross(p: Point2, q: Point2, r: Point2, s: Point2) -> Option<Point2> {
    let d1 = q - p;
    let d2 = s - r;
    let denom = d1.cross(d2);
    let scale = d1.norm() * d2.norm();
    if denom.abs() <= EPS_GEOM * scale || scale == 0.0 {
        return None;
    }
    let w = r - p;
    let t = w.cross(d2) / denom;
    let u = w.cross(d1) / denom;
    let eps = EPS_GEOM;
    if t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps {
        Some(p + d1 * t)
    } else {
        None
    }
}
