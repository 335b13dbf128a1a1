//! Planar geometric primitives used as the collision kernel.
//!
//! All predicates use closed-set semantics: shapes that only touch along a
//! boundary are reported as intersecting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(&'static str),
    #[error("polygon is not simple: edges {0} and {1} cross")]
    NotSimple(usize, usize),
    #[error("polygon orientation must be counter-clockwise")]
    Orientation,
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Rotates about the origin by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point2::new(f64::INFINITY, f64::INFINITY),
            max: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point2>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.include(*p);
        }
        b
    }

    pub fn include(&mut self, p: Point2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        let mut b = *self;
        b.include(o.min);
        b.include(o.max);
        b
    }

    /// Closed overlap test.
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle2 {
    pub a: Point2,
    pub b: Point2,
    pub c: Point2,
}

impl Triangle2 {
    pub const fn new(a: Point2, b: Point2, c: Point2) -> Self {
        Self { a, b, c }
    }

    pub fn vertices(&self) -> [Point2; 3] {
        [self.a, self.b, self.c]
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * orient(self.a, self.b, self.c)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices())
    }

    /// Closed containment test.
    pub fn contains(&self, p: Point2) -> bool {
        let d1 = orient(self.a, self.b, p);
        let d2 = orient(self.b, self.c, p);
        let d3 = orient(self.c, self.a, p);
        let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
        let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
        !(has_neg && has_pos)
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> Triangle2 {
        Triangle2::new(f(self.a), f(self.b), f(self.c))
    }
}

/// A simple polygon with counter-clockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2 {
    vertices: Vec<Point2>,
}

impl Polygon2 {
    /// Validates finiteness, vertex count, simplicity and CCW orientation.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if vertices.len() < 3 {
            return Err(GeometryError::DegeneratePolygon("fewer than 3 vertices"));
        }
        let area = shoelace_area(&vertices);
        if area == 0.0 {
            return Err(GeometryError::DegeneratePolygon("zero area"));
        }
        if let Some((i, j)) = first_crossing(&vertices) {
            return Err(GeometryError::NotSimple(i, j));
        }
        if area < 0.0 {
            return Err(GeometryError::Orientation);
        }
        Ok(Self { vertices })
    }

    /// Like [`Polygon2::new`] but reverses clockwise input instead of rejecting it.
    pub fn new_any_orientation(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.len() >= 3 && shoelace_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self::new(vertices)
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        shoelace_area(&self.vertices)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges().map(|(a, b)| b.sub(a).norm()).fold(f64::INFINITY, f64::min)
    }
}

/// Signed polygon area; positive for counter-clockwise order.
pub fn shoelace_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        s += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * s
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection test.
pub fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn first_crossing(pts: &[Point2]) -> Option<(usize, usize)> {
    let n = pts.len();
    for i in 0..n {
        let (a1, a2) = (pts[i], pts[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (b1, b2) = (pts[j], pts[(j + 1) % n]);
            if adjacent {
                // Adjacent edges share one vertex; they may not fold back over each other.
                let (shared, other_a, other_b) = if j == i + 1 { (a2, a1, b2) } else { (a1, a2, b1) };
                let da = other_a.sub(shared);
                let db = other_b.sub(shared);
                if da.cross(db) == 0.0 && da.dot(db) > 0.0 {
                    return Some((i, j));
                }
                continue;
            }
            if segments_intersect(a1, a2, b1, b2) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Ear-clipping triangulation of a simple CCW polygon into `n - 2` triangles.
pub fn triangulate(poly: &Polygon2) -> Result<Vec<Triangle2>, GeometryError> {
    let pts = poly.vertices();
    if pts.len() < 3 {
        return Err(GeometryError::DegeneratePolygon("fewer than 3 vertices"));
    }
    if poly.area() <= 0.0 {
        return Err(GeometryError::DegeneratePolygon("zero area"));
    }
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut out = Vec::with_capacity(pts.len() - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = None;
        for k in 0..m {
            let (ip, ic, inx) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (pts[ip], pts[ic], pts[inx]);
            if orient(a, b, c) <= 0.0 {
                continue;
            }
            let tri = Triangle2::new(a, b, c);
            let blocked = idx
                .iter()
                .filter(|&&v| v != ip && v != ic && v != inx)
                .any(|&v| pts[v] != a && pts[v] != b && pts[v] != c && tri.contains(pts[v]));
            if !blocked {
                clipped = Some(k);
                break;
            }
        }
        // Only collinear vertices remain convex-less; drop one as a degenerate ear.
        let k = match clipped {
            Some(k) => k,
            None => (0..m)
                .find(|&k| {
                    let (a, b, c) = (pts[idx[(k + m - 1) % m]], pts[idx[k]], pts[idx[(k + 1) % m]]);
                    orient(a, b, c) == 0.0
                })
                .ok_or(GeometryError::DegeneratePolygon("no ear found"))?,
        };
        let (ip, ic, inx) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
        out.push(Triangle2::new(pts[ip], pts[ic], pts[inx]));
        idx.remove(k);
    }
    out.push(Triangle2::new(pts[idx[0]], pts[idx[1]], pts[idx[2]]));
    Ok(out)
}

fn project(tri: &Triangle2, axis: Point2) -> (f64, f64) {
    let p = [axis.dot(tri.a), axis.dot(tri.b), axis.dot(tri.c)];
    (p[0].min(p[1]).min(p[2]), p[0].max(p[1]).max(p[2]))
}

fn separated_on(t1: &Triangle2, t2: &Triangle2, axis: Point2) -> bool {
    if axis.x == 0.0 && axis.y == 0.0 {
        return false;
    }
    let (min1, max1) = project(t1, axis);
    let (min2, max2) = project(t2, axis);
    max1 < min2 || max2 < min1
}

fn candidate_axes(t: &Triangle2, out: &mut Vec<Point2>) {
    let v = t.vertices();
    let degenerate = orient(t.a, t.b, t.c) == 0.0;
    for i in 0..3 {
        let e = v[(i + 1) % 3].sub(v[i]);
        out.push(Point2::new(-e.y, e.x));
        if degenerate {
            out.push(e);
        }
    }
}

/// Closed triangle-triangle intersection via separating axes.
pub fn tri_intersects(t1: &Triangle2, t2: &Triangle2) -> bool {
    let mut axes = Vec::with_capacity(12);
    candidate_axes(t1, &mut axes);
    candidate_axes(t2, &mut axes);
    !axes.iter().any(|&ax| separated_on(t1, t2, ax))
}

/// Ray-casting containment; points on the boundary count as inside.
pub fn point_in_polygon(p: Point2, poly: &Polygon2) -> bool {
    let mut inside = false;
    for (a, b) in poly.edges() {
        if orient(a, b, p) == 0.0 && on_segment(a, b, p) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// A triangulated shape with cached bounding boxes.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub triangles: Vec<Triangle2>,
    pub boxes: Vec<Aabb>,
    pub bounds: Aabb,
}

impl TriMesh {
    pub fn new(triangles: Vec<Triangle2>) -> Self {
        let boxes: Vec<Aabb> = triangles.iter().map(Triangle2::aabb).collect();
        let bounds = boxes.iter().fold(Aabb::empty(), |acc, b| acc.union(b));
        Self { triangles, boxes, bounds }
    }

    pub fn from_polygon(poly: &Polygon2) -> Result<Self, GeometryError> {
        Ok(Self::new(triangulate(poly)?))
    }
}

/// True iff any triangle of `a` intersects any triangle of `b`.
pub fn polys_collide(a: &[Triangle2], b: &[Triangle2]) -> bool {
    let boxes_b: Vec<Aabb> = b.iter().map(Triangle2::aabb).collect();
    a.iter().any(|ta| {
        let ba = ta.aabb();
        b.iter()
            .zip(&boxes_b)
            .any(|(tb, bb)| ba.overlaps(bb) && tri_intersects(ta, tb))
    })
}

/// All-pairs variant of [`polys_collide`] without bounding-box culling.
pub fn polys_collide_unfiltered(a: &[Triangle2], b: &[Triangle2]) -> bool {
    a.iter().any(|ta| b.iter().any(|tb| tri_intersects(ta, tb)))
}

/// Mesh-level test with box culling, used on the collision hot path.
pub fn mesh_collides(tris: &[Triangle2], mesh: &TriMesh) -> bool {
    tris.iter().any(|t| {
        let bt = t.aabb();
        bt.overlaps(&mesh.bounds)
            && mesh
                .triangles
                .iter()
                .zip(&mesh.boxes)
                .any(|(m, bm)| bt.overlaps(bm) && tri_intersects(t, m))
    })
}
