use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// `(b − a) × (p − a)`: positive when `p` is left of the directed line a→b.
#[inline]
fn side(a: Point, b: Point, p: Point) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates convexity and counter-clockwise orientation.
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "{} vertices, need at least 3",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(GeometryError::InvalidPolygon("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            let turn = side(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if turn < 0.0 {
                return Err(GeometryError::InvalidPolygon(format!(
                    "clockwise turn at vertex {}; polygon must be convex and counter-clockwise",
                    (i + 1) % n
                )));
            }
        }
        let poly = Polygon { vertices };
        if poly.area() <= 0.0 {
            return Err(GeometryError::InvalidPolygon("zero area".into()));
        }
        Ok(poly)
    }

    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Shoelace area; positive for counter-clockwise vertex order.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().max(0.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| side(self.vertices[i], self.vertices[(i + 1) % n], p) >= 0.0)
    }
}

fn shoelace(v: &[Point]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

/// Keeps the part of `subject` on the left of the directed line a→b.
fn clip_half_plane(subject: &[Point], a: Point, b: Point) -> Vec<Point> {
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let s = subject[i];
        let e = subject[(i + 1) % n];
        let ds = side(a, b, s);
        let de = side(a, b, e);
        let (s_in, e_in) = (ds >= 0.0, de >= 0.0);
        if s_in != e_in {
            let t = ds / (ds - de);
            out.push(Point::new(s.x + (e.x - s.x) * t, s.y + (e.y - s.y) * t));
        }
        if e_in {
            out.push(e);
        }
    }
    out
}

/// Area of `a ∩ b` for convex counter-clockwise polygons, by clipping `a`
/// against every edge half-plane of `b`. Disjoint or degenerate overlaps
/// give 0.
pub fn convex_intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    let clip = b.vertices();
    let n = clip.len();
    let mut current = a.vertices().to_vec();
    for i in 0..n {
        if current.len() < 3 {
            return 0.0;
        }
        current = clip_half_plane(&current, clip[i], clip[(i + 1) % n]);
    }
    shoelace(&current).max(0.0)
}
