use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, Polygon};

/// Five-dimensional grasp configuration in image pixels.
///
/// `(x, y)` is the rectangle center, `w` the gripper opening measured along
/// the orientation `theta`, `h` the plate edge perpendicular to it. `theta`
/// is in degrees, canonical in `[0, 180)`: a parallel-plate grasp is
/// unchanged by a half-turn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRect")]
pub struct GraspRect {
    x: f64,
    y: f64,
    h: f64,
    w: f64,
    theta: f64,
}

#[derive(Deserialize)]
struct RawRect {
    x: f64,
    y: f64,
    h: f64,
    w: f64,
    theta: f64,
}

impl TryFrom<RawRect> for GraspRect {
    type Error = GeometryError;

    fn try_from(r: RawRect) -> Result<Self, Self::Error> {
        GraspRect::new(r.x, r.y, r.h, r.w, r.theta)
    }
}

/// Reduces any angle in degrees to `[0, 180)`.
pub(crate) fn canonical_degrees(theta: f64) -> f64 {
    let t = theta.rem_euclid(180.0);
    // rem_euclid can round up to exactly 180 for tiny negative inputs
    if t >= 180.0 {
        0.0
    } else {
        t
    }
}

impl GraspRect {
    pub fn new(x: f64, y: f64, h: f64, w: f64, theta: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(GeometryError::InvalidRect(format!(
                "non-finite center or angle ({x}, {y}, {theta})"
            )));
        }
        if !(h > 0.0 && w > 0.0 && h.is_finite() && w.is_finite()) {
            return Err(GeometryError::InvalidRect(format!(
                "extents must be positive, got h={h} w={w}"
            )));
        }
        Ok(GraspRect {
            x,
            y,
            h,
            w,
            theta: canonical_degrees(theta),
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.h * self.w
    }

    /// Same rectangle moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> GraspRect {
        GraspRect {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Same extents at a new center.
    pub fn with_center(&self, x: f64, y: f64) -> GraspRect {
        GraspRect { x, y, ..*self }
    }

    /// Rotated by `degrees` about `pivot`.
    pub fn rotated_about(&self, pivot: Point, degrees: f64) -> GraspRect {
        let (s, c) = degrees.to_radians().sin_cos();
        let (dx, dy) = (self.x - pivot.x, self.y - pivot.y);
        GraspRect {
            x: pivot.x + c * dx - s * dy,
            y: pivot.y + s * dx + c * dy,
            theta: canonical_degrees(self.theta + degrees),
            ..*self
        }
    }

    /// The four corners, counter-clockwise (positive shoelace area).
    ///
    /// Edges 0→1 and 2→3 run along `theta` with length `w`; edges 1→2 and
    /// 3→0 carry the plate height `h`.
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.theta.to_radians().sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        let at = |u: f64, v: f64| Point::new(self.x + c * u - s * v, self.y + s * u + c * v);
        [at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)]
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon::from_ccw_unchecked(self.corners().to_vec())
    }
}

/// Corner polygon of a grasp rectangle.
pub fn rect_corners(g: &GraspRect) -> Polygon {
    g.to_polygon()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn same_set(a: &[Point], b: &[(f64, f64)]) -> bool {
        b.iter().all(|&(x, y)| a.iter().any(|p| (p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12))
    }

    #[test]
    fn axis_aligned_corners_in_order() {
        let g = GraspRect::new(2.0, 1.0, 2.0, 4.0, 0.0).unwrap();
        let c = g.corners();
        let expected = [(0.0, 0.0), (4.0, 0.0), (4.0, 2.0), (0.0, 2.0)];
        for (p, (x, y)) in c.iter().zip(expected) {
            assert!((p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn quarter_turn_swaps_extents() {
        let g = GraspRect::new(0.0, 0.0, 2.0, 4.0, 90.0).unwrap();
        let corners = g.corners();
        assert!(same_set(&corners, &[(1.0, -2.0), (1.0, 2.0), (-1.0, 2.0), (-1.0, -2.0)]));
    }

    #[test]
    fn rotation_preserves_area() {
        let g = GraspRect::new(0.0, 0.0, 1.0, 1.0, 45.0).unwrap();
        assert!((rect_corners(&g).area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn angle_is_canonical() {
        for (input, expected) in [(180.0, 0.0), (-30.0, 150.0), (370.0, 10.0), (-1e-20, 0.0)] {
            let g = GraspRect::new(0.0, 0.0, 1.0, 1.0, input).unwrap();
            assert!((g.theta() - expected).abs() < 1e-12, "{input} -> {}", g.theta());
            assert!((0.0..180.0).contains(&g.theta()));
        }
    }

    #[test]
    fn degenerate_extents_rejected() {
        assert!(GraspRect::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(GraspRect::new(0.0, 0.0, 1.0, -1.0, 0.0).is_err());
        assert!(GraspRect::new(f64::NAN, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn serde_revalidates() {
        let g = GraspRect::new(1.0, 2.0, 3.0, 4.0, 190.0).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<GraspRect>(&json).unwrap(), g);
        assert!(serde_json::from_str::<GraspRect>(r#"{"x":0,"y":0,"h":0,"w":1,"theta":0}"#).is_err());
    }
}
