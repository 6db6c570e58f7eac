use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::geometry::{canonical_degrees, GraspRect, Point};

/// How the grasp angle is regressed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleEncoding {
    /// `(cos 2θ, sin 2θ)`: continuous across the 0°/180° wrap.
    #[default]
    DoubleAngle,
    /// `θ / 180` as a single output.
    Raw,
}

impl AngleEncoding {
    /// Regression outputs per sample.
    pub fn width(self) -> usize {
        match self {
            AngleEncoding::DoubleAngle => 4,
            AngleEncoding::Raw => 3,
        }
    }
}

/// Geometry of the source square a network input was cut from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchFrame {
    /// Source position of the patch's top-left corner.
    pub origin: Point,
    /// Side of the source square in source pixels.
    pub patch_size: f64,
    /// Network input side over `patch_size`.
    pub scale: f64,
}

/// Regression target: patch-normalized center and doubled-angle vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetVec {
    pub tx: f64,
    pub ty: f64,
    pub c2t: f64,
    pub s2t: f64,
}

impl TargetVec {
    /// Network output layout for `encoding`.
    pub fn to_vec(&self, encoding: AngleEncoding) -> Vec<f64> {
        match encoding {
            AngleEncoding::DoubleAngle => vec![self.tx, self.ty, self.c2t, self.s2t],
            AngleEncoding::Raw => {
                let theta = canonical_degrees(0.5 * self.s2t.atan2(self.c2t).to_degrees());
                vec![self.tx, self.ty, theta / 180.0]
            }
        }
    }

    /// Inverse of [`TargetVec::to_vec`].
    pub fn from_slice(v: &[f64], encoding: AngleEncoding) -> Result<TargetVec, PreprocessError> {
        if v.len() != encoding.width() {
            return Err(PreprocessError::Shape(format!(
                "{encoding:?} output needs {} values, got {}",
                encoding.width(),
                v.len()
            )));
        }
        Ok(match encoding {
            AngleEncoding::DoubleAngle => TargetVec {
                tx: v[0],
                ty: v[1],
                c2t: v[2],
                s2t: v[3],
            },
            AngleEncoding::Raw => {
                let (s, c) = (2.0 * (v[2] * 180.0)).to_radians().sin_cos();
                TargetVec {
                    tx: v[0],
                    ty: v[1],
                    c2t: c,
                    s2t: s,
                }
            }
        })
    }
}

pub fn encode_target(g: &GraspRect, frame: &PatchFrame) -> Result<TargetVec, PreprocessError> {
    let tx = (g.x() - frame.origin.x) / frame.patch_size;
    let ty = (g.y() - frame.origin.y) / frame.patch_size;
    if !((0.0..=1.0).contains(&tx) && (0.0..=1.0).contains(&ty)) {
        return Err(PreprocessError::OutOfBounds(format!(
            "grasp center ({}, {}) outside the patch at ({}, {}) of side {}",
            g.x(),
            g.y(),
            frame.origin.x,
            frame.origin.y,
            frame.patch_size
        )));
    }
    let (s, c) = (2.0 * g.theta()).to_radians().sin_cos();
    Ok(TargetVec { tx, ty, c2t: c, s2t: s })
}

/// Back-projects a target into source pixels with externally fixed `h`, `w`.
pub fn decode_output(v: &TargetVec, frame: &PatchFrame, h: f64, w: f64) -> Result<GraspRect, PreprocessError> {
    if !(v.c2t.is_finite() && v.s2t.is_finite() && v.tx.is_finite() && v.ty.is_finite()) {
        return Err(PreprocessError::NonFinite("decoded output".into()));
    }
    if v.c2t.hypot(v.s2t) < 1e-12 {
        return Err(PreprocessError::UndefinedAngle);
    }
    let theta = 0.5 * v.s2t.atan2(v.c2t).to_degrees();
    let x = frame.origin.x + v.tx * frame.patch_size;
    let y = frame.origin.y + v.ty * frame.patch_size;
    GraspRect::new(x, y, h, w, theta).map_err(|e| PreprocessError::Config(e.to_string()))
}

/// Unit-length copy of `v`; the zero vector comes back unchanged.
pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> PatchFrame {
        PatchFrame {
            origin: Point::new(0.0, 0.0),
            patch_size: 10.0,
            scale: 1.0,
        }
    }

    #[test]
    fn centered_examples() {
        let g = GraspRect::new(5.0, 5.0, 1.0, 2.0, 0.0).unwrap();
        let t = encode_target(&g, &frame()).unwrap();
        assert_eq!((t.tx, t.ty, t.c2t, t.s2t), (0.5, 0.5, 1.0, 0.0));
        let g90 = GraspRect::new(5.0, 5.0, 1.0, 2.0, 90.0).unwrap();
        let t = encode_target(&g90, &frame()).unwrap();
        assert_eq!(t.c2t, -1.0);
        assert!(t.s2t.abs() < 1e-15);
    }

    #[test]
    fn half_turn_same_encoding() {
        let a = GraspRect::new(3.0, 4.0, 1.0, 2.0, 37.0).unwrap();
        let b = GraspRect::new(3.0, 4.0, 1.0, 2.0, 217.0).unwrap();
        assert_eq!(encode_target(&a, &frame()).unwrap(), encode_target(&b, &frame()).unwrap());
    }

    #[test]
    fn decode_examples() {
        let v = TargetVec { tx: 0.5, ty: 0.5, c2t: 1.0, s2t: 0.0 };
        let g = decode_output(&v, &frame(), 2.0, 3.0).unwrap();
        assert_eq!((g.x(), g.y(), g.theta(), g.h(), g.w()), (5.0, 5.0, 0.0, 2.0, 3.0));
        let zero = TargetVec { c2t: 0.0, s2t: 0.0, ..v };
        assert_eq!(decode_output(&zero, &frame(), 2.0, 3.0), Err(PreprocessError::UndefinedAngle));
    }

    #[test]
    fn outside_patch_rejected() {
        let g = GraspRect::new(11.0, 5.0, 1.0, 2.0, 0.0).unwrap();
        assert!(encode_target(&g, &frame()).is_err());
    }

    #[test]
    fn raw_layout_round_trip() {
        let t = TargetVec { tx: 0.2, ty: 0.7, c2t: (100f64).to_radians().cos(), s2t: (100f64).to_radians().sin() };
        let raw = t.to_vec(AngleEncoding::Raw);
        assert!((raw[2] - 50.0 / 180.0).abs() < 1e-12);
        let back = TargetVec::from_slice(&raw, AngleEncoding::Raw).unwrap();
        assert!((back.c2t - t.c2t).abs() < 1e-12 && (back.s2t - t.s2t).abs() < 1e-12);
        assert!(TargetVec::from_slice(&raw, AngleEncoding::DoubleAngle).is_err());
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_normalize(&[3.0, 4.0]), vec![0.6, 0.8]);
        assert_eq!(l2_normalize(&[0.0, 1.0]), vec![0.0, 1.0]);
        assert_eq!(l2_normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
