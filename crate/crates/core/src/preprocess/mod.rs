//! Raw samples to fixed-size network inputs and regression targets.

mod channels;
mod patch;
mod target;

pub use channels::{depth_to_3channel, rescale_depth, to_rgd};
pub use patch::{extract_oriented_patch, extract_patch, resize_bilinear, Patch};
pub use target::{decode_output, encode_target, l2_normalize, AngleEncoding, PatchFrame, TargetVec};

use graspnet_nn::{Scalar, Tensor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cornell::RgbdSample;
use crate::geometry::{GraspRect, Point};
use crate::raster::Raster;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("depth raster has no observed value")]
    AllDepthMissing,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("preprocessing configuration: {0}")]
    Config(String),
    #[error("angle vector is zero; orientation undefined")]
    UndefinedAngle,
    #[error("non-finite values in {0}")]
    NonFinite(String),
}

/// Channel content of a 3-channel network input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Rgb,
    /// Blue replaced by rescaled depth.
    Rgd,
    /// Rescaled depth in all three channels.
    Depth3,
}

/// Which source square becomes the network input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatchPolicy {
    /// The whole image, zero-padded to a centered square.
    #[default]
    FullImage,
    /// A square of `patch_size` source pixels around a grasp center.
    GraspCentered { patch_size: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    #[serde(default = "PreprocessConfig::default_input_size")]
    pub input_size: usize,
    #[serde(default)]
    pub modality: Modality,
    #[serde(default)]
    pub patch_policy: PatchPolicy,
    #[serde(default)]
    pub angle_encoding: AngleEncoding,
}

impl PreprocessConfig {
    fn default_input_size() -> usize {
        224
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.input_size < 2 {
            return Err(PreprocessError::Config(format!("input_size {} is too small", self.input_size)));
        }
        if let PatchPolicy::GraspCentered { patch_size: 0 } = self.patch_policy {
            return Err(PreprocessError::Config("patch_size must be positive".into()));
        }
        Ok(())
    }
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            input_size: Self::default_input_size(),
            modality: Modality::default(),
            patch_policy: PatchPolicy::default(),
            angle_encoding: AngleEncoding::default(),
        }
    }
}

/// A `3 × S × S` input in `[0, 1]` and where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct NetInput {
    pub pixels: Tensor,
    pub modality: Modality,
    pub frame: PatchFrame,
}

impl NetInput {
    pub fn crop_origin(&self) -> Point {
        self.frame.origin
    }

    pub fn scale(&self) -> f64 {
        self.frame.scale
    }
}

/// Source-resolution 3-channel planes in `[0, 1]` for `modality`.
pub fn source_planes(sample: &RgbdSample, modality: Modality) -> Result<Raster<f64>, PreprocessError> {
    let planes = match modality {
        Modality::Rgb => sample.rgb.clone(),
        Modality::Rgd => to_rgd(&sample.rgb, &rescale_depth(&sample.depth)?)?,
        Modality::Depth3 => depth_to_3channel(&rescale_depth(&sample.depth)?),
    };
    Ok(planes.map(|v| v as f64 / 255.0))
}

/// HWC raster to a CHW tensor.
pub fn to_tensor(r: &Raster<f64>) -> Tensor {
    let (h, w, c) = (r.height(), r.width(), r.channels());
    let mut data = Vec::with_capacity(h * w * c);
    for k in 0..c {
        for row in 0..h {
            for col in 0..w {
                data.push(r.get(row, col, k) as Scalar);
            }
        }
    }
    Tensor::new(&[c, h, w], data).expect("length matches shape")
}

fn finish(r: Raster<f64>, modality: Modality, frame: PatchFrame) -> Result<NetInput, PreprocessError> {
    if r.data().iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
        return Err(PreprocessError::NonFinite("network input".into()));
    }
    Ok(NetInput {
        pixels: to_tensor(&r),
        modality,
        frame,
    })
}

/// Builds the network input for `sample` under `cfg.patch_policy`. Grasp-
/// centered patches need `center`.
pub fn prepare_input(
    sample: &RgbdSample,
    cfg: &PreprocessConfig,
    modality: Modality,
    center: Option<Point>,
) -> Result<NetInput, PreprocessError> {
    cfg.validate()?;
    let planes = source_planes(sample, modality)?;
    let (w, h) = (planes.width(), planes.height());
    let (patch, side) = match cfg.patch_policy {
        PatchPolicy::FullImage => {
            let side = w.max(h);
            let origin = (-(((side - w) / 2) as i64), -(((side - h) / 2) as i64));
            (
                Patch {
                    raster: patch::crop(&planes, origin, side, 0.0),
                    origin,
                },
                side,
            )
        }
        PatchPolicy::GraspCentered { patch_size } => {
            let center = center.ok_or_else(|| {
                PreprocessError::Config("grasp-centered patches need a center".into())
            })?;
            (extract_patch(&planes, center, patch_size, 0.0)?, patch_size)
        }
    };
    let frame = PatchFrame {
        origin: Point::new(patch.origin.0 as f64, patch.origin.1 as f64),
        patch_size: side as f64,
        scale: cfg.input_size as f64 / side as f64,
    };
    finish(resize_bilinear(&patch.raster, cfg.input_size)?, modality, frame)
}

/// Input for a graspability query: a `side`-pixel square around the
/// candidate, rotated so its horizontal axis follows the candidate angle.
pub fn prepare_oriented(
    sample: &RgbdSample,
    modality: Modality,
    candidate: &GraspRect,
    side: f64,
    input_size: usize,
) -> Result<NetInput, PreprocessError> {
    let planes = source_planes(sample, modality)?;
    let r = extract_oriented_patch(&planes, candidate.center(), candidate.theta(), side, input_size)?;
    let frame = PatchFrame {
        origin: Point::new(candidate.x() - side / 2.0, candidate.y() - side / 2.0),
        patch_size: side,
        scale: input_size as f64 / side,
    };
    finish(r, modality, frame)
}
