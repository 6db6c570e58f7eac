use serde::{Deserialize, Serialize};

use super::{convex_intersection_area, GeometryError, GraspRect};

/// Thresholds of the rectangle and point metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// Degrees; a match needs a strictly smaller orientation difference.
    #[serde(default = "MetricConfig::default_angle")]
    pub angle_threshold: f64,
    /// A match needs a strictly larger Jaccard index.
    #[serde(default = "MetricConfig::default_jaccard")]
    pub jaccard_threshold: f64,
    /// Pixels. No default exists; the point metric refuses to run without one.
    #[serde(default)]
    pub point_distance_threshold: Option<f64>,
}

impl MetricConfig {
    fn default_angle() -> f64 {
        30.0
    }

    fn default_jaccard() -> f64 {
        0.25
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.angle_threshold > 0.0 && self.angle_threshold <= 90.0) {
            return Err(GeometryError::InvalidConfig(format!(
                "angle_threshold must lie in (0, 90], got {}",
                self.angle_threshold
            )));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(GeometryError::InvalidConfig(format!(
                "jaccard_threshold must lie in (0, 1], got {}",
                self.jaccard_threshold
            )));
        }
        if let Some(d) = self.point_distance_threshold {
            if !(d > 0.0 && d.is_finite()) {
                return Err(GeometryError::InvalidConfig(format!(
                    "point_distance_threshold must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            angle_threshold: Self::default_angle(),
            jaccard_threshold: Self::default_jaccard(),
            point_distance_threshold: None,
        }
    }
}

/// Orientation difference of two grasps in degrees, in `[0, 90]`.
pub fn angle_delta(t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).abs().rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Intersection over union of two grasp rectangles.
pub fn jaccard(a: &GraspRect, b: &GraspRect) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = convex_intersection_area(&a.to_polygon(), &b.to_polygon());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Result of scoring one predicted grasp against a ground-truth set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectMatch {
    pub success: bool,
    /// Highest-Jaccard ground truth among those satisfying both thresholds.
    pub matched_index: Option<usize>,
    /// Index the `jaccard`/`angle_delta` fields refer to: the match on
    /// success, otherwise the ground truth with the highest Jaccard.
    pub reference_index: usize,
    pub jaccard: f64,
    pub angle_delta: f64,
}

/// Rectangle metric: success iff some ground truth is within the angle
/// threshold (strictly) and above the Jaccard threshold (strictly).
pub fn rectangle_metric(
    pred: &GraspRect,
    ground_truth: &[GraspRect],
    cfg: &MetricConfig,
) -> Result<RectMatch, GeometryError> {
    if ground_truth.is_empty() {
        return Err(GeometryError::EmptyGroundTruth);
    }
    let mut best_match: Option<(usize, f64, f64)> = None;
    let mut best_any = (0, f64::NEG_INFINITY, 0.0);
    for (i, g) in ground_truth.iter().enumerate() {
        let j = jaccard(pred, g);
        let d = angle_delta(pred.theta(), g.theta());
        if j > best_any.1 {
            best_any = (i, j, d);
        }
        if d < cfg.angle_threshold && j > cfg.jaccard_threshold && best_match.is_none_or(|(_, bj, _)| j > bj) {
            best_match = Some((i, j, d));
        }
    }
    Ok(match best_match {
        Some((i, j, d)) => RectMatch {
            success: true,
            matched_index: Some(i),
            reference_index: i,
            jaccard: j,
            angle_delta: d,
        },
        None => RectMatch {
            success: false,
            matched_index: None,
            reference_index: best_any.0,
            jaccard: best_any.1,
            angle_delta: best_any.2,
        },
    })
}

/// Point metric: success iff the nearest ground-truth center is strictly
/// closer than the configured distance.
pub fn point_metric(
    pred: &GraspRect,
    ground_truth: &[GraspRect],
    cfg: &MetricConfig,
) -> Result<bool, GeometryError> {
    let threshold = cfg.point_distance_threshold.ok_or(GeometryError::MissingPointThreshold)?;
    let nearest = ground_truth
        .iter()
        .map(|g| g.center().distance(&pred.center()))
        .min_by(f64::total_cmp)
        .ok_or(GeometryError::EmptyGroundTruth)?;
    Ok(nearest < threshold)
}

/// Highest-scoring candidate; ties go to the earliest entry.
pub fn select_best(candidates: &[(GraspRect, f64)]) -> Result<GraspRect, GeometryError> {
    let (first, rest) = candidates.split_first().ok_or(GeometryError::NoCandidates)?;
    let mut best = first;
    for c in rest {
        if c.1 > best.1 {
            best = c;
        }
    }
    Ok(best.0)
}
