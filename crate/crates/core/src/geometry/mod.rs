//! Grasp rectangles and the evaluation metrics defined on them.

mod metric;
mod polygon;
mod rect;

pub use metric::{
    angle_delta, jaccard, point_metric, rectangle_metric, select_best, MetricConfig, RectMatch,
};
pub use polygon::{convex_intersection_area, Point, Polygon};
pub use rect::{rect_corners, GraspRect};
pub(crate) use rect::canonical_degrees;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grasp rectangle: {0}")]
    InvalidRect(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("ground-truth set is empty; the annotation is unusable")]
    EmptyGroundTruth,
    #[error("no candidate grasps to select from")]
    NoCandidates,
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
    #[error("point metric needs an explicit distance threshold")]
    MissingPointThreshold,
}
