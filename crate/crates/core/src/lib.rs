//! Grasp detection toolkit: rectangle geometry and metrics, Cornell-layout
//! ingestion, preprocessing, residual grasp predictors and a
//! cross-validation harness.

pub mod bench;
pub mod config;
pub mod cornell;
pub mod geometry;
pub mod predictor;
pub mod preprocess;
pub mod raster;

pub use cornell::{DataError, RgbdSample, SplitMode, SplitPlan};
pub use geometry::{GraspRect, MetricConfig};
pub use raster::{DepthMap, Raster};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rectangles.md")]
    mod rectangles {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/predictors.md")]
    mod predictors {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
}
