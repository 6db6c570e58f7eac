//! Cornell-layout dataset ingestion and cross-validation split plans.

mod dataset;
mod pcd;
mod rectfile;
mod split;

pub use dataset::{
    load_dataset, object_id_fallback, IdSource, LoadOptions, LoadReport, LoadedDataset, RgbdSample,
    SkippedSample,
};
pub use pcd::{parse_pcd_str, parse_pcd_to_depth, DepthSource};
pub use rectfile::{parse_rect_file, parse_rect_str, RectParse};
pub use split::{make_splits, Identified, SplitMode, SplitPlan, FOLDS, SHUFFLE_ALGORITHM};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: cannot decode image: {message}")]
    Image { path: PathBuf, message: String },
    #[error("no complete samples under {0}")]
    NoSamples(PathBuf),
    #[error("sample {id} appears twice: {first} and {second}")]
    DuplicateSample {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("split: {0}")]
    Split(String),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        DataError::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
