//! Synthetic data, cross-validation, timing and report files.

mod crossval;
mod report;
mod synthetic;
mod timing;

pub use crossval::{evaluate, fit, load_trained, run_crossval, save_trained, CrossvalRun, Fitted};
pub use report::{
    emit_report, validate_report_json, write_outcomes_csv, FOLD_CSV, OUTCOMES_CSV, REPORT_JSON,     EvalReport, FoldReport, FpsReport, SplitReport,
};
pub use synthetic::{
    archetype_count, gen_synthetic, synthetic_gripper, write_cornell_layout, Bar, SyntheticScene, MIN_SIZE,
};
pub use timing::{time_inference, EnvFingerprint};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::RunConfig;
use crate::cornell::{load_dataset, DataError, LoadOptions, RgbdSample};
use crate::predictor::PredictError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error("i/o: {0}")]
    Io(String),
}

impl BenchError {
    /// Configuration problems, whichever layer detected them.
    pub fn is_config(&self) -> bool {
        matches!(self, BenchError::Config(_) | BenchError::Predict(PredictError::Spec(_)))
    }

    pub fn is_training_abort(&self) -> bool {
        matches!(self, BenchError::Predict(PredictError::TrainingAborted { .. }))
    }
}

/// Where samples come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Cornell(PathBuf),
    /// Generated from the config's `synthetic` block.
    Synthetic,
}

impl DataSource {
    /// `synthetic` or a directory path.
    pub fn parse(arg: &str) -> DataSource {
        if arg == "synthetic" {
            DataSource::Synthetic
        } else {
            DataSource::Cornell(PathBuf::from(arg))
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataSource::Cornell(p) => p.display().to_string(),
            DataSource::Synthetic => "synthetic".into(),
        }
    }

    pub fn load(&self, cfg: &RunConfig) -> Result<Vec<RgbdSample>, BenchError> {
        match self {
            DataSource::Cornell(root) => Ok(load_cornell(root)?),
            DataSource::Synthetic => {
                let s = cfg.synthetic;
                Ok(gen_synthetic(s.n, s.size, s.seed)?.into_iter().map(|sc| sc.sample).collect())
            }
        }
    }
}

fn load_cornell(root: &Path) -> Result<Vec<RgbdSample>, DataError> {
    Ok(load_dataset(root, &LoadOptions::default())?.samples)
}
