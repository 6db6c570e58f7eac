//! Uni-modal, multi-modal and graspability predictors: assembly, two-stage
//! training, inference and fold evaluation.

mod infer;
mod model;
mod train;

pub use infer::{
    evaluate_fold, evaluate_graspability, graspability_set, predict_grasp, predict_graspability, query_inputs,
    query_side, regression_inputs, regression_set, regression_target, FoldEval, GraspPredictor, Gripper, Outcome,
    Prediction, TrainedModel,
};
pub use model::{
    build_model, BackboneSpec, HeadActivation, HeadSpec, ModelGraph, ModelSpec, StageSpec, Variant,
};
pub use train::{
    train, EpochLog, FineTuneConfig, PlateauConfig, StageConfig, Targets, TrainHistory, TrainPlan, TrainingSet,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::preprocess::PreprocessError;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("model specification: {0}")]
    Spec(String),
    #[error(transparent)]
    Nn(#[from] graspnet_nn::NnError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("fold {0} has no samples")]
    EmptyFold(usize),
    #[error("training aborted in stage {stage}, epoch {epoch}, batch {batch} at {layer}: {detail}")]
    TrainingAborted {
        stage: u8,
        epoch: usize,
        batch: usize,
        layer: String,
        detail: String,
    },
}
