use graspnet_nn::{softmax, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelGraph, PredictError, Targets, TrainingSet, Variant};
use crate::cornell::RgbdSample;
use crate::geometry::{rectangle_metric, GraspRect, MetricConfig, Point};
use crate::preprocess::{
    decode_output, encode_target, prepare_input, prepare_oriented, NetInput, PatchPolicy, PreprocessConfig,
    TargetVec,
};

/// Fixed plate height and opening of the end effector, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gripper {
    pub h: f64,
    pub w: f64,
}

impl Gripper {
    /// Mean extents over every positive grasp.
    pub fn mean_of<'a>(samples: impl IntoIterator<Item = &'a RgbdSample>) -> Option<Gripper> {
        let (mut h, mut w, mut n) = (0.0, 0.0, 0usize);
        for g in samples.into_iter().flat_map(|s| &s.positive_grasps) {
            h += g.h();
            w += g.w();
            n += 1;
        }
        (n > 0).then(|| Gripper {
            h: h / n as f64,
            w: w / n as f64,
        })
    }
}

/// The positive grasp whose center is nearest the mean positive center;
/// ties go to the earliest.
pub fn regression_target(sample: &RgbdSample) -> Option<GraspRect> {
    let pos = &sample.positive_grasps;
    if pos.is_empty() {
        return None;
    }
    let n = pos.len() as f64;
    let mean = Point::new(pos.iter().map(|g| g.x()).sum::<f64>() / n, pos.iter().map(|g| g.y()).sum::<f64>() / n);
    let mut best = pos[0];
    for g in &pos[1..] {
        if g.center().distance(&mean) < best.center().distance(&mean) {
            best = *g;
        }
    }
    Some(best)
}

fn image_center(sample: &RgbdSample) -> Point {
    Point::new(sample.width() as f64 / 2.0, sample.height() as f64 / 2.0)
}

/// Per-branch inputs for whole-image grasp regression. Grasp-centered
/// policies crop around the image center here; patches around grasp points
/// belong to graspability queries.
pub fn regression_inputs(
    sample: &RgbdSample,
    cfg: &PreprocessConfig,
    variant: Variant,
) -> Result<Vec<NetInput>, PredictError> {
    variant
        .modalities(cfg.modality)
        .into_iter()
        .map(|m| Ok(prepare_input(sample, cfg, m, Some(image_center(sample)))?))
        .collect()
}

/// Side of the source square around a graspability candidate.
pub fn query_side(cfg: &PreprocessConfig) -> Result<f64, PredictError> {
    match cfg.patch_policy {
        PatchPolicy::GraspCentered { patch_size } => Ok(patch_size as f64),
        PatchPolicy::FullImage => Err(PredictError::Spec(
            "graspability queries need patch_policy grasp_centered with a patch_size".into(),
        )),
    }
}

pub fn query_inputs(
    sample: &RgbdSample,
    cfg: &PreprocessConfig,
    candidate: &GraspRect,
) -> Result<Vec<NetInput>, PredictError> {
    let side = query_side(cfg)?;
    Variant::Graspability
        .modalities(cfg.modality)
        .into_iter()
        .map(|m| Ok(prepare_oriented(sample, m, candidate, side, cfg.input_size)?))
        .collect()
}

/// Regression examples; samples without a positive grasp, or whose target
/// falls outside the input frame, are left out and counted.
pub fn regression_set(
    samples: &[&RgbdSample],
    cfg: &PreprocessConfig,
    variant: Variant,
) -> Result<(TrainingSet, usize), PredictError> {
    let prepared: Vec<Option<(Vec<Tensor>, Vec<f64>)>> = samples
        .par_iter()
        .map(|s| {
            let Some(target) = regression_target(s) else {
                return Ok(None);
            };
            let inputs = regression_inputs(s, cfg, variant)?;
            let Ok(t) = encode_target(&target, &inputs[0].frame) else {
                return Ok(None);
            };
            let pixels = inputs.into_iter().map(|i| i.pixels).collect();
            Ok(Some((pixels, t.to_vec(cfg.angle_encoding))))
        })
        .collect::<Result<_, PredictError>>()?;
    let skipped = prepared.iter().filter(|p| p.is_none()).count();
    let (inputs, rows): (Vec<_>, Vec<_>) = prepared.into_iter().flatten().unzip();
    Ok((
        TrainingSet {
            inputs,
            targets: Targets::Regression(rows),
        },
        skipped,
    ))
}

/// One example per annotated rectangle: positives labeled 1, negatives 0.
pub fn graspability_set(samples: &[&RgbdSample], cfg: &PreprocessConfig) -> Result<TrainingSet, PredictError> {
    let per_sample: Vec<Vec<(Vec<Tensor>, usize)>> = samples
        .par_iter()
        .map(|s| {
            labeled_queries(s)
                .map(|(g, label)| {
                    let inputs = query_inputs(s, cfg, &g)?;
                    Ok((inputs.into_iter().map(|i| i.pixels).collect(), label))
                })
                .collect::<Result<Vec<_>, PredictError>>()
        })
        .collect::<Result<_, _>>()?;
    let (inputs, labels): (Vec<_>, Vec<_>) = per_sample.into_iter().flatten().unzip();
    Ok(TrainingSet {
        inputs,
        targets: Targets::Classes(labels),
    })
}

fn labeled_queries(s: &RgbdSample) -> impl Iterator<Item = (GraspRect, usize)> + '_ {
    let pos = s.positive_grasps.iter().map(|g| (*g, 1));
    pos.chain(s.negative_grasps.iter().map(|g| (*g, 0)))
}

/// A predicted grasp and whether its center had to be pulled into the image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub rect: GraspRect,
    pub clamped: bool,
}

fn batch_of_one(inputs: &[NetInput]) -> Result<Vec<Tensor>, PredictError> {
    inputs
        .iter()
        .map(|i| {
            let mut shape = vec![1];
            shape.extend_from_slice(i.pixels.shape());
            Ok(i.pixels.clone().reshape(&shape)?)
        })
        .collect()
}

/// Preprocess, evaluation-mode forward pass, decode. The center is clamped
/// into the image when the regressor overshoots.
pub fn predict_grasp(
    model: &ModelGraph,
    cfg: &PreprocessConfig,
    sample: &RgbdSample,
    fixed_h: f64,
    fixed_w: f64,
) -> Result<Prediction, PredictError> {
    if model.spec.variant == Variant::Graspability {
        return Err(PredictError::Spec("graspability models do not regress grasps".into()));
    }
    let inputs = regression_inputs(sample, cfg, model.spec.variant)?;
    let batch = batch_of_one(&inputs)?;
    let refs: Vec<&Tensor> = batch.iter().collect();
    let out = model.infer(&refs)?;
    let values: Vec<f64> = out.data().iter().map(|&v| v as f64).collect();
    let v = TargetVec::from_slice(&values, cfg.angle_encoding)?;
    let rect = decode_output(&v, &inputs[0].frame, fixed_h, fixed_w)?;
    let max_x = (sample.width() as f64 - 1.0).max(0.0);
    let max_y = (sample.height() as f64 - 1.0).max(0.0);
    let (x, y) = (rect.x().clamp(0.0, max_x), rect.y().clamp(0.0, max_y));
    Ok(Prediction {
        rect: rect.with_center(x, y),
        clamped: x != rect.x() || y != rect.y(),
    })
}

/// Probability that `candidate` is a successful grasp.
pub fn predict_graspability(
    model: &ModelGraph,
    cfg: &PreprocessConfig,
    sample: &RgbdSample,
    candidate: &GraspRect,
) -> Result<f64, PredictError> {
    if model.spec.variant != Variant::Graspability {
        return Err(PredictError::Spec(format!("{:?} models have no graspability head", model.spec.variant)));
    }
    let inputs = query_inputs(sample, cfg, candidate)?;
    let batch = batch_of_one(&inputs)?;
    let refs: Vec<&Tensor> = batch.iter().collect();
    let probs = softmax(&model.infer(&refs)?)?;
    Ok(probs.data()[1] as f64)
}

/// Anything that maps a sample to one grasp.
pub trait GraspPredictor: Sync {
    fn predict(&self, sample: &RgbdSample) -> Result<Prediction, PredictError>;
}

/// A model with the preprocessing and gripper geometry it was trained with.
pub struct TrainedModel {
    pub model: ModelGraph,
    pub preprocess: PreprocessConfig,
    pub gripper: Gripper,
}

impl GraspPredictor for TrainedModel {
    fn predict(&self, sample: &RgbdSample) -> Result<Prediction, PredictError> {
        predict_grasp(&self.model, &self.preprocess, sample, self.gripper.h, self.gripper.w)
    }
}

/// One row of the per-sample outcome table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub fold: usize,
    pub sample_id: String,
    /// Index of the queried rectangle (graspability only).
    pub query: Option<usize>,
    pub success: bool,
    pub jaccard: Option<f64>,
    pub angle_delta: Option<f64>,
    pub matched_index: Option<usize>,
    pub clamped: bool,
    pub pred_x: Option<f64>,
    pub pred_y: Option<f64>,
    pub pred_theta: Option<f64>,
    /// Ground-truth label of the query (graspability only).
    pub label: Option<bool>,
    pub probability: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldEval {
    pub accuracy: f64,
    pub outcomes: Vec<Outcome>,
}

fn accuracy(outcomes: &[Outcome]) -> f64 {
    outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64
}

/// Rectangle-metric accuracy of `predictor` over `samples`.
pub fn evaluate_fold<P: GraspPredictor + ?Sized>(
    predictor: &P,
    samples: &[&RgbdSample],
    metric: &MetricConfig,
    fold: usize,
) -> Result<FoldEval, PredictError> {
    if samples.is_empty() {
        return Err(PredictError::EmptyFold(fold));
    }
    let outcomes: Vec<Outcome> = samples
        .par_iter()
        .map(|s| {
            let p = predictor.predict(s)?;
            let m = rectangle_metric(&p.rect, &s.positive_grasps, metric)?;
            Ok(Outcome {
                fold,
                sample_id: s.id.clone(),
                query: None,
                success: m.success,
                jaccard: Some(m.jaccard),
                angle_delta: Some(m.angle_delta),
                matched_index: m.matched_index,
                clamped: p.clamped,
                pred_x: Some(p.rect.x()),
                pred_y: Some(p.rect.y()),
                pred_theta: Some(p.rect.theta()),
                label: None,
                probability: None,
            })
        })
        .collect::<Result<_, PredictError>>()?;
    Ok(FoldEval {
        accuracy: accuracy(&outcomes),
        outcomes,
    })
}

/// Query accuracy of a graspability model at the 0.5 threshold over every
/// annotated rectangle of `samples`.
pub fn evaluate_graspability(
    model: &ModelGraph,
    cfg: &PreprocessConfig,
    samples: &[&RgbdSample],
    fold: usize,
) -> Result<FoldEval, PredictError> {
    if samples.is_empty() {
        return Err(PredictError::EmptyFold(fold));
    }
    let per_sample: Vec<Vec<Outcome>> = samples
        .par_iter()
        .map(|s| {
            labeled_queries(s)
                .enumerate()
                .map(|(q, (g, label))| {
                    let p = predict_graspability(model, cfg, s, &g)?;
                    Ok(Outcome {
                        fold,
                        sample_id: s.id.clone(),
                        query: Some(q),
                        success: (p >= 0.5) == (label == 1),
                        jaccard: None,
                        angle_delta: None,
                        matched_index: None,
                        clamped: false,
                        pred_x: Some(g.x()),
                        pred_y: Some(g.y()),
                        pred_theta: Some(g.theta()),
                        label: Some(label == 1),
                        probability: Some(p),
                    })
                })
                .collect::<Result<Vec<_>, PredictError>>()
        })
        .collect::<Result<_, _>>()?;
    let outcomes: Vec<Outcome> = per_sample.into_iter().flatten().collect();
    if outcomes.is_empty() {
        return Err(PredictError::EmptyFold(fold));
    }
    Ok(FoldEval {
        accuracy: accuracy(&outcomes),
        outcomes,
    })
}
