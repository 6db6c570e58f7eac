use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{population_std, EvalReport, FoldReport, SplitReport};
use super::{time_inference, BenchError};
use crate::config::RunConfig;
use crate::cornell::{make_splits, RgbdSample};
use crate::predictor::{
    build_model, evaluate_fold, evaluate_graspability, graspability_set, regression_set, train, FoldEval, Gripper,
    Outcome, TrainHistory, TrainedModel, Variant,
};
use graspnet_nn::{load_weights, save_weights, Parameterized};

/// A trained model with its training record.
pub struct Fitted {
    pub trained: TrainedModel,
    pub history: TrainHistory,
    /// Training samples left out of the regression set.
    pub skipped: usize,
}

fn usable(variant: Variant, s: &RgbdSample) -> bool {
    match variant {
        Variant::Graspability => !(s.positive_grasps.is_empty() && s.negative_grasps.is_empty()),
        _ => !s.positive_grasps.is_empty(),
    }
}

/// Builds and trains a model for `cfg` on `samples`, seeding model and
/// batch order with `seed`.
pub fn fit(cfg: &RunConfig, samples: &[&RgbdSample], seed: u64) -> Result<Fitted, BenchError> {
    let mut spec = cfg.model_spec();
    spec.seed = seed;
    let mut model = build_model(&spec)?;
    let mut plan = cfg.plan();
    plan.seed = seed;
    let (set, skipped) = match cfg.variant {
        Variant::Graspability => (graspability_set(samples, &cfg.preprocessing)?, 0),
        v => regression_set(samples, &cfg.preprocessing, v)?,
    };
    let history = train(&mut model, &set, &plan)?;
    let gripper = match cfg.gripper {
        Some(g) => g,
        None => Gripper::mean_of(samples.iter().copied())
            .ok_or_else(|| BenchError::Config("no positive grasp to size the gripper from".into()))?,
    };
    Ok(Fitted {
        trained: TrainedModel {
            model,
            preprocess: cfg.preprocessing,
            gripper,
        },
        history,
        skipped,
    })
}

/// Rectangle-metric accuracy for regressors, query accuracy for the
/// graspability classifier.
pub fn evaluate(
    cfg: &RunConfig,
    trained: &TrainedModel,
    samples: &[&RgbdSample],
    fold: usize,
) -> Result<FoldEval, BenchError> {
    let samples: Vec<&RgbdSample> = samples.iter().copied().filter(|s| usable(cfg.variant, s)).collect();
    Ok(match cfg.variant {
        Variant::Graspability => evaluate_graspability(&trained.model, &trained.preprocess, &samples, fold)?,
        _ => evaluate_fold(trained, &samples, &cfg.metric, fold)?,
    })
}

pub struct CrossvalRun {
    pub report: EvalReport,
    pub outcomes: Vec<Outcome>,
}

struct FoldResult {
    report: FoldReport,
    eval: FoldEval,
    fitted: Fitted,
}

/// Five-fold cross-validation: train on four folds, evaluate the fifth.
/// Fold `k` seeds its model and batch order with `seed + k`, so parallel
/// and sequential runs agree. Timing uses the fold-0 model on its fold.
pub fn run_crossval(cfg: &RunConfig, samples: &[RgbdSample], source: &str) -> Result<CrossvalRun, BenchError> {
    let cfg = cfg.clone().resolved()?;
    let excluded = samples.iter().filter(|s| !usable(cfg.variant, s)).count();
    let pool: Vec<&RgbdSample> = samples.iter().filter(|s| usable(cfg.variant, s)).collect();
    let plan = make_splits(&pool, cfg.split.mode, cfg.split.seed)?;
    plan.check(&pool).map_err(crate::cornell::DataError::Split)?;

    let run_fold = |k: usize| -> Result<FoldResult, BenchError> {
        let (test, train_set): (Vec<&RgbdSample>, Vec<&RgbdSample>) =
            pool.iter().copied().partition(|s| plan.folds[k].binary_search_by(|id| cmp_ids(id, &s.id)).is_ok());
        if test.is_empty() || train_set.is_empty() {
            return Err(BenchError::Config(format!("fold {k} has no samples")));
        }
        let fitted = fit(&cfg, &train_set, cfg.seed.wrapping_add(k as u64))?;
        let eval = evaluate(&cfg, &fitted.trained, &test, k)?;
        Ok(FoldResult {
            report: FoldReport {
                index: k,
                accuracy: eval.accuracy,
                n: eval.outcomes.len(),
                skipped_training: fitted.skipped,
                clamped: eval.outcomes.iter().filter(|o| o.clamped).count(),
                history: fitted.history.clone(),
            },
            eval,
            fitted,
        })
    };
    let folds: Vec<FoldResult> = if cfg.parallel_folds {
        (0..plan.folds.len()).into_par_iter().map(run_fold).collect::<Result<_, _>>()?
    } else {
        (0..plan.folds.len()).map(run_fold).collect::<Result<_, _>>()?
    };

    let test0: Vec<&RgbdSample> = pool.iter().copied().filter(|s| plan.fold_of(&s.id) == Some(0)).collect();
    let fps = time_inference(&folds[0].fitted.trained, &test0, &cfg.timing)?;

    let accs: Vec<f64> = folds.iter().map(|f| f.report.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let mut outcomes = Vec::new();
    let mut fold_reports = Vec::new();
    for f in folds {
        outcomes.extend(f.eval.outcomes);
        fold_reports.push(f.report);
    }
    let report = EvalReport {
        split: SplitReport {
            mode: plan.mode,
            seed: plan.seed,
            algorithm: plan.algorithm.clone(),
            objects_confined_to_one_fold: plan.mode == crate::cornell::SplitMode::ObjectWise,
            folds: plan.folds,
        },
        config: cfg,
        source: source.to_string(),
        excluded_samples: excluded,
        folds: fold_reports,
        mean_accuracy: mean,
        std_accuracy: population_std(&accs),
        fps,
        outcomes_csv_path: super::report::OUTCOMES_CSV.into(),
    };
    Ok(CrossvalRun { report, outcomes })
}

/// Fold lists are sorted numerically first, then lexically.
fn cmp_ids(a: &str, b: &str) -> std::cmp::Ordering {
    let key = |s: &str| (s.parse::<u64>().unwrap_or(u64::MAX), s.to_string());
    key(a).cmp(&key(b))
}

#[derive(Serialize, Deserialize)]
struct ModelCard {
    config: RunConfig,
    gripper: Gripper,
}

const WEIGHTS: &str = "weights.bin";
const CARD: &str = "model.json";

/// Writes `weights.bin` and a `model.json` holding config and gripper.
pub fn save_trained(dir: &Path, cfg: &RunConfig, trained: &TrainedModel) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    let card = ModelCard {
        config: RunConfig {
            seed: trained.model.spec.seed,
            ..cfg.clone()
        },
        gripper: trained.gripper,
    };
    let path = dir.join(CARD);
    let text = serde_json::to_string_pretty(&card).expect("model card serializes");
    fs::write(&path, text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    save_weights(&trained.model.params(), dir.join(WEIGHTS)).map_err(crate::predictor::PredictError::from)?;
    Ok(())
}

pub fn load_trained(dir: &Path) -> Result<(RunConfig, TrainedModel), BenchError> {
    let path = dir.join(CARD);
    let text = fs::read_to_string(&path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let card: ModelCard =
        serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    let cfg = card.config.resolved()?;
    let mut model = build_model(&cfg.model_spec())?;
    load_weights(&mut model.params_mut(), dir.join(WEIGHTS)).map_err(crate::predictor::PredictError::from)?;
    let trained = TrainedModel {
        model,
        preprocess: cfg.preprocessing,
        gripper: card.gripper,
    };
    Ok((cfg, trained))
}
