use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchError, EnvFingerprint};
use crate::config::RunConfig;
use crate::cornell::SplitMode;
use crate::predictor::{Outcome, TrainHistory};

pub const REPORT_JSON: &str = "report.json";
pub const OUTCOMES_CSV: &str = "outcomes.csv";
pub const FOLD_CSV: &str = "fold_accuracy.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub mode: SplitMode,
    pub seed: u64,
    /// Sample ids per fold.
    pub folds: Vec<Vec<String>>,
    pub algorithm: String,
    /// Set when the run verified that every object sits in one fold.
    pub objects_confined_to_one_fold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub index: usize,
    pub accuracy: f64,
    /// Evaluated samples (queries, for graspability).
    pub n: usize,
    pub skipped_training: usize,
    pub clamped: usize,
    pub history: TrainHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpsReport {
    pub mean: f64,
    pub std: f64,
    pub env: EnvFingerprint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfig,
    pub source: String,
    pub split: SplitReport,
    /// Samples without usable annotations, left out before splitting.
    pub excluded_samples: usize,
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    /// Population standard deviation of the fold accuracies.
    pub std_accuracy: f64,
    pub fps: FpsReport,
    /// Relative to the report's directory.
    pub outcomes_csv_path: String,
}

pub(crate) fn population_std(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn io(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

/// Writes `report.json`, `outcomes.csv` (one row per outcome) and
/// `fold_accuracy.csv` (one row per fold).
pub fn emit_report(report: &EvalReport, outcomes: &[Outcome], out_dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let json_path = out_dir.join(REPORT_JSON);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&json_path, json + "\n").map_err(|e| io(&json_path, e))?;

    write_outcomes_csv(outcomes, &out_dir.join(&report.outcomes_csv_path))?;

    let fold_path = out_dir.join(FOLD_CSV);
    let mut w = csv::Writer::from_path(&fold_path).map_err(|e| io(&fold_path, e))?;
    w.write_record(["fold", "accuracy", "n"]).map_err(|e| io(&fold_path, e))?;
    for f in &report.folds {
        w.write_record([f.index.to_string(), f.accuracy.to_string(), f.n.to_string()])
            .map_err(|e| io(&fold_path, e))?;
    }
    w.flush().map_err(|e| io(&fold_path, e))?;
    Ok(())
}

/// One row per outcome, with a header.
pub fn write_outcomes_csv(outcomes: &[Outcome], path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    for o in outcomes {
        w.serialize(o).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// Structural check of an emitted report: required keys and types, five
/// folds, mean and std consistent with the fold values, positive fps.
pub fn validate_report_json(value: &serde_json::Value) -> Result<(), String> {
    let obj = value.as_object().ok_or("report is not an object")?;
    for key in ["config", "split", "folds", "mean_accuracy", "std_accuracy", "fps", "outcomes_csv_path"] {
        if !obj.contains_key(key) {
            return Err(format!("missing key {key}"));
        }
    }
    let split = obj["split"].as_object().ok_or("split is not an object")?;
    for key in ["mode", "seed", "folds"] {
        if !split.contains_key(key) {
            return Err(format!("missing key split.{key}"));
        }
    }
    let folds = obj["folds"].as_array().ok_or("folds is not an array")?;
    if folds.len() != crate::cornell::FOLDS {
        return Err(format!("{} folds", folds.len()));
    }
    let mut accs = Vec::new();
    for (i, f) in folds.iter().enumerate() {
        let index = f["index"].as_u64().ok_or(format!("folds[{i}].index"))?;
        let acc = f["accuracy"].as_f64().ok_or(format!("folds[{i}].accuracy"))?;
        f["n"].as_u64().ok_or(format!("folds[{i}].n"))?;
        if index != i as u64 || !(0.0..=1.0).contains(&acc) {
            return Err(format!("folds[{i}] has index {index}, accuracy {acc}"));
        }
        accs.push(acc);
    }
    let mean = obj["mean_accuracy"].as_f64().ok_or("mean_accuracy")?;
    let std = obj["std_accuracy"].as_f64().ok_or("std_accuracy")?;
    let expected = accs.iter().sum::<f64>() / accs.len() as f64;
    if (mean - expected).abs() > 1e-12 {
        return Err(format!("mean_accuracy {mean} but folds average {expected}"));
    }
    if (std - population_std(&accs)).abs() > 1e-12 {
        return Err(format!("std_accuracy {std} inconsistent with folds"));
    }
    let fps = obj["fps"].as_object().ok_or("fps is not an object")?;
    let fps_mean = fps.get("mean").and_then(|v| v.as_f64()).ok_or("fps.mean")?;
    if !(fps_mean > 0.0) {
        return Err(format!("fps.mean is {fps_mean}"));
    }
    fps.get("std").and_then(|v| v.as_f64()).ok_or("fps.std")?;
    if !fps.get("env").is_some_and(|v| v.is_object()) {
        return Err("fps.env is not an object".into());
    }
    obj["outcomes_csv_path"].as_str().ok_or("outcomes_csv_path")?;
    Ok(())
}
