use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::FpsReport;
use super::BenchError;
use crate::config::TimingConfig;
use crate::cornell::RgbdSample;
use crate::predictor::{predict_graspability, GraspPredictor, TrainedModel, Variant};

/// The machine a timing was taken on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvFingerprint {
    pub os: String,
    pub arch: String,
    pub cpu: String,
    pub logical_cpus: usize,
    pub timing_threads: usize,
    pub scalar: String,
    pub version: String,
}

impl EnvFingerprint {
    pub fn current() -> EnvFingerprint {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        EnvFingerprint {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpu,
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            timing_threads: 1,
            scalar: std::any::type_name::<graspnet_nn::Scalar>().into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

fn one_pass(model: &TrainedModel, sample: &RgbdSample) -> Result<(), BenchError> {
    match model.model.spec.variant {
        Variant::Graspability => {
            let query = sample.positive_grasps.iter().chain(&sample.negative_grasps).next().ok_or_else(|| {
                BenchError::Config(format!("sample {} has no rectangle to query", sample.id))
            })?;
            predict_graspability(&model.model, &model.preprocess, sample, query)?;
        }
        _ => {
            model.predict(sample)?;
        }
    }
    Ok(())
}

/// Full prediction path (preprocessing, forward, decode) on one thread,
/// cycling through `samples`. `fps.mean` is timed passes over their total
/// wall time; `fps.std` is the spread of per-pass rates.
pub fn time_inference(
    model: &TrainedModel,
    samples: &[&RgbdSample],
    timing: &TimingConfig,
) -> Result<FpsReport, BenchError> {
    if timing.repeats < 100 || timing.warmup < 10 {
        return Err(BenchError::Config(format!(
            "timing needs at least 10 warmup and 100 timed passes, got {timing:?}"
        )));
    }
    if samples.is_empty() {
        return Err(BenchError::Config("no samples to time".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| BenchError::Io(format!("timing thread pool: {e}")))?;
    let secs = pool.install(|| -> Result<Vec<f64>, BenchError> {
        for i in 0..timing.warmup {
            one_pass(model, samples[i % samples.len()])?;
        }
        (0..timing.repeats)
            .map(|i| {
                let start = Instant::now();
                one_pass(model, samples[i % samples.len()])?;
                Ok(start.elapsed().as_secs_f64().max(1e-9))
            })
            .collect()
    })?;
    let total: f64 = secs.iter().sum();
    let rates: Vec<f64> = secs.iter().map(|s| 1.0 / s).collect();
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let var = rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / rates.len() as f64;
    Ok(FpsReport {
        mean: secs.len() as f64 / total,
        std: var.sqrt(),
        env: EnvFingerprint::current(),
    })
}
