//! The single JSON document describing a training / evaluation run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cornell::SplitMode;
use crate::geometry::MetricConfig;
use crate::predictor::{
    BackboneSpec, FineTuneConfig, Gripper, HeadSpec, ModelSpec, PlateauConfig, PredictError, StageConfig,
    TrainPlan, Variant,
};
use crate::preprocess::{Modality, PatchPolicy, PreprocessConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "SplitConfig::default_mode")]
    pub mode: SplitMode,
    #[serde(default)]
    pub seed: u64,
}

impl SplitConfig {
    fn default_mode() -> SplitMode {
        SplitMode::ImageWise
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            mode: Self::default_mode(),
            seed: 0,
        }
    }
}

/// Scene count, image side and seed of a generated dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { n: 200, size: 64, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub warmup: usize,
    pub repeats: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            warmup: 10,
            repeats: 100,
        }
    }
}

/// Everything a run needs. Optional blocks are filled in by
/// [`RunConfig::resolved`], and reports always carry the resolved form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    #[serde(default)]
    pub backbone_spec: BackboneSpec,
    /// Defaults to the variant's standard widths.
    #[serde(default)]
    pub head_spec: Option<HeadSpec>,
    pub preprocessing: PreprocessConfig,
    pub stage1: StageConfig,
    pub stage2: FineTuneConfig,
    pub seed: u64,
    #[serde(default)]
    pub metric: MetricConfig,
    /// Fixed grasp extents; defaults to the mean of the training positives.
    #[serde(default)]
    pub gripper: Option<Gripper>,
    #[serde(default)]
    pub split: SplitConfig,
    /// Used when the data source is `synthetic`.
    #[serde(default)]
    pub synthetic: SyntheticConfig,
    #[serde(default)]
    pub timing: TimingConfig,
    /// Train folds concurrently; results stay identical to sequential runs.
    #[serde(default)]
    pub parallel_folds: bool,
}

impl RunConfig {
    /// Desk-scale defaults for 64-pixel scenes.
    pub fn desk(variant: Variant, seed: u64) -> RunConfig {
        let (input_size, patch_policy) = match variant {
            Variant::Graspability => (32, PatchPolicy::GraspCentered { patch_size: 32 }),
            _ => (64, PatchPolicy::FullImage),
        };
        let stage = |epochs, lr0| StageConfig {
            epochs,
            lr0,
            decay: 1e-6,
            momentum: 0.9,
            batch_size: 16,
        };
        let fine = |epochs, lr0| FineTuneConfig {
            epochs,
            lr0,
            decay: 1e-6,
            momentum: 0.9,
            batch_size: 16,
            plateau: PlateauConfig {
                patience: 10,
                factor: 0.5,
                min_lr: 1e-5,
            },
        };
        let (stage1, stage2) = match variant {
            Variant::UniModal => (stage(10, 0.01), fine(40, 0.05)),
            Variant::MultiModal => (stage(10, 0.01), fine(60, 0.05)),
            Variant::Graspability => (stage(15, 0.01), fine(5, 0.001)),
        };
        RunConfig {
            variant,
            backbone_spec: BackboneSpec::default(),
            head_spec: Some(HeadSpec::for_variant(variant)),
            preprocessing: PreprocessConfig {
                input_size,
                // only the uni-modal variant reads this; depth in the blue channel
                modality: Modality::Rgd,
                patch_policy,
                ..PreprocessConfig::default()
            },
            stage1,
            stage2,
            seed,
            metric: MetricConfig::default(),
            gripper: None,
            split: SplitConfig { mode: SplitMode::ImageWise, seed },
            synthetic: SyntheticConfig { seed, ..SyntheticConfig::default() },
            timing: TimingConfig::default(),
            parallel_folds: false,
        }
    }

    /// Fills optional blocks with their defaults and validates.
    pub fn resolved(mut self) -> Result<RunConfig, PredictError> {
        if self.head_spec.is_none() {
            self.head_spec = Some(HeadSpec::for_variant(self.variant));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        self.preprocessing.validate()?;
        self.metric.validate()?;
        self.plan().validate()?;
        if self.variant == Variant::Graspability {
            crate::predictor::query_side(&self.preprocessing)?;
        }
        if let Some(g) = self.gripper {
            if !(g.h > 0.0 && g.w > 0.0 && g.h.is_finite() && g.w.is_finite()) {
                return Err(PredictError::Spec(format!("gripper extents must be positive, got {g:?}")));
            }
        }
        if self.timing.repeats < 100 || self.timing.warmup < 10 {
            return Err(PredictError::Spec(format!(
                "timing needs at least 10 warmup and 100 timed passes, got {:?}",
                self.timing
            )));
        }
        crate::predictor::build_model(&self.model_spec())?;
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            variant: self.variant,
            backbone: self.backbone_spec.clone(),
            head: self.head_spec.clone().unwrap_or_else(|| HeadSpec::for_variant(self.variant)),
            angle_encoding: self.preprocessing.angle_encoding,
            seed: self.seed,
        }
    }

    pub fn plan(&self) -> TrainPlan {
        TrainPlan {
            stage1: self.stage1,
            stage2: self.stage2,
            seed: self.seed,
        }
    }

    pub fn from_json(text: &str) -> Result<RunConfig, PredictError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| PredictError::Spec(format!("config: {e}")))?;
        cfg.resolved()
    }

    pub fn load(path: &Path) -> Result<RunConfig, PredictError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PredictError::Spec(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| PredictError::Spec(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
