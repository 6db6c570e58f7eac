use graspnet_nn::{
    mse_loss, softmax_cross_entropy, Mode, NnError, Param, Parameterized, PlateauScheduler, Scalar, Sgd,
    SgdConfig, Tensor,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelGraph, PredictError, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl StageConfig {
    fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr0: self.lr0,
            decay: self.decay,
            momentum: self.momentum,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauConfig {
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            patience: 3,
            factor: 0.1,
            min_lr: 1e-7,
        }
    }
}

/// Fine-tuning stage: every parameter trains, the learning rate drops on
/// training-loss plateaus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineTuneConfig {
    pub epochs: usize,
    pub lr0: f64,
    pub decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub plateau: PlateauConfig,
}

impl FineTuneConfig {
    fn stage(&self) -> StageConfig {
        StageConfig {
            epochs: self.epochs,
            lr0: self.lr0,
            decay: self.decay,
            momentum: self.momentum,
            batch_size: self.batch_size,
        }
    }
}

/// Stage 1 trains the head on frozen backbones; stage 2 fine-tunes all.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub stage1: StageConfig,
    pub stage2: FineTuneConfig,
    pub seed: u64,
}

impl TrainPlan {
    /// Published first-stage settings; the second stage uses a tenth of the
    /// first-stage rate with a plateau schedule.
    pub fn paper(variant: Variant, seed: u64) -> TrainPlan {
        let (lr0, epochs) = match variant {
            Variant::UniModal => (0.001, 30),
            Variant::MultiModal | Variant::Graspability => (0.0006, 50),
        };
        TrainPlan {
            stage1: StageConfig {
                epochs,
                lr0,
                decay: 1e-6,
                momentum: 0.9,
                batch_size: 32,
            },
            stage2: FineTuneConfig {
                epochs: 10,
                lr0: lr0 / 10.0,
                decay: 1e-6,
                momentum: 0.9,
                batch_size: 32,
                plateau: PlateauConfig::default(),
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        for (name, s) in [("stage1", self.stage1), ("stage2", self.stage2.stage())] {
            if s.batch_size == 0 {
                return Err(PredictError::Spec(format!("{name}: batch_size must be positive")));
            }
            s.sgd()
                .validate()
                .map_err(|e| PredictError::Spec(format!("{name}: {e}")))?;
        }
        PlateauScheduler::new(self.stage2.plateau.patience, self.stage2.plateau.factor, self.stage2.plateau.min_lr)
            .map_err(|e| PredictError::Spec(format!("stage2 plateau: {e}")))?;
        Ok(())
    }
}

/// Network inputs (one `[3, S, S]` tensor per branch) with their targets.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pub inputs: Vec<Vec<Tensor>>,
    pub targets: Targets,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Regression(Vec<Vec<f64>>),
    Classes(Vec<usize>),
}

impl Default for Targets {
    fn default() -> Self {
        Targets::Regression(Vec::new())
    }
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn batch_inputs(&self, idx: &[usize]) -> Result<Vec<Tensor>, PredictError> {
        let branches = self.inputs.first().map_or(0, Vec::len);
        (0..branches)
            .map(|b| {
                let items: Vec<&Tensor> = idx.iter().map(|&i| &self.inputs[i][b]).collect();
                Ok(Tensor::stack(&items)?)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub loss: f64,
    /// `lr0` in effect during the epoch.
    pub lr0: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub stage1: Vec<EpochLog>,
    pub stage2: Vec<EpochLog>,
}

impl TrainHistory {
    pub fn losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.stage1.iter().chain(&self.stage2).map(|e| e.loss)
    }
}

struct Location {
    stage: u8,
    epoch: usize,
    batch: usize,
}

fn abort(at: &Location, layer: impl Into<String>, detail: impl Into<String>) -> PredictError {
    PredictError::TrainingAborted {
        stage: at.stage,
        epoch: at.epoch,
        batch: at.batch,
        layer: layer.into(),
        detail: detail.into(),
    }
}

fn loss_and_grad(out: &Tensor, targets: &Targets, idx: &[usize]) -> Result<(f64, Tensor), PredictError> {
    match targets {
        Targets::Regression(rows) => {
            let data: Vec<Scalar> = idx.iter().flat_map(|&i| rows[i].iter().map(|&v| v as Scalar)).collect();
            let t = Tensor::new(out.shape(), data)?;
            let (loss, grad) = mse_loss(out, &t)?;
            Ok((loss as f64, grad))
        }
        Targets::Classes(labels) => {
            let batch: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (loss, _, grad) = softmax_cross_entropy(out, &batch)?;
            Ok((loss as f64, grad))
        }
    }
}

fn first_nonfinite_grad<'a>(params: impl IntoIterator<Item = &'a Param>) -> Option<String> {
    params
        .into_iter()
        .find(|p| !p.frozen && !p.grad.is_finite())
        .map(|p| p.name.clone())
}

fn sgd_step(sgd: &mut Sgd, params: &mut [&mut Param], at: &Location) -> Result<(), PredictError> {
    sgd.step(params).map_err(|e| match e {
        NnError::NonFinite(name) => abort(at, name, "non-finite gradient"),
        other => PredictError::Nn(other),
    })
}

fn shuffled(n: usize, seed: u64, stage: u8, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let stream = seed ^ ((stage as u64) << 56) ^ (epoch as u64).wrapping_mul(0x2545_f491_4f6c_dd1d);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(stream));
    order
}

/// Two-stage training. Deterministic for a given model seed, plan and set.
pub fn train(model: &mut ModelGraph, set: &TrainingSet, plan: &TrainPlan) -> Result<TrainHistory, PredictError> {
    plan.validate()?;
    if set.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    let mut history = TrainHistory::default();

    // Stage 1: backbones frozen. They hold no stochastic layers, so their
    // features are computed once and the head trains on the cache.
    model.freeze_backbone(true);
    if plan.stage1.epochs > 0 {
        let mut cached = Vec::with_capacity(set.len());
        for chunk in (0..set.len()).collect::<Vec<_>>().chunks(plan.stage1.batch_size.max(16)) {
            let inputs = set.batch_inputs(chunk)?;
            let refs: Vec<&Tensor> = inputs.iter().collect();
            let f = model.features(&refs)?;
            cached.extend((0..chunk.len()).map(|r| f.row(r)));
        }
        let mut sgd = Sgd::new(plan.stage1.sgd())?;
        for epoch in 0..plan.stage1.epochs {
            let order = shuffled(set.len(), plan.seed, 1, epoch);
            let mut total = 0.0;
            for (batch, idx) in order.chunks(plan.stage1.batch_size).enumerate() {
                let at = Location { stage: 1, epoch, batch };
                let rows: Vec<&Tensor> = idx.iter().map(|&i| &cached[i]).collect();
                let x = Tensor::stack(&rows)?;
                let out = model.head_forward(&x, Mode::Train)?;
                let (loss, grad) = loss_and_grad(&out, &set.targets, idx)?;
                if !loss.is_finite() {
                    return Err(abort(&at, "loss", format!("loss became {loss}")));
                }
                total += loss * idx.len() as f64;
                model.zero_grad();
                model.head_backward(&grad)?;
                if let Some(name) = first_nonfinite_grad(model.head_params()) {
                    return Err(abort(&at, name, "non-finite gradient"));
                }
                let mut params = model.head_params_mut();
                sgd_step(&mut sgd, &mut params, &at)?;
            }
            history.stage1.push(EpochLog {
                loss: total / set.len() as f64,
                lr0: sgd.config.lr0,
            });
        }
    }

    // Stage 2: everything trains, lr0 follows the plateau schedule.
    model.freeze_backbone(false);
    if plan.stage2.epochs > 0 {
        let p = plan.stage2.plateau;
        let mut sched = PlateauScheduler::new(p.patience, p.factor, p.min_lr)?;
        let mut sgd = Sgd::new(plan.stage2.stage().sgd())?;
        for epoch in 0..plan.stage2.epochs {
            let order = shuffled(set.len(), plan.seed, 2, epoch);
            let mut total = 0.0;
            for (batch, idx) in order.chunks(plan.stage2.batch_size).enumerate() {
                let at = Location { stage: 2, epoch, batch };
                let inputs = set.batch_inputs(idx)?;
                let refs: Vec<&Tensor> = inputs.iter().collect();
                let out = model.forward(&refs, Mode::Train)?;
                let (loss, grad) = loss_and_grad(&out, &set.targets, idx)?;
                if !loss.is_finite() {
                    return Err(abort(&at, "loss", format!("loss became {loss}")));
                }
                total += loss * idx.len() as f64;
                model.zero_grad();
                model.backward(&grad)?;
                if let Some(name) = first_nonfinite_grad(model.params()) {
                    return Err(abort(&at, name, "non-finite gradient"));
                }
                let mut params = model.params_mut();
                sgd_step(&mut sgd, &mut params, &at)?;
            }
            let loss = total / set.len() as f64;
            history.stage2.push(EpochLog {
                loss,
                lr0: sgd.config.lr0,
            });
            let next = sched.observe(loss, sgd.config.lr0);
            sgd.set_lr0(next);
        }
    }
    Ok(history)
}
