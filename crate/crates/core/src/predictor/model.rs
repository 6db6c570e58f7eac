use graspnet_nn::{
    Activation, ActivationLayer, Concat, Conv2d, Dropout, GlobalAvgPool, L2Norm, Layer, Linear, Mode,
    Param, Parameterized, ResidualBlock, Sequential, Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::preprocess::{AngleEncoding, Modality};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One backbone on a 3-channel input, regression head.
    UniModal,
    /// RGB and DEPTH3 backbones, L2-normalized and concatenated.
    MultiModal,
    /// Multi-modal network with a two-way softmax output judging a
    /// candidate rectangle.
    Graspability,
}

impl Variant {
    pub fn branches(self) -> usize {
        match self {
            Variant::UniModal => 1,
            Variant::MultiModal | Variant::Graspability => 2,
        }
    }

    /// Hidden fully connected layers the head must have.
    pub fn hidden_layers(self) -> usize {
        match self {
            Variant::UniModal => 1,
            Variant::MultiModal | Variant::Graspability => 2,
        }
    }

    /// Inputs fed to each backbone, in branch order.
    pub fn modalities(self, uni: Modality) -> Vec<Modality> {
        match self {
            Variant::UniModal => vec![uni],
            Variant::MultiModal | Variant::Graspability => vec![Modality::Rgb, Modality::Depth3],
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "uni_modal" => Ok(Variant::UniModal),
            "multi_modal" => Ok(Variant::MultiModal),
            "graspability" => Ok(Variant::Graspability),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub blocks: usize,
    pub channels: usize,
    /// Stride of the first block in the stage.
    pub stride: usize,
}

/// Stem convolution followed by residual stages and global average pooling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneSpec {
    pub stem_channels: usize,
    pub stem_stride: usize,
    pub stages: Vec<StageSpec>,
}

impl Default for BackboneSpec {
    /// Three stages of two blocks, 8/16/32 channels.
    fn default() -> Self {
        BackboneSpec {
            stem_channels: 8,
            stem_stride: 2,
            stages: vec![
                StageSpec { blocks: 2, channels: 8, stride: 2 },
                StageSpec { blocks: 2, channels: 16, stride: 2 },
                StageSpec { blocks: 2, channels: 32, stride: 2 },
            ],
        }
    }
}

impl BackboneSpec {
    pub fn feature_width(&self) -> usize {
        self.stages.last().map_or(self.stem_channels, |s| s.channels)
    }

    /// Same spec with every stage's block count doubled.
    pub fn deepened(&self) -> BackboneSpec {
        let mut spec = self.clone();
        for s in &mut spec.stages {
            s.blocks *= 2;
        }
        spec
    }

    fn validate(&self) -> Result<(), PredictError> {
        let zero_stage = self
            .stages
            .iter()
            .any(|s| s.blocks == 0 || s.channels == 0 || s.stride == 0);
        if self.stem_channels == 0 || self.stem_stride == 0 || zero_stage {
            return Err(PredictError::Spec(format!("backbone spec has a zero entry: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadActivation {
    #[default]
    Relu,
    Tanh,
}

impl From<HeadActivation> for Activation {
    fn from(a: HeadActivation) -> Self {
        match a {
            HeadActivation::Relu => Activation::Relu,
            HeadActivation::Tanh => Activation::Tanh,
        }
    }
}

/// Hidden fully connected widths; the output layer is implied by the
/// variant. A dropout follows every hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub hidden: Vec<usize>,
    /// One per hidden layer; defaults to ReLU everywhere.
    #[serde(default)]
    pub activations: Vec<HeadActivation>,
    #[serde(default = "HeadSpec::default_dropout")]
    pub dropout: f64,
}

impl HeadSpec {
    fn default_dropout() -> f64 {
        0.5
    }

    pub fn for_variant(variant: Variant) -> HeadSpec {
        let hidden = match variant {
            Variant::UniModal => vec![256],
            Variant::MultiModal | Variant::Graspability => vec![512, 128],
        };
        HeadSpec {
            hidden,
            activations: Vec::new(),
            dropout: Self::default_dropout(),
        }
    }

    fn activation(&self, i: usize) -> HeadActivation {
        self.activations.get(i).copied().unwrap_or_default()
    }
}

/// Everything `build_model` needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub backbone: BackboneSpec,
    pub head: HeadSpec,
    /// Regression layout; ignored by the graspability variant.
    pub angle_encoding: AngleEncoding,
    pub seed: u64,
}

impl ModelSpec {
    pub fn output_width(&self) -> usize {
        match self.variant {
            Variant::Graspability => 2,
            _ => self.angle_encoding.width(),
        }
    }
}

const BRANCH_NAMES: [&str; 2] = ["rgb", "depth"];

/// An assembled predictor: backbones, optional L2 join, head.
pub struct ModelGraph {
    pub spec: ModelSpec,
    branches: Vec<Sequential>,
    norms: Vec<L2Norm>,
    concat: Concat,
    head: Sequential,
}

fn build_backbone(name: &str, spec: &BackboneSpec, rng: &mut ChaCha8Rng) -> Result<Sequential, PredictError> {
    let mut net = Sequential::new();
    net.push(Conv2d::new(&format!("{name}.stem"), 3, spec.stem_channels, 3, spec.stem_stride, 1, rng)?);
    net.push(ActivationLayer::relu());
    let mut channels = spec.stem_channels;
    for (si, stage) in spec.stages.iter().enumerate() {
        for b in 0..stage.blocks {
            let stride = if b == 0 { stage.stride } else { 1 };
            let block_name = format!("{name}.stage{si}.block{b}");
            net.push(ResidualBlock::new(&block_name, channels, stage.channels, stride, true, rng)?);
            channels = stage.channels;
        }
    }
    net.push(GlobalAvgPool::new());
    Ok(net)
}

/// Deterministic construction; every weight is Xavier-uniform from one
/// ChaCha8 stream seeded with `spec.seed`, biases start at zero.
pub fn build_model(spec: &ModelSpec) -> Result<ModelGraph, PredictError> {
    spec.backbone.validate()?;
    let head = &spec.head;
    if head.hidden.len() != spec.variant.hidden_layers() {
        return Err(PredictError::Spec(format!(
            "{:?} head needs {} hidden layers, spec has {:?}",
            spec.variant,
            spec.variant.hidden_layers(),
            head.hidden
        )));
    }
    if head.hidden.contains(&0) {
        return Err(PredictError::Spec(format!("zero-width head layer in {:?}", head.hidden)));
    }
    if !head.activations.is_empty() && head.activations.len() != head.hidden.len() {
        return Err(PredictError::Spec(format!(
            "{} activations for {} hidden layers",
            head.activations.len(),
            head.hidden.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.variant.branches();
    let branches = BRANCH_NAMES[..n]
        .iter()
        .map(|name| build_backbone(name, &spec.backbone, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let norms = if n > 1 { (0..n).map(|_| L2Norm::new()).collect() } else { Vec::new() };

    let mut net = Sequential::new();
    let mut width = n * spec.backbone.feature_width();
    for (i, &h) in head.hidden.iter().enumerate() {
        net.push(Linear::new(&format!("head.fc{i}"), width, h, &mut rng)?);
        net.push(ActivationLayer::new(head.activation(i).into()));
        let dropout_seed = spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(i as u64 + 1));
        net.push(Dropout::new(head.dropout, dropout_seed)?);
        width = h;
    }
    net.push(Linear::new(&format!("head.fc{}", head.hidden.len()), width, spec.output_width(), &mut rng)?);

    Ok(ModelGraph {
        spec: spec.clone(),
        branches,
        norms,
        concat: Concat::new(),
        head: net,
    })
}

impl ModelGraph {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Width of the joined feature vector entering the head.
    pub fn joined_width(&self) -> usize {
        self.branches.len() * self.spec.backbone.feature_width()
    }

    pub fn backbone_params(&self) -> Vec<&Param> {
        self.branches.iter().flat_map(|b| b.params()).collect()
    }

    pub fn head_params(&self) -> Vec<&Param> {
        self.head.params()
    }

    pub fn head_params_mut(&mut self) -> Vec<&mut Param> {
        self.head.params_mut()
    }

    pub fn freeze_backbone(&mut self, frozen: bool) {
        for b in &mut self.branches {
            b.set_frozen(frozen);
        }
    }

    fn check_inputs(&self, inputs: &[&Tensor]) -> Result<(), PredictError> {
        if inputs.len() != self.branches.len() {
            return Err(PredictError::Spec(format!(
                "{:?} takes {} input batches, got {}",
                self.spec.variant,
                self.branches.len(),
                inputs.len()
            )));
        }
        Ok(())
    }

    /// Backbone features after the (multi-modal) L2 join, evaluation mode.
    pub fn features(&self, inputs: &[&Tensor]) -> Result<Tensor, PredictError> {
        self.check_inputs(inputs)?;
        let mut parts = Vec::with_capacity(inputs.len());
        for (i, (branch, x)) in self.branches.iter().zip(inputs).enumerate() {
            let f = branch.infer(x)?;
            parts.push(match self.norms.get(i) {
                Some(norm) => norm.infer(&f)?,
                None => f,
            });
        }
        join(parts)
    }

    /// Per-branch features before the join, evaluation mode.
    pub fn branch_features(&self, inputs: &[&Tensor]) -> Result<Vec<Tensor>, PredictError> {
        self.check_inputs(inputs)?;
        Ok(self
            .branches
            .iter()
            .zip(inputs)
            .map(|(b, x)| b.infer(x))
            .collect::<Result<_, _>>()?)
    }

    /// Head logits / regression outputs from joined features.
    pub fn head_forward(&mut self, features: &Tensor, mode: Mode) -> Result<Tensor, PredictError> {
        Ok(self.head.forward(features, mode)?)
    }

    pub fn head_backward(&mut self, grad: &Tensor) -> Result<Tensor, PredictError> {
        Ok(self.head.backward(grad)?)
    }

    /// Full forward pass caching activations for [`ModelGraph::backward`].
    pub fn forward(&mut self, inputs: &[&Tensor], mode: Mode) -> Result<Tensor, PredictError> {
        self.check_inputs(inputs)?;
        let mut parts = Vec::with_capacity(inputs.len());
        for (i, x) in inputs.iter().enumerate() {
            let f = self.branches[i].forward(x, mode)?;
            parts.push(match self.norms.get_mut(i) {
                Some(norm) => norm.forward(&f, mode)?,
                None => f,
            });
        }
        let joined = if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            let refs: Vec<&Tensor> = parts.iter().collect();
            self.concat.forward(&refs)?
        };
        Ok(self.head.forward(&joined, mode)?)
    }

    /// Backpropagates through head and backbones, accumulating gradients
    /// into every non-frozen parameter.
    pub fn backward(&mut self, grad: &Tensor) -> Result<(), PredictError> {
        let g = self.head.backward(grad)?;
        let parts = if self.branches.len() == 1 { vec![g] } else { self.concat.backward(&g)? };
        for (i, mut g) in parts.into_iter().enumerate() {
            if let Some(norm) = self.norms.get_mut(i) {
                g = norm.backward(&g)?;
            }
            self.branches[i].backward(&g)?;
        }
        Ok(())
    }

    /// Evaluation-mode forward pass without side effects.
    pub fn infer(&self, inputs: &[&Tensor]) -> Result<Tensor, PredictError> {
        let features = self.features(inputs)?;
        Ok(self.head.infer(&features)?)
    }
}

fn join(mut parts: Vec<Tensor>) -> Result<Tensor, PredictError> {
    if parts.len() == 1 {
        return Ok(parts.pop().expect("one part"));
    }
    let refs: Vec<&Tensor> = parts.iter().collect();
    Ok(Concat::join(&refs)?)
}

impl Parameterized for ModelGraph {
    fn params(&self) -> Vec<&Param> {
        let mut all = self.backbone_params();
        all.extend(self.head.params());
        all
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut all: Vec<&mut Param> = self.branches.iter_mut().flat_map(|b| b.params_mut()).collect();
        all.extend(self.head.params_mut());
        all
    }
}
