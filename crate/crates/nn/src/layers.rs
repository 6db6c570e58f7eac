use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{
    xavier_uniform, Layer, LayerKind, Mode, NnError, Param, Parameterized, Result, Scalar, Tensor,
};

/// Fully connected layer: `[batch, in] -> [batch, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Linear {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let weight = xavier_uniform(&[outputs, inputs], rng)?;
        Ok(Self::from_tensors(name, weight, Tensor::zeros(&[outputs])))
    }

    pub fn from_tensors(name: &str, weight: Tensor, bias: Tensor) -> Self {
        Linear {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            cache: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[0]
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

impl Layer for Linear {
    fn kind(&self) -> LayerKind {
        LayerKind::FullyConnected
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out = self.infer(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let x = self.cache.as_ref().ok_or(NnError::NoCache("fully_connected"))?;
        let (n, inp, out) = (x.shape()[0], self.inputs(), self.outputs());
        if grad_output.shape() != [n, out] {
            return Err(NnError::shape("fully_connected grad_output", &[n, out], grad_output.shape()));
        }
        let w = self.weight.value.data();
        let dy = grad_output.data();
        let mut dx = vec![0.0; n * inp];
        for b in 0..n {
            let dxr = &mut dx[b * inp..(b + 1) * inp];
            for o in 0..out {
                let g = dy[b * out + o];
                for (d, &wv) in dxr.iter_mut().zip(&w[o * inp..(o + 1) * inp]) {
                    *d += g * wv;
                }
            }
        }
        if !self.weight.frozen {
            let xd = x.data();
            let dw = self.weight.grad.data_mut();
            for b in 0..n {
                for o in 0..out {
                    let g = dy[b * out + o];
                    for (d, &xv) in dw[o * inp..(o + 1) * inp].iter_mut().zip(&xd[b * inp..(b + 1) * inp]) {
                        *d += g * xv;
                    }
                }
            }
            let db = self.bias.grad.data_mut();
            for b in 0..n {
                for (d, &g) in db.iter_mut().zip(&dy[b * out..(b + 1) * out]) {
                    *d += g;
                }
            }
        }
        Tensor::new(&[n, inp], dx)
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let (inp, out) = (self.inputs(), self.outputs());
        if input.rank() != 2 || input.shape()[1] != inp {
            return Err(NnError::Shape {
                context: format!("fully_connected input features (layer expects {inp})"),
                expected: vec![inp],
                actual: input.shape().to_vec(),
            });
        }
        let n = input.shape()[0];
        let w = self.weight.value.data();
        let bias = self.bias.value.data();
        let x = input.data();
        let mut y = Vec::with_capacity(n * out);
        for b in 0..n {
            let xr = &x[b * inp..(b + 1) * inp];
            for o in 0..out {
                let s: Scalar = w[o * inp..(o + 1) * inp].iter().zip(xr).map(|(a, b)| a * b).sum();
                y.push(s + bias[o]);
            }
        }
        Tensor::new(&[n, out], y)
    }
}

/// Pointwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, v: Scalar) -> Scalar {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ActivationLayer {
    pub activation: Activation,
    // relu keeps its input, tanh its output
    cache: Option<Tensor>,
}

impl ActivationLayer {
    pub fn new(activation: Activation) -> Self {
        ActivationLayer {
            activation,
            cache: None,
        }
    }

    pub fn relu() -> Self {
        Self::new(Activation::Relu)
    }
}

impl Parameterized for ActivationLayer {}

impl Layer for ActivationLayer {
    fn kind(&self) -> LayerKind {
        match self.activation {
            Activation::Relu => LayerKind::Relu,
            Activation::Tanh => LayerKind::Tanh,
        }
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out = self.infer(input)?;
        self.cache = Some(match self.activation {
            Activation::Relu => input.clone(),
            Activation::Tanh => out.clone(),
        });
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cached = self.cache.as_ref().ok_or(NnError::NoCache("activation"))?;
        match self.activation {
            Activation::Relu => {
                grad_output.zip_with(cached, "relu backward", |g, x| if x > 0.0 { g } else { 0.0 })
            }
            Activation::Tanh => grad_output.zip_with(cached, "tanh backward", |g, y| g * (1.0 - y * y)),
        }
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let act = self.activation;
        Ok(input.map(|v| act.apply(v)))
    }
}

/// Inverted dropout: survivors are scaled by `1/(1-p)` during training,
/// evaluation mode is the identity.
#[derive(Clone, Debug)]
pub struct Dropout {
    p: Scalar,
    rng: ChaCha8Rng,
    mask: Option<Tensor>,
}

impl Dropout {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::Config(format!(
                "drop probability must lie in [0, 1), got {p}"
            )));
        }
        Ok(Dropout {
            p: p as Scalar,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
        })
    }

    pub fn probability(&self) -> f64 {
        self.p as f64
    }
}

impl Parameterized for Dropout {}

impl Layer for Dropout {
    fn kind(&self) -> LayerKind {
        LayerKind::Dropout
    }

    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        if mode == Mode::Eval || self.p == 0.0 {
            self.mask = None;
            return Ok(input.clone());
        }
        let keep = 1.0 - self.p;
        let scale = 1.0 / keep;
        let p = self.p as f64;
        let rng = &mut self.rng;
        let mask = Tensor::from_fn(input.shape(), |_| {
            if rng.gen::<f64>() >= p {
                scale
            } else {
                0.0
            }
        });
        let out = input.zip_with(&mask, "dropout", |x, m| x * m)?;
        self.mask = Some(mask);
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        match &self.mask {
            Some(mask) => grad_output.zip_with(mask, "dropout backward", |g, m| g * m),
            None => Ok(grad_output.clone()),
        }
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        Ok(input.clone())
    }
}

/// Mean over the spatial axes: `[batch, c, h, w] -> [batch, c]`.
#[derive(Clone, Debug, Default)]
pub struct GlobalAvgPool {
    cache: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Parameterized for GlobalAvgPool {}

impl Layer for GlobalAvgPool {
    fn kind(&self) -> LayerKind {
        LayerKind::GlobalAvgPool
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out = self.infer(input)?;
        self.cache = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let shape = self.cache.as_ref().ok_or(NnError::NoCache("global_avg_pool"))?;
        let (n, c, area) = (shape[0], shape[1], shape[2] * shape[3]);
        if grad_output.shape() != [n, c] {
            return Err(NnError::shape("global_avg_pool grad_output", &[n, c], grad_output.shape()));
        }
        let inv = 1.0 / area as Scalar;
        let g = grad_output.data();
        Ok(Tensor::from_fn(shape, |i| g[i / area] * inv))
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        input.expect_rank(4, "global_avg_pool")?;
        let s = input.shape();
        let (n, c, area) = (s[0], s[1], s[2] * s[3]);
        let inv = 1.0 / area as Scalar;
        let data = input
            .data()
            .chunks(area)
            .map(|plane| plane.iter().sum::<Scalar>() * inv)
            .collect();
        Tensor::new(&[n, c], data)
    }
}

/// Scales each row of a `[batch, d]` tensor to unit Euclidean norm.
/// All-zero rows pass through unchanged.
#[derive(Clone, Debug, Default)]
pub struct L2Norm {
    cache: Option<(Tensor, Vec<Scalar>)>,
}

impl L2Norm {
    pub fn new() -> Self {
        Self::default()
    }

    fn normalize(input: &Tensor) -> Result<(Tensor, Vec<Scalar>)> {
        input.expect_rank(2, "l2norm")?;
        let d = input.shape()[1];
        let mut out = input.clone();
        let mut norms = Vec::with_capacity(input.shape()[0]);
        for row in out.data_mut().chunks_mut(d.max(1)) {
            let norm = row.iter().map(|v| v * v).sum::<Scalar>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
            norms.push(norm);
        }
        Ok((out, norms))
    }
}

impl Parameterized for L2Norm {}

impl Layer for L2Norm {
    fn kind(&self) -> LayerKind {
        LayerKind::L2Norm
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (out, norms) = Self::normalize(input)?;
        self.cache = Some((out.clone(), norms));
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (y, norms) = self.cache.as_ref().ok_or(NnError::NoCache("l2norm"))?;
        if grad_output.shape() != y.shape() {
            return Err(NnError::shape("l2norm grad_output", y.shape(), grad_output.shape()));
        }
        let d = y.shape()[1].max(1);
        let mut dx = grad_output.clone();
        for ((g, yr), &norm) in dx.data_mut().chunks_mut(d).zip(y.data().chunks(d)).zip(norms) {
            if norm == 0.0 {
                continue;
            }
            // d(x/|x|) = (g - y (y·g)) / |x|
            let proj: Scalar = g.iter().zip(yr).map(|(a, b)| a * b).sum();
            for (gi, &yi) in g.iter_mut().zip(yr) {
                *gi = (*gi - yi * proj) / norm;
            }
        }
        Ok(dx)
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        Ok(Self::normalize(input)?.0)
    }
}

/// Joins `[batch, d_i]` tensors along the feature axis.
#[derive(Clone, Debug, Default)]
pub struct Concat {
    widths: Vec<usize>,
}

impl Concat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn kind(&self) -> LayerKind {
        LayerKind::Concat
    }

    pub fn forward(&mut self, inputs: &[&Tensor]) -> Result<Tensor> {
        let out = Self::join(inputs)?;
        self.widths = inputs.iter().map(|t| t.shape()[1]).collect();
        Ok(out)
    }

    pub fn join(inputs: &[&Tensor]) -> Result<Tensor> {
        let first = inputs
            .first()
            .ok_or_else(|| NnError::Config("concat of zero tensors".into()))?;
        let n = first.shape()[0];
        for t in inputs {
            t.expect_rank(2, "concat")?;
            if t.shape()[0] != n {
                return Err(NnError::shape("concat batch", &[n], &t.shape()[..1]));
            }
        }
        let total: usize = inputs.iter().map(|t| t.shape()[1]).sum();
        let mut data = Vec::with_capacity(n * total);
        for b in 0..n {
            for t in inputs {
                let d = t.shape()[1];
                data.extend_from_slice(&t.data()[b * d..(b + 1) * d]);
            }
        }
        Tensor::new(&[n, total], data)
    }

    /// Splits the joined gradient back into per-input gradients.
    pub fn backward(&self, grad_output: &Tensor) -> Result<Vec<Tensor>> {
        let total: usize = self.widths.iter().sum();
        if self.widths.is_empty() {
            return Err(NnError::NoCache("concat"));
        }
        if grad_output.rank() != 2 || grad_output.shape()[1] != total {
            return Err(NnError::shape("concat grad_output", &[total], &grad_output.shape()[1..]));
        }
        let n = grad_output.shape()[0];
        let g = grad_output.data();
        let mut offset = 0;
        let mut parts = Vec::with_capacity(self.widths.len());
        for &w in &self.widths {
            let mut data = Vec::with_capacity(n * w);
            for b in 0..n {
                data.extend_from_slice(&g[b * total + offset..b * total + offset + w]);
            }
            parts.push(Tensor::new(&[n, w], data)?);
            offset += w;
        }
        Ok(parts)
    }
}

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential {
    pub layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, layer: impl Layer + 'static) {
        self.layers.push(Box::new(layer));
    }
}

impl Parameterized for Sequential {
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

impl Layer for Sequential {
    fn kind(&self) -> LayerKind {
        LayerKind::Sequential
    }

    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode)?;
        }
        Ok(x)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = grad_output.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.infer(&x)?;
        }
        Ok(x)
    }
}
