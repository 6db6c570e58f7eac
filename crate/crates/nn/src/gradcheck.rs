//! Central finite-difference gradient oracle.
//!
//! Only uses forward evaluations, so it stays independent of every
//! `backward` implementation it is used to check.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Layer, Mode, Scalar, Tensor};

pub const EPSILON: f64 = 1e-5;

/// Denominator floor for the relative error of near-zero gradient entries.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`, maximised over all entries.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| {
            let (a, n) = (a as f64, n as f64);
            (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR)
        })
        .fold(0.0, f64::max)
}

/// Central differences of a scalar function of one tensor.
pub fn numeric_gradient(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + EPSILON as Scalar;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - EPSILON as Scalar;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = ((plus - minus) / (2.0 * EPSILON)) as Scalar;
    }
    grad
}

/// Uniform random tensor in `[-scale, scale]`.
pub fn random_tensor(shape: &[usize], seed: u64, scale: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-scale, scale);
    Tensor::from_fn(shape, |_| dist.sample(&mut rng) as Scalar)
}

/// `Σ out ⊙ probe` — projects a tensor output to a scalar loss.
pub fn project(out: &Tensor, probe: &Tensor) -> f64 {
    out.data().iter().zip(probe.data()).map(|(&a, &b)| (a * b) as f64).sum()
}

/// Worst relative errors of a layer's analytic gradients.
#[derive(Clone, Debug)]
pub struct GradReport {
    pub input: f64,
    pub params: Vec<(String, f64)>,
}

impl GradReport {
    pub fn max(&self) -> f64 {
        self.params.iter().map(|(_, e)| *e).fold(self.input, f64::max)
    }
}

/// Checks input and parameter gradients of a deterministic layer against
/// finite differences of `Σ infer(x) ⊙ R` for a random projection `R`.
pub fn check_layer<L: Layer + ?Sized>(layer: &mut L, input: &Tensor, seed: u64) -> GradReport {
    layer.zero_grad();
    let out = layer.forward(input, Mode::Train).expect("forward");
    let probe = random_tensor(out.shape(), seed ^ 0x5eed, 1.0);
    let dx = layer.backward(&probe).expect("backward");
    let analytic: Vec<(String, Tensor)> =
        layer.params().iter().map(|p| (p.name.clone(), p.grad.clone())).collect();

    let numeric_dx = numeric_gradient(input, |x| project(&layer.infer(x).expect("infer"), &probe));
    let input_err = max_relative_error(&dx, &numeric_dx);

    let mut params = Vec::new();
    for (idx, (name, grad)) in analytic.iter().enumerate() {
        let mut numeric = Tensor::zeros(grad.shape());
        for j in 0..grad.len() {
            let orig = layer.params()[idx].value.data()[j];
            let mut eval = |v: Scalar| {
                layer.params_mut()[idx].value.data_mut()[j] = v;
                project(&layer.infer(input).expect("infer"), &probe)
            };
            let plus = eval(orig + EPSILON as Scalar);
            let minus = eval(orig - EPSILON as Scalar);
            layer.params_mut()[idx].value.data_mut()[j] = orig;
            numeric.data_mut()[j] = ((plus - minus) / (2.0 * EPSILON)) as Scalar;
        }
        params.push((name.clone(), max_relative_error(grad, &numeric)));
    }
    GradReport {
        input: input_err,
        params,
    }
}
