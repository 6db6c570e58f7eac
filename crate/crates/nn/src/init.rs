use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{NnError, Result, Scalar, Tensor};

/// Fan-in and fan-out of a weight tensor.
///
/// `[out, in]` for fully connected weights, `[out, in, kh, kw]` for
/// convolution kernels (receptive field folded into both fans).
fn fans(shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [n] => Ok((n, n)),
        [out, inp] => Ok((inp, out)),
        [out, inp, kh, kw] => Ok((inp * kh * kw, out * kh * kw)),
        _ => Err(NnError::Config(format!(
            "cannot derive fan-in/fan-out for shape {shape:?}"
        ))),
    }
}

/// Half-width of the Xavier (Glorot) uniform interval, `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(shape: &[usize]) -> Result<f64> {
    let (fan_in, fan_out) = fans(shape)?;
    if fan_in + fan_out == 0 {
        return Err(NnError::Config("empty weight shape".into()));
    }
    Ok((6.0 / (fan_in + fan_out) as f64).sqrt())
}

/// Xavier-uniform tensor drawn from the caller's generator.
pub fn xavier_uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let bound = xavier_bound(shape)?;
    let dist = Uniform::new_inclusive(-bound, bound);
    Ok(Tensor::from_fn(shape, |_| dist.sample(rng) as Scalar))
}

/// Xavier-uniform tensor from a fresh ChaCha8 stream seeded with `seed`.
pub fn xavier_init(shape: &[usize], seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xavier_uniform(shape, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_follow_fans() {
        assert!((xavier_bound(&[4, 2]).unwrap() - 1.0).abs() < 1e-12);
        // conv: fan_in = 3*9, fan_out = 8*9
        let b = xavier_bound(&[8, 3, 3, 3]).unwrap();
        assert!((b - (6.0f64 / 99.0).sqrt()).abs() < 1e-12);
        assert!(xavier_bound(&[2, 2, 2]).is_err());
    }

    #[test]
    fn samples_stay_inside_bound() {
        let shape = [64, 32];
        let bound = xavier_bound(&shape).unwrap();
        let t = xavier_init(&shape, 3).unwrap();
        assert!(t.data().iter().all(|&v| (v as f64).abs() <= bound));
    }

    #[test]
    fn same_seed_same_tensor() {
        assert_eq!(
            xavier_init(&[5, 7], 11).unwrap(),
            xavier_init(&[5, 7], 11).unwrap()
        );
        assert_ne!(
            xavier_init(&[5, 7], 11).unwrap(),
            xavier_init(&[5, 7], 12).unwrap()
        );
    }

    #[test]
    fn sample_mean_within_three_sigma() {
        // Uniform(-b, b) has sigma = b / sqrt(3); the mean of N draws has
        // standard error sigma / sqrt(N).
        let shape = [1000, 100];
        let n = 100_000.0f64;
        let bound = xavier_bound(&shape).unwrap();
        let sigma = bound / 3f64.sqrt();
        let t = xavier_init(&shape, 2024).unwrap();
        let mean = t.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean}");
    }
}
