use crate::{NnError, Result, Scalar, Tensor};

/// Mean squared error over all elements and its gradient `2(pred − target)/N`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(Scalar, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(NnError::shape("mse_loss", target.shape(), pred.shape()));
    }
    let n = pred.len().max(1) as Scalar;
    let loss = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<Scalar>()
        / n;
    let grad = pred.zip_with(target, "mse_loss", |p, t| 2.0 * (p - t) / n)?;
    Ok((loss, grad))
}

/// Row-wise softmax of `[batch, k]` logits, stabilized by max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank(2, "softmax")?;
    let k = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k.max(1)) {
        let max = row.iter().copied().fold(Scalar::NEG_INFINITY, Scalar::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

/// Mean cross-entropy of softmax probabilities against class labels.
///
/// Returns `(loss, probabilities, d loss / d logits)`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(Scalar, Tensor, Tensor)> {
    let probs = softmax(logits)?;
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(NnError::shape("softmax_cross_entropy labels", &[n], &[labels.len()]));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(NnError::Config(format!("label {bad} out of range for {k} classes")));
    }
    let inv_n = 1.0 / n.max(1) as Scalar;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    let logit = logits.data();
    for (b, &label) in labels.iter().enumerate() {
        let row = &logit[b * k..(b + 1) * k];
        // log-sum-exp form stays finite for extreme logits
        let max = row.iter().copied().fold(Scalar::NEG_INFINITY, Scalar::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<Scalar>().ln();
        loss += lse - row[label];
        grad.data_mut()[b * k + label] -= 1.0;
    }
    grad.data_mut().iter_mut().for_each(|g| *g *= inv_n);
    Ok((loss * inv_n, probs, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_and_unit() {
        let p = Tensor::from_fn(&[2, 3], |i| i as Scalar);
        assert_eq!(mse_loss(&p, &p).unwrap().0, 0.0);
        let t = p.map(|v| v - 1.0);
        let (loss, grad) = mse_loss(&p, &t).unwrap();
        assert_eq!(loss, 1.0);
        assert!(grad.data().iter().all(|&g| (g - 2.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_even_split() {
        let p = softmax(&Tensor::zeros(&[1, 2])).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_extreme_logits_stay_finite() {
        let logits = Tensor::new(&[1, 2], vec![1000.0, 0.0]).unwrap();
        let (loss, p, grad) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!(p.is_finite() && grad.is_finite() && loss.is_finite());
        assert!((p.data()[0] - 1.0).abs() < 1e-12 && p.data()[1] < 1e-12);
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let logits = Tensor::from_fn(&[5, 2], |i| (i as Scalar * 1.7).sin() * 30.0);
        let p = softmax(&logits).unwrap();
        for row in p.data().chunks(2) {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_label_rejected() {
        assert!(softmax_cross_entropy(&Tensor::zeros(&[1, 2]), &[2]).is_err());
    }
}
