use super::Tensor;
use crate::error::{Error, Result};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// Returns `-ln softmax(logits)[target]` and its gradient
/// `softmax(logits) - onehot(target)`.
pub fn softmax_cross_entropy_slice(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::invalid(format!(
            "target id {target} out of range for {} logits",
            logits.len()
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("non-finite logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut grad: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = grad.iter().sum();
    let loss = sum.ln() - (logits[target] - max);
    grad.iter_mut().for_each(|p| *p /= sum);
    grad[target] -= 1.0;
    Ok((loss.max(0.0), grad))
}

pub fn softmax_cross_entropy(logits: &Tensor, target: usize) -> Result<(f64, Tensor)> {
    if logits.shape().len() != 1 {
        return Err(Error::Shape(format!(
            "logits must be a vector, got {:?}",
            logits.shape()
        )));
    }
    let (loss, grad) = softmax_cross_entropy_slice(logits.data(), target)?;
    Ok((loss, Tensor::vector(grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let (loss, grad) = softmax_cross_entropy(&Tensor::zeros(&[20]), 3).unwrap();
        assert!((loss - 20f64.ln()).abs() < 1e-12);
        assert!((loss - 2.99573).abs() < 1e-5);
        assert!((grad.data()[3] - (0.05 - 1.0)).abs() < 1e-15);
        assert!((grad.data()[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn large_margin_drives_loss_to_zero() {
        let mut logits = vec![0.0; 20];
        logits[7] = 1e4;
        let (loss, _) = softmax_cross_entropy_slice(&logits, 7).unwrap();
        assert_eq!(loss, 0.0);
        let (wrong, _) = softmax_cross_entropy_slice(&logits, 2).unwrap();
        assert!((wrong - 1e4).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_target_and_non_finite() {
        assert!(softmax_cross_entropy_slice(&[0.0, 1.0], 2).is_err());
        assert!(softmax_cross_entropy_slice(&[f64::INFINITY, 1.0], 0).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let logits = [0.3, -1.2, 2.5, 0.0, 0.7, -0.4];
        let target = 4;
        let (_, grad) = softmax_cross_entropy_slice(&logits, target).unwrap();
        let h = 1e-6;
        for k in 0..logits.len() {
            let mut plus = logits;
            let mut minus = logits;
            plus[k] += h;
            minus[k] -= h;
            let lp = softmax_cross_entropy_slice(&plus, target).unwrap().0;
            let lm = softmax_cross_entropy_slice(&minus, target).unwrap().0;
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (numeric - grad[k]).abs() / grad[k].abs().max(numeric.abs());
            assert!(rel < 1e-6, "coordinate {k}: {numeric} vs {}", grad[k]);
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            let p = softmax(&logits);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x > 0.0));
        }

        #[test]
        fn loss_is_non_negative(logits in prop::collection::vec(-20.0f64..20.0, 2..30), t in 0usize..2) {
            let (loss, grad) = softmax_cross_entropy_slice(&logits, t).unwrap();
            prop_assert!(loss >= 0.0);
            prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
