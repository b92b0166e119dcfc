use crate::error::{Error, Result};

/// Mean squared error and its gradient with respect to `pred`.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "mse target",
            expected: pred.len(),
            actual: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "mse prediction",
            expected: 1,
            actual: 0,
        });
    }
    let n = pred.len() as f64;
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.iter().map(|d| 2.0 * d / n).collect();
    Ok((loss, grad))
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax cross-entropy. The gradient is `softmax(logits) - onehot(label)`.
pub fn loss_ce(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let loss = log_sum_exp(logits) - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss.max(0.0), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    #[test]
    fn mse_basics() {
        assert_eq!(loss_mse(&[1.5, 2.0], &[1.5, 2.0]).unwrap().0, 0.0);
        assert_eq!(loss_mse(&[1.0], &[3.0]).unwrap().0, 4.0);
        assert!(loss_mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let target = [0.3, -1.1, 2.4];
        let pred = [1.2, 0.4, -0.7];
        let (_, grad) = loss_mse(&pred, &target).unwrap();
        let report = grad_check(|p: &[f64]| loss_mse(p, &target).unwrap().0, &pred, &grad);
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn ce_uniform_logits() {
        let (loss, _) = loss_ce(&[0.0, 0.0], 0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn ce_is_stable_for_huge_logits() {
        let (loss, grad) = loss_ce(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.is_finite() && loss < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (loss, _) = loss_ce(&[1000.0, 0.0], 1).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn ce_gradient_sums_to_zero_and_matches_finite_differences() {
        let logits = [0.4, -1.3, 2.2, 0.05];
        let (_, grad) = loss_ce(&logits, 2).unwrap();
        assert!(grad.iter().sum::<f64>().abs() < 1e-15);
        let report = grad_check(|p: &[f64]| loss_ce(p, 2).unwrap().0, &logits, &grad);
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn ce_rejects_bad_label() {
        assert!(matches!(loss_ce(&[0.0, 1.0], 2), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[3.0, -700.0, 12.5, 0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
