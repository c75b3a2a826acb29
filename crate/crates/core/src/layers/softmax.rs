use crate::error::{Error, Result};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::shape("softmax of an empty vector"));
    }
    if logits.iter().any(|z| z.is_nan()) {
        return Err(Error::Numeric(format!("NaN logit in {logits:?}")));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// `dL/dlogits = probs - onehot(label)`
    pub grad_logits: Vec<f64>,
    /// Set when `probs[label]` fell below [`PROB_FLOOR`].
    pub clamped: bool,
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<CrossEntropy> {
    if label >= probs.len() {
        return Err(Error::shape(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let p = probs[label];
    let clamped = p < PROB_FLOOR;
    let loss = -p.max(PROB_FLOOR).ln();
    let mut grad_logits = probs.to_vec();
    grad_logits[label] -= 1.0;
    Ok(CrossEntropy {
        loss,
        grad_logits,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(softmax(&[1000.0, 1000.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[2.0, 0.0]).unwrap();
        let e2 = 2f64.exp();
        assert!((p[0] - e2 / (e2 + 1.0)).abs() < 1e-15);
        assert!((p[0] - 0.8808).abs() < 1e-4);
        assert!((p[1] - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn nan_logit_is_rejected() {
        assert!(matches!(softmax(&[f64::NAN, 0.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn cross_entropy_examples() {
        let ce = cross_entropy(&[1.0 - 1e-15, 1e-15], 0).unwrap();
        assert!(ce.loss.abs() < 1e-12);
        let ce = cross_entropy(&[0.5, 0.5], 1).unwrap();
        assert!((ce.loss - 2f64.ln()).abs() < 1e-15);
        assert!((ce.loss - 0.6931).abs() < 1e-4);
        let ce = cross_entropy(&[0.8808, 0.1192], 1).unwrap();
        assert!((ce.grad_logits[0] - 0.8808).abs() < 1e-15);
        assert!((ce.grad_logits[1] + 0.8808).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_is_clamped_and_flagged() {
        let ce = cross_entropy(&[1.0, 0.0], 1).unwrap();
        assert!(ce.clamped);
        assert!((ce.loss + PROB_FLOOR.ln()).abs() < 1e-9);
        assert!(!cross_entropy(&[0.5, 0.5], 0).unwrap().clamped);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(a in -1e4..1e4f64, b in -1e4..1e4f64) {
            let p = softmax(&[a, b]).unwrap();
            prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn softmax_open_interval_for_moderate_logits(a in -15.0..15.0f64, b in -15.0..15.0f64) {
            let p = softmax(&[a, b]).unwrap();
            prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
