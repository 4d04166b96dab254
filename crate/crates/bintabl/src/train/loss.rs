//! Weighted cross-entropy over the 3 movement classes.
//!
//! Each sample's loss term is multiplied by a per-class constant inversely
//! proportional to the class frequency, normalized so the mean weight is 1
//! (the effective learning rate is then independent of the weight scale).

use crate::error::{Error, Result};
use crate::layers::network::CLASSES;

const LOG_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassWeights(pub [f64; CLASSES]);

impl ClassWeights {
    pub fn uniform() -> Self {
        ClassWeights([1.0; CLASSES])
    }

    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut counts = [0usize; CLASSES];
        for &l in labels {
            if l >= CLASSES {
                return Err(Error::config(format!("label {l} out of range 0..{CLASSES}")));
            }
            counts[l] += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::config(format!(
                "class {k} has no samples; cannot weight an empty class"
            )));
        }
        let inv: [f64; CLASSES] = [
            1.0 / counts[0] as f64,
            1.0 / counts[1] as f64,
            1.0 / counts[2] as f64,
        ];
        let mean = inv.iter().sum::<f64>() / CLASSES as f64;
        Ok(ClassWeights([inv[0] / mean, inv[1] / mean, inv[2] / mean]))
    }
}

/// Mean over the batch of −w_y · log(p_y), plus the gradient with respect
/// to the logits: w_y · (p − onehot(y)) / N.
pub fn weighted_cross_entropy(
    probs: &[[f64; CLASSES]],
    labels: &[usize],
    weights: &ClassWeights,
) -> Result<(f64, Vec<[f64; CLASSES]>)> {
    if probs.len() != labels.len() {
        return Err(Error::contract(format!(
            "cross entropy: {} probability rows but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::contract("cross entropy: empty batch".to_string()));
    }
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(probs.len());
    for (p, &y) in probs.iter().zip(labels) {
        if y >= CLASSES {
            return Err(Error::config(format!("label {y} out of range 0..{CLASSES}")));
        }
        let w = weights.0[y];
        loss -= w * (p[y] + LOG_GUARD).ln();
        let mut g = [0.0; CLASSES];
        for k in 0..CLASSES {
            let onehot = if k == y { 1.0 } else { 0.0 };
            g[k] = w * (p[k] - onehot) / n;
        }
        grads.push(g);
    }
    Ok((loss / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::network::softmax3;

    #[test]
    fn unit_weights_reduce_to_plain_cross_entropy() {
        let probs = vec![[0.7, 0.2, 0.1], [0.1, 0.6, 0.3]];
        let labels = vec![0, 1];
        let (loss, _) = weighted_cross_entropy(&probs, &labels, &ClassWeights::uniform()).unwrap();
        let want = -((0.7f64 + LOG_GUARD).ln() + (0.6f64 + LOG_GUARD).ln()) / 2.0;
        assert!((loss - want).abs() < 1e-15);
    }

    #[test]
    fn onehot_prediction_has_near_zero_loss() {
        let probs = vec![[0.0, 1.0, 0.0]];
        let (loss, _) =
            weighted_cross_entropy(&probs, &[1], &ClassWeights([2.0, 3.0, 1.0])).unwrap();
        assert!(loss.abs() < 1e-11);
    }

    #[test]
    fn hand_computed_weighted_loss() {
        let probs = vec![[0.5, 0.25, 0.25], [0.1, 0.8, 0.1]];
        let labels = vec![0, 1];
        let weights = ClassWeights([2.0, 1.0, 1.0]);
        let (loss, _) = weighted_cross_entropy(&probs, &labels, &weights).unwrap();
        let want = (2.0 * 2.0f64.ln() + 1.25f64.ln()) / 2.0;
        assert!((loss - want).abs() < 1e-9, "{loss} vs {want}");
    }

    #[test]
    fn gradient_matches_finite_differences_on_logits() {
        let logits = vec![[0.3, -0.7, 1.1], [-0.2, 0.4, 0.0], [2.0, 1.0, -1.0]];
        let labels = vec![2, 0, 1];
        let weights = ClassWeights([1.3, 0.8, 0.9]);
        let loss_of = |ls: &[[f64; 3]]| {
            let probs: Vec<[f64; 3]> = ls.iter().map(softmax3).collect();
            weighted_cross_entropy(&probs, &labels, &weights).unwrap().0
        };
        let probs: Vec<[f64; 3]> = logits.iter().map(softmax3).collect();
        let (_, grads) = weighted_cross_entropy(&probs, &labels, &weights).unwrap();
        let h = 1e-6;
        for i in 0..logits.len() {
            for k in 0..3 {
                let mut plus = logits.clone();
                let mut minus = logits.clone();
                plus[i][k] += h;
                minus[i][k] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                assert!(
                    (grads[i][k] - fd).abs() < 1e-6,
                    "sample {i} class {k}: {} vs {}",
                    grads[i][k],
                    fd
                );
            }
        }
    }

    #[test]
    fn class_weights_inverse_frequency_mean_one() {
        let labels: Vec<usize> = std::iter::repeat_n(0, 10)
            .chain(std::iter::repeat_n(1, 20))
            .chain(std::iter::repeat_n(2, 10))
            .collect();
        let w = ClassWeights::from_labels(&labels).unwrap();
        assert!((w.0[0] - 1.2).abs() < 1e-12);
        assert!((w.0[1] - 0.6).abs() < 1e-12);
        assert!((w.0[2] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn balanced_counts_give_unit_weights() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let w = ClassWeights::from_labels(&labels).unwrap();
        assert_eq!(w, ClassWeights::uniform());
    }

    #[test]
    fn empty_class_is_an_error() {
        let err = ClassWeights::from_labels(&[0, 0, 1]).unwrap_err();
        assert_eq!(err.category(), crate::error::Category::Config);
    }
}
