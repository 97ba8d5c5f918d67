//! Accuracy and chance-corrected agreement metrics.
//!
//! Cohen's kappa is computed as `(Po - Pe) / (1 - Pe)` where `Po` is the
//! observed agreement and `Pe` the chance agreement. Two chance models are
//! supported: `Uniform` takes `Pe = 1/k` (random guessing over a fixed
//! choice set), `Marginal` takes the usual product of the two raters'
//! label marginals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {preds} predictions vs {golds} golds")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("label {label} out of range for k={k}")]
    LabelOutOfRange { label: usize, k: usize },
}

/// Chance model used for the expected-agreement term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChanceMode {
    Uniform,
    Marginal,
}

impl std::fmt::Display for ChanceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChanceMode::Uniform => write!(f, "uniform"),
            ChanceMode::Marginal => write!(f, "marginal"),
        }
    }
}

/// Gold-by-predicted count matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub k: usize,
    /// Row-major `k` x `k`; rows are gold labels, columns predictions.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl ConfusionMatrix {
    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold * self.k + pred]
    }

    pub fn diagonal_sum(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }
}

fn check_labels(preds: &[usize], golds: &[usize], k: usize) -> Result<(), MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    for &label in preds.iter().chain(golds.iter()) {
        if label >= k {
            return Err(MetricsError::LabelOutOfRange { label, k });
        }
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(preds: &[usize], golds: &[usize]) -> Result<f64, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Cohen's kappa. Returns `Ok(None)` when the chance agreement is 1 (only
/// possible in marginal mode with both raters constant on the same label),
/// where kappa is undefined.
pub fn cohen_kappa(
    preds: &[usize],
    golds: &[usize],
    k: usize,
    mode: ChanceMode,
) -> Result<Option<f64>, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    check_labels(preds, golds, k)?;
    let n = preds.len() as f64;
    let po = preds.iter().zip(golds).filter(|(p, g)| p == g).count() as f64 / n;
    let pe = match mode {
        ChanceMode::Uniform => 1.0 / k as f64,
        ChanceMode::Marginal => {
            let mut gold_counts = vec![0u64; k];
            let mut pred_counts = vec![0u64; k];
            for (&p, &g) in preds.iter().zip(golds) {
                pred_counts[p] += 1;
                gold_counts[g] += 1;
            }
            (0..k)
                .map(|c| (gold_counts[c] as f64 / n) * (pred_counts[c] as f64 / n))
                .sum()
        }
    };
    if pe >= 1.0 {
        return Ok(None);
    }
    Ok(Some((po - pe) / (1.0 - pe)))
}

/// Uniform-mode kappa straight from an accuracy, `(acc - 1/k) / (1 - 1/k)`.
///
/// Used where only per-instance correctness is known (LLM result records),
/// which pins the chance model to random guessing over `k` choices.
pub fn kappa_from_accuracy(acc: f64, k: usize) -> f64 {
    let chance = 1.0 / k as f64;
    (acc - chance) / (1.0 - chance)
}

pub fn confusion(
    preds: &[usize],
    golds: &[usize],
    k: usize,
) -> Result<ConfusionMatrix, MetricsError> {
    check_labels(preds, golds, k)?;
    let mut counts = vec![0u64; k * k];
    for (&p, &g) in preds.iter().zip(golds) {
        counts[g * k + p] += 1;
    }
    Ok(ConfusionMatrix {
        k,
        counts,
        total: preds.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&[0, 1, 0, 1, 2], &[0, 1, 0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0, 1], &[0, 1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 1], &[0, 1, 1, 0]).unwrap(), 0.75);
    }

    #[test]
    fn accuracy_errors() {
        assert!(matches!(accuracy(&[], &[]), Err(MetricsError::EmptyInput)));
        assert!(matches!(
            accuracy(&[0], &[0, 1]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn kappa_perfect_agreement_is_one() {
        let v = vec![0, 1, 2, 1, 0];
        assert_eq!(
            cohen_kappa(&v, &v, 3, ChanceMode::Uniform).unwrap(),
            Some(1.0)
        );
        assert_eq!(
            cohen_kappa(&v, &v, 3, ChanceMode::Marginal).unwrap(),
            Some(1.0)
        );
    }

    // k = 4, uniform chance, Po = 0.625: kappa = (0.625 - 0.25) / 0.75 = 0.5.
    #[test]
    fn kappa_uniform_k4() {
        let golds = vec![0, 1, 2, 3, 0, 1, 2, 3];
        let preds = vec![0, 1, 2, 3, 0, 0, 0, 0];
        let kappa = cohen_kappa(&preds, &golds, 4, ChanceMode::Uniform)
            .unwrap()
            .unwrap();
        assert!((kappa - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kappa_marginal_constant_predictor_is_zero() {
        let preds = vec![0, 0, 0, 0];
        let golds = vec![0, 0, 1, 1];
        let kappa = cohen_kappa(&preds, &golds, 2, ChanceMode::Marginal)
            .unwrap()
            .unwrap();
        assert_eq!(kappa, 0.0);
    }

    #[test]
    fn kappa_marginal_degenerate_is_undefined() {
        let preds = vec![0, 0, 0];
        let golds = vec![0, 0, 0];
        assert_eq!(
            cohen_kappa(&preds, &golds, 2, ChanceMode::Marginal).unwrap(),
            None
        );
    }

    #[test]
    fn kappa_out_of_range_label() {
        assert!(matches!(
            cohen_kappa(&[5], &[0], 2, ChanceMode::Uniform),
            Err(MetricsError::LabelOutOfRange { label: 5, k: 2 })
        ));
    }

    #[test]
    fn kappa_uniform_matches_accuracy_identity() {
        let preds = vec![0, 1, 2, 0, 1, 2, 2, 2];
        let golds = vec![0, 2, 2, 0, 1, 0, 2, 1];
        for k in [3usize, 4, 5] {
            let acc = accuracy(&preds, &golds).unwrap();
            let kappa = cohen_kappa(&preds, &golds, k, ChanceMode::Uniform)
                .unwrap()
                .unwrap();
            assert_eq!(kappa, kappa_from_accuracy(acc, k));
        }
    }

    #[test]
    fn confusion_counts_and_diagonal() {
        let m = confusion(&[0, 1], &[0, 0], 2).unwrap();
        assert_eq!(m.counts, vec![1, 1, 0, 0]);
        assert_eq!(m.total, 2);
        assert_eq!(m.diagonal_sum(), 1);

        let empty = confusion(&[], &[], 2).unwrap();
        assert_eq!(empty.total, 0);
        assert_eq!(empty.counts, vec![0, 0, 0, 0]);
    }

    #[test]
    fn confusion_diagonal_over_total_equals_accuracy() {
        let preds = vec![0, 1, 1, 0, 1];
        let golds = vec![0, 1, 0, 0, 1];
        let m = confusion(&preds, &golds, 2).unwrap();
        let acc = accuracy(&preds, &golds).unwrap();
        assert_eq!(m.diagonal_sum() as f64 / m.total as f64, acc);
    }

    #[test]
    fn kappa_joint_permutation_invariant() {
        let preds = vec![0, 1, 1, 2, 0, 2, 1];
        let golds = vec![0, 1, 0, 2, 2, 2, 1];
        let perm = [3usize, 0, 6, 2, 5, 1, 4];
        let preds_p: Vec<usize> = perm.iter().map(|&i| preds[i]).collect();
        let golds_p: Vec<usize> = perm.iter().map(|&i| golds[i]).collect();
        for mode in [ChanceMode::Uniform, ChanceMode::Marginal] {
            assert_eq!(
                cohen_kappa(&preds, &golds, 3, mode).unwrap(),
                cohen_kappa(&preds_p, &golds_p, 3, mode).unwrap()
            );
        }
    }
}
