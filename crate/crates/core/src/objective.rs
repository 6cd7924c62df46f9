//! Losses and evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First and second derivative of the loss with respect to the raw prediction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradPair {
    pub g: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `l = 0.5 * (pred - y)^2`
    SquaredError,
    /// Negative log-likelihood of `sigmoid(pred)` with labels in {0, 1}.
    Logistic,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LossKind {
    pub fn loss(self, pred: f64, label: f64) -> f64 {
        match self {
            LossKind::SquaredError => 0.5 * (pred - label) * (pred - label),
            // log(1 + e^x) - y*x, written to avoid overflow
            LossKind::Logistic => pred.max(0.0) + (-pred.abs()).exp().ln_1p() - label * pred,
        }
    }

    #[inline]
    pub fn grad_pair(self, pred: f64, label: f64) -> GradPair {
        match self {
            LossKind::SquaredError => GradPair { g: pred - label, h: 1.0 },
            LossKind::Logistic => {
                let p = sigmoid(pred);
                GradPair { g: p - label, h: p * (1.0 - p) }
            }
        }
    }
}

pub fn compute_gradients(kind: LossKind, preds: &[f64], labels: &[f64]) -> Result<Vec<GradPair>> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: labels.len() });
    }
    if kind == LossKind::Logistic {
        if let Some(row) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidLabel { row, value: labels[row] });
        }
    }
    Ok(preds.iter().zip(labels).map(|(&p, &y)| kind.grad_pair(p, y)).collect())
}

pub fn metric_rmse(preds: &[f64], labels: &[f64]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: labels.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyData);
    }
    let sse: f64 = preds.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((sse / preds.len() as f64).sqrt())
}

/// Area under the ROC curve via rank summation; tied scores share their average rank.
pub fn metric_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    if let Some(row) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidLabel { row, value: labels[row] });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the average rank
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}
