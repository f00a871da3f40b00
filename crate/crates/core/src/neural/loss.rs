use crate::count::LOG_PROB_FLOOR;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CeLoss {
    /// Batch mean of the per-instance soft-target cross-entropy.
    pub loss: f64,
    /// `(probs - weights) / n`
    pub grad_logits: Matrix,
    /// A probability under `exp(LOG_PROB_FLOOR)` carried positive weight and
    /// was clamped in the loss.
    pub saturated: bool,
}

/// Soft-target cross-entropy `-(1/n) sum_i sum_j w_ij log p_ij`.
///
/// Only entries with `w_ij > 0` enter the sum, visited row by row in class
/// order. `weights` rows must sum to one, which makes the logit gradient
/// `(p - w) / n`.
pub fn reweighted_ce(probs: &Matrix, weights: &Matrix) -> Result<CeLoss> {
    let (n, m) = (probs.rows(), probs.cols());
    if (weights.rows(), weights.cols()) != (n, m) {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            found: weights.rows() * weights.cols(),
        });
    }
    if n == 0 {
        return Err(Error::param("batch", "cross-entropy of an empty batch"));
    }
    for (i, row) in weights.iter_rows().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&w| w < 0.0) {
            return Err(Error::param(
                "weights",
                format!("row {i} is not a distribution (sum {s})"),
            ));
        }
    }

    let mut saturated = false;
    let mut total = 0.0;
    for (p_row, w_row) in probs.iter_rows().zip(weights.iter_rows()) {
        let mut row_sum = 0.0;
        for (&p, &w) in p_row.iter().zip(w_row) {
            if w > 0.0 {
                let mut lp = p.ln();
                if lp < LOG_PROB_FLOOR {
                    lp = LOG_PROB_FLOOR;
                    saturated = true;
                }
                row_sum += w * lp;
            }
        }
        total += row_sum;
    }
    let inv_n = 1.0 / n as f64;
    let mut grad_logits = probs.clone();
    grad_logits.add_scaled(weights, -1.0);
    grad_logits.scale(inv_n);
    Ok(CeLoss {
        loss: -total * inv_n,
        grad_logits,
        saturated,
    })
}
