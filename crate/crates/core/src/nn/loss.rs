//! Loss functions with fused output nonlinearities.
//!
//! Both losses are averaged over the batch, and so are the returned gradients.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn validate_onehot(onehot: &Matrix) -> Result<Vec<usize>> {
    onehot
        .row_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut hot = None;
            for (j, &v) in row.iter().enumerate() {
                if v == 1.0 && hot.is_none() {
                    hot = Some(j);
                } else if v != 0.0 {
                    return Err(Error::Validation(format!("row {i} is not one-hot")));
                }
            }
            hot.ok_or_else(|| Error::Validation(format!("row {i} is not one-hot")))
        })
        .collect()
}

/// Mean cross-entropy between `softmax(logits)` and one-hot targets.
///
/// Returns the loss and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Matrix, onehot: &Matrix) -> Result<(f64, Matrix)> {
    if logits.rows() != onehot.rows() || logits.cols() != onehot.cols() {
        return Err(Error::shape(
            "softmax_cross_entropy",
            format!("{}x{}", logits.rows(), logits.cols()),
            format!("{}x{}", onehot.rows(), onehot.cols()),
        ));
    }
    let labels = validate_onehot(onehot)?;
    let batch = logits.rows() as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        let g = grad.row_mut(r);
        g[label] -= 1.0;
        g.iter_mut().for_each(|v| *v /= batch);
    }
    let loss = loss / batch;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    Ok((loss, grad))
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy on logits: `-[t log s(z) + (1 - t) log s(-z)]`.
///
/// Targets are usually 0 or 1; values in between are accepted for label smoothing.
pub fn sigmoid_bce(logits: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != targets.len() {
        return Err(Error::shape("sigmoid_bce", logits.len(), targets.len()));
    }
    if logits.is_empty() {
        return Err(Error::Validation("empty batch".into()));
    }
    if let Some(t) = targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Validation(format!("BCE target {t} outside [0, 1]")));
    }
    let batch = logits.len() as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&z, &t)| {
            loss += softplus(z) - t * z;
            (sigmoid(z) - t) / batch
        })
        .collect();
    Ok((loss / batch, grad))
}
