//! Loss components for the three training phases.
//!
//! Reconstruction losses sum squared error over channel x tap per sample and
//! average over the batch. Domain loss is mean binary cross-entropy with
//! probabilities clamped at 1e-7. The composite losses are plain weighted
//! sums; gradient weighting of the domain term is handled by the GRL.

use ndarray::{Array2, Array3};

use crate::error::{JamlocError, Result};

pub const PROB_CLAMP: f64 = 1e-7;

/// Mean over samples of the squared L2 norm of `recon - clean`.
pub fn loss_rec(recon: &Array3<f64>, clean: &Array3<f64>) -> Result<f64> {
    if recon.dim() != clean.dim() {
        return Err(JamlocError::Invalid(format!(
            "shape mismatch {:?} vs {:?}",
            recon.dim(),
            clean.dim()
        )));
    }
    let b = recon.dim().0 as f64;
    let sse: f64 = recon
        .iter()
        .zip(clean.iter())
        .map(|(r, c)| (r - c) * (r - c))
        .sum();
    Ok(sse / b)
}

/// `loss_rec` plus its gradient w.r.t. `recon`.
pub fn loss_rec_grad(recon: &Array3<f64>, clean: &Array3<f64>) -> Result<(f64, Array3<f64>)> {
    let l = loss_rec(recon, clean)?;
    let b = recon.dim().0 as f64;
    let grad = (recon - clean) * (2.0 / b);
    Ok((l, grad))
}

/// Mean BCE over the batch; labels are 0 (source) / 1 (target).
pub fn loss_dom(probs: &Array2<f64>, labels: &[f64]) -> Result<f64> {
    if probs.dim().0 != labels.len() || probs.dim().1 != 1 {
        return Err(JamlocError::Invalid("domain loss shape mismatch".into()));
    }
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let p = probs[[i, 0]].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        total += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    Ok(total / labels.len() as f64)
}

/// `loss_dom` plus its gradient w.r.t. the probabilities.
pub fn loss_dom_grad(probs: &Array2<f64>, labels: &[f64]) -> Result<(f64, Array2<f64>)> {
    let l = loss_dom(probs, labels)?;
    let n = labels.len() as f64;
    let mut grad = Array2::<f64>::zeros(probs.raw_dim());
    for (i, &y) in labels.iter().enumerate() {
        let p = probs[[i, 0]].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        grad[[i, 0]] = (p - y) / (p * (1.0 - p)) / n;
    }
    Ok((l, grad))
}

/// Mean squared Euclidean distance between predicted and true coordinates.
pub fn loss_reg(preds: &Array2<f64>, truths: &Array2<f64>) -> Result<f64> {
    if preds.dim() != truths.dim() {
        return Err(JamlocError::Invalid("regression loss shape mismatch".into()));
    }
    let b = preds.dim().0 as f64;
    let sse: f64 = preds
        .iter()
        .zip(truths.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sse / b)
}

pub fn loss_reg_grad(preds: &Array2<f64>, truths: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    let l = loss_reg(preds, truths)?;
    let b = preds.dim().0 as f64;
    let grad = (preds - truths) * (2.0 / b);
    Ok((l, grad))
}

/// Alignment-phase composite: `l_rec + lambda * l_dom`.
pub fn loss_adapt(l_rec: f64, l_dom: f64, lambda: f64) -> f64 {
    l_rec + lambda * l_dom
}

/// Fine-tuning composite: `alpha * l_rec_ft + beta * l_reg + lambda_ft * l_dom_ft`.
pub fn loss_ft(
    l_rec_ft: f64,
    l_reg: f64,
    l_dom_ft: f64,
    alpha: f64,
    beta: f64,
    lambda_ft: f64,
) -> f64 {
    alpha * l_rec_ft + beta * l_reg + lambda_ft * l_dom_ft
}
