use crate::data::SamplingMode;
use crate::error::{Error, Result};
use crate::nn::LOG_FLOOR;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchCost {
    pub cost: f64,
    /// Per-epoch factor applied to `p - y`; sums to 1.
    pub grad_scale: Vec<f64>,
    /// Cross entropy per epoch.
    pub losses: Vec<f64>,
}

/// Batch-averaged cross entropy; weighted mode normalizes by the sum of weights.
///
/// `probs` is row-major `[N, K]`.
pub fn batch_cost(probs: &[f64], classes: usize, labels: &[usize], weights: &[f64], mode: SamplingMode) -> Result<BatchCost> {
    let n = labels.len();
    if probs.len() != n * classes || weights.len() != n {
        return Err(Error::dim(
            "batch_cost",
            format!("{n} rows of {classes} probabilities and {n} weights"),
            format!("{} probabilities, {} weights", probs.len(), weights.len()),
        ));
    }
    if n == 0 {
        return Err(Error::Usage("batch_cost: empty batch".into()));
    }
    let losses: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[i * classes + y].max(LOG_FLOOR).ln())
        .collect();
    let grad_scale: Vec<f64> = match mode {
        SamplingMode::Weighted => {
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::NonFinite(format!("batch weights sum to {total}")));
            }
            weights.iter().map(|w| w / total).collect()
        }
        SamplingMode::Baseline | SamplingMode::Balanced => vec![1.0 / n as f64; n],
    };
    let cost = losses.iter().zip(&grad_scale).map(|(l, s)| l * s).sum();
    Ok(BatchCost {
        cost,
        grad_scale,
        losses,
    })
}
