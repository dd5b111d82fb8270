use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Probabilities are clamped here before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = logits.dims2("softmax")?;
    let mut probs = logits.clone();
    for row in probs.data_mut().chunks_mut(k.max(1)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(probs)
}

#[derive(Clone, Debug)]
pub struct SoftmaxXent<T> {
    pub probs: Tensor<T>,
    /// Cross entropy per row.
    pub loss: Tensor<T>,
    /// `p - y`, unscaled.
    pub grad_logits: Tensor<T>,
}

/// Softmax followed by cross entropy against one-hot targets.
pub fn softmax_xent<T: Real>(logits: &Tensor<T>, labels: &Tensor<T>) -> Result<SoftmaxXent<T>> {
    let (n, _) = logits.dims2("softmax_xent")?;
    if labels.shape() != logits.shape() {
        return Err(Error::dim(
            "softmax_xent",
            format!("labels {:?}", logits.shape()),
            format!("{:?}", labels.shape()),
        ));
    }
    let probs = softmax(logits)?;
    let floor = T::of(LOG_FLOOR);
    let mut loss = Tensor::zeros(&[n]);
    let mut grad = probs.clone();
    for i in 0..n {
        let (p, y) = (probs.row(i), labels.row(i));
        loss.data_mut()[i] = -p
            .iter()
            .zip(y)
            .filter(|(_, &yk)| yk != T::zero())
            .map(|(&pk, &yk)| yk * pk.max(floor).ln())
            .sum::<T>();
        for (g, &yk) in grad.row_mut(i).iter_mut().zip(y) {
            *g -= yk;
        }
    }
    Ok(SoftmaxXent {
        probs,
        loss,
        grad_logits: grad,
    })
}

/// One-hot rows for class indices.
pub fn one_hot<T: Real>(labels: &[usize], classes: usize) -> Tensor<T> {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (i, &c) in labels.iter().enumerate() {
        t.row_mut(i)[c] = T::one();
    }
    t
}
