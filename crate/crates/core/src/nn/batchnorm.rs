use super::context::{Cache, LayerContext};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization parameters and running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub epsilon: T,
    pub momentum: T,
}

impl<T: Real> BatchNormState<T> {
    /// gamma = 1, beta = 0, running mean 0 and running variance 1.
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            epsilon: T::of(DEFAULT_EPSILON),
            momentum: T::of(DEFAULT_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Batch mean and unbiased variance per channel, as folded into the running averages.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> BatchNormState<T> {
    /// `running <- momentum * running + (1 - momentum) * batch`.
    pub fn update_running(&mut self, stats: &BatchStats<T>) {
        let m = self.momentum;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = m * *r + (T::one() - m) * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = m * *r + (T::one() - m) * b;
        }
    }
}

/// Normalizes `[N, C, T]` per channel over the batch and time axes.
///
/// Training mode uses the batch statistics and folds them into the running
/// averages; inference mode uses the running averages only.
pub fn batchnorm_forward<T: Real>(
    input: &Tensor<T>,
    state: &mut BatchNormState<T>,
    training: bool,
    ctx: &mut LayerContext<T>,
) -> Result<Tensor<T>> {
    if training {
        let (out, stats) = batchnorm_batch(input, state, ctx)?;
        state.update_running(&stats);
        Ok(out)
    } else {
        batchnorm_inference(input, state)
    }
}

fn check_channels<T: Real>(input: &Tensor<T>, state: &BatchNormState<T>) -> Result<(usize, usize, usize)> {
    let (n, c, len) = input.dims3("batchnorm_forward")?;
    if c != state.channels() {
        return Err(Error::dim("batchnorm_forward", format!("{} channels", state.channels()), c));
    }
    Ok((n, c, len))
}

/// Inference-mode normalization with the running statistics.
pub fn batchnorm_inference<T: Real>(input: &Tensor<T>, state: &BatchNormState<T>) -> Result<Tensor<T>> {
    let (n, c, len) = check_channels(input, state)?;
    let scale: Vec<T> = (0..c)
        .map(|ch| state.gamma.data()[ch] / (state.running_var.data()[ch] + state.epsilon).sqrt())
        .collect();
    let shift: Vec<T> = (0..c)
        .map(|ch| state.beta.data()[ch] - scale[ch] * state.running_mean.data()[ch])
        .collect();
    let mut out = input.clone();
    for s in 0..n {
        for ch in 0..c {
            let off = (s * c + ch) * len;
            for v in &mut out.data_mut()[off..off + len] {
                *v = *v * scale[ch] + shift[ch];
            }
        }
    }
    Ok(out)
}

/// Training-mode normalization with batch statistics; leaves the running averages alone.
pub fn batchnorm_batch<T: Real>(
    input: &Tensor<T>,
    state: &BatchNormState<T>,
    ctx: &mut LayerContext<T>,
) -> Result<(Tensor<T>, BatchStats<T>)> {
    let (n, c, len) = check_channels(input, state)?;
    let count = n * len;
    if count == 0 {
        return Err(Error::Usage("batchnorm_forward: zero-size batch in training mode".into()));
    }
    let m = T::of(count as f64);
    let x = input.data();
    let mut normalized = Tensor::zeros(input.shape());
    let mut out = Tensor::zeros(input.shape());
    let mut inv_std = vec![T::zero(); c];
    let mut stats = BatchStats {
        mean: vec![T::zero(); c],
        var: vec![T::zero(); c],
    };

    for ch in 0..c {
        let mut sum = T::zero();
        for s in 0..n {
            let off = (s * c + ch) * len;
            sum += x[off..off + len].iter().copied().sum::<T>();
        }
        let mean = sum / m;
        let mut ss = T::zero();
        for s in 0..n {
            let off = (s * c + ch) * len;
            for &v in &x[off..off + len] {
                let d = v - mean;
                ss += d * d;
            }
        }
        let var = ss / m;
        let istd = T::one() / (var + state.epsilon).sqrt();
        inv_std[ch] = istd;
        let (g, b) = (state.gamma.data()[ch], state.beta.data()[ch]);
        for s in 0..n {
            let off = (s * c + ch) * len;
            let nh = &mut normalized.data_mut()[off..off + len];
            for (h, &v) in nh.iter_mut().zip(&x[off..off + len]) {
                *h = (v - mean) * istd;
            }
            let nh = &normalized.data()[off..off + len];
            for (o, &h) in out.data_mut()[off..off + len].iter_mut().zip(nh) {
                *o = g * h + b;
            }
        }
        stats.mean[ch] = mean;
        // running variance tracks the unbiased estimate
        stats.var[ch] = if count > 1 { ss / T::of((count - 1) as f64) } else { var };
    }

    ctx.store(Cache::BatchNorm {
        normalized,
        inv_std,
    });
    Ok((out, stats))
}

#[derive(Clone, Debug)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

/// Gradients of the training-mode forward, including the path through the batch statistics.
pub fn batchnorm_backward<T: Real>(
    grad_out: &Tensor<T>,
    gamma: &Tensor<T>,
    ctx: &LayerContext<T>,
) -> Result<BatchNormGrads<T>> {
    let Cache::BatchNorm {
        normalized,
        inv_std,
    } = &ctx.cache
    else {
        return Err(ctx.missing("batchnorm_backward"));
    };
    let (n, c, len) = grad_out.dims3("batchnorm_backward")?;
    if normalized.shape() != grad_out.shape() {
        return Err(Error::dim(
            "batchnorm_backward",
            format!("{:?}", normalized.shape()),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let m = T::of((n * len) as f64);
    let g = grad_out.data();
    let h = normalized.data();
    let mut g_input = Tensor::zeros(grad_out.shape());
    let mut g_gamma = Tensor::zeros(&[c]);
    let mut g_beta = Tensor::zeros(&[c]);

    for ch in 0..c {
        let mut sum_g = T::zero();
        let mut sum_gh = T::zero();
        for s in 0..n {
            let off = (s * c + ch) * len;
            for (&gv, &hv) in g[off..off + len].iter().zip(&h[off..off + len]) {
                sum_g += gv;
                sum_gh += gv * hv;
            }
        }
        g_beta.data_mut()[ch] = sum_g;
        g_gamma.data_mut()[ch] = sum_gh;
        let k = gamma.data()[ch] * inv_std[ch] / m;
        for s in 0..n {
            let off = (s * c + ch) * len;
            let gi = &mut g_input.data_mut()[off..off + len];
            for ((o, &gv), &hv) in gi.iter_mut().zip(&g[off..off + len]).zip(&h[off..off + len]) {
                *o = k * (m * gv - sum_g - hv * sum_gh);
            }
        }
    }

    Ok(BatchNormGrads {
        input: g_input,
        gamma: g_gamma,
        beta: g_beta,
    })
}
