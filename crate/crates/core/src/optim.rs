//! Adam with L2 weight decay, a step learning-rate schedule and
//! variance-scaling initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub alpha0: f64,
    pub decay_every: u64,
    pub decay_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            alpha0: 1e-3,
            decay_every: 50_000,
            decay_factor: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) {
            return Err(Error::Config("alpha0 must be positive".into()));
        }
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::Config("beta1 and beta2 must lie in (0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("decay_every must be >= 1".into()));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::Config("adam_epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// `alpha0 * decay_factor^floor(step / decay_every)`.
pub fn lr_at(step: u64, config: &OptimConfig) -> f64 {
    let drops = (step / config.decay_every) as i32;
    let mut lr = config.alpha0;
    // repeated multiplication keeps lr_at(50000) == 1e-4 exactly for the defaults
    for _ in 0..drops {
        lr *= config.decay_factor;
    }
    lr
}

/// A trainable tensor handed to the optimizer.
pub struct ParamMut<'a, T> {
    pub name: &'a str,
    /// Whether L2 weight decay applies (conv and dense weights only).
    pub decay: bool,
    pub value: &'a mut Tensor<T>,
}

/// Step counter plus first/second moment estimates, one pair per trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(shapes: &[&[usize]]) -> Self {
        AdamState {
            step: 0,
            first: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }
}

/// One Adam update at `lr_at(state.step)`; the step counter is incremented
/// before bias correction.
///
/// Gradients are screened for NaN/Inf first so a bad step leaves both the
/// parameters and the optimizer state untouched.
pub fn adam_step<T: Real>(
    params: &mut [ParamMut<'_, T>],
    grads: &[&Tensor<T>],
    state: &mut AdamState<T>,
    config: &OptimConfig,
) -> Result<f64> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::dim(
            "adam_step",
            format!("{} parameter tensors", state.first.len()),
            format!("{} params / {} grads", params.len(), grads.len()),
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.value.shape() != g.shape() {
            return Err(Error::dim(
                "adam_step",
                format!("{} {:?}", p.name, p.value.shape()),
                format!("{:?}", g.shape()),
            ));
        }
        if !g.all_finite() {
            return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
        }
    }

    let lr = lr_at(state.step, config);
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    let (b1, b2) = (T::of(config.beta1), T::of(config.beta2));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let step_size = T::of(lr / c1);
    let inv_c2 = T::of(1.0 / c2);
    let eps = T::of(config.adam_epsilon);
    let lambda = T::of(config.weight_decay);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let decay = p.decay && config.weight_decay > 0.0;
        let w = p.value.data_mut();
        let m = state.first[i].data_mut();
        let v = state.second[i].data_mut();
        for j in 0..w.len() {
            let mut gj = g.data()[j];
            if decay {
                gj += lambda * w[j];
            }
            m[j] = b1 * m[j] + one_b1 * gj;
            v[j] = b2 * v[j] + one_b2 * gj * gj;
            w[j] -= step_size * m[j] / ((v[j] * inv_c2).sqrt() + eps);
        }
    }
    Ok(lr)
}

/// Standard deviation of a unit normal truncated to ±2.
const TRUNCATED_STD: f64 = 0.879_625_661_034_239_8;

/// Zero-mean draws with variance `2 / fan_in` from a normal truncated at two
/// standard deviations, rescaled so the truncation does not shrink the variance.
pub fn variance_scaling_init<T: Real>(shape: &[usize], fan_in: usize, seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    variance_scaling_with(&mut rng, shape, fan_in)
}

pub fn variance_scaling_with<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    shape: &[usize],
    fan_in: usize,
) -> Tensor<T> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt() / TRUNCATED_STD;
    Tensor::from_fn(shape, |_| loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            break T::of(z * std);
        }
    })
}
