use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{one_hot, softmax_xent};
use crate::resnet::{build_model, ModelConfig, ModelParams};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub model: ModelConfig,
    pub batch: usize,
    pub seed: u64,
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            model: ModelConfig::miniature(),
            batch: 4,
            seed: 11,
            step: 1e-5,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub elements: usize,
    /// `|a - n| / max(|a| + |n|, floor)` in the 2-norm over the tensor.
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
    pub max_relative_error: f64,
    pub worst: String,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn failures(&self) -> Vec<&str> {
        self.tensors.iter().filter(|t| !t.passed).map(|t| t.name.as_str()).collect()
    }
}

/// Tensors whose true gradient is exactly zero (a bias feeding straight into a
/// batch norm) would otherwise divide round-off by round-off.
const NORM_FLOOR: f64 = 1e-6;

fn mean_xent(p: &ModelParams<f64>, x: &Tensor<f64>, y: &Tensor<f64>) -> Result<f64> {
    let (logits, _) = p.forward_train(x)?;
    Ok(softmax_xent(&logits, y)?.loss.sum() / x.shape()[0] as f64)
}

/// Finite-difference check of every trainable tensor of a double-precision model.
pub fn grad_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    grad_check_with(config, |_| {})
}

/// As [`grad_check`], with `tamper` applied to the analytic gradients before
/// comparison (for exercising the failure path).
pub fn grad_check_with(config: &GradCheckConfig, tamper: impl FnOnce(&mut ModelParams<f64>)) -> Result<GradCheckReport> {
    let cfg = &config.model;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = build_model::<f64>(cfg, config.seed)?;
    // move BN affine params and biases off their initial values so every path carries signal
    for (_, role, t) in params.trainable_mut() {
        if !role.is_decayed() {
            for v in t.data_mut() {
                *v += 0.2 * rng.random_range(-1.0..1.0);
            }
        }
    }
    let x = Tensor::from_fn(&[config.batch, cfg.input_channels, cfg.epoch_samples], |_| rng.random_range(-1.0..1.0));
    let labels: Vec<usize> = (0..config.batch).map(|_| rng.random_range(0..cfg.num_classes)).collect();
    let y = one_hot::<f64>(&labels, cfg.num_classes);

    let (logits, trace) = params.forward_train(&x)?;
    let mut g = softmax_xent(&logits, &y)?.grad_logits;
    g.scale(1.0 / config.batch as f64);
    let mut grads = params.backward(&trace, &g)?;
    tamper(&mut grads);

    let names = params.trainable_names();
    let analytic: Vec<Tensor<f64>> = grads.trainable().into_iter().cloned().collect();
    let mut tensors = Vec::with_capacity(names.len());
    let mut probe = params.clone();
    for (i, name) in names.iter().enumerate() {
        let len = analytic[i].len();
        let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..len {
            let orig = probe.trainable()[i].data()[j];
            probe.trainable_mut()[i].2.data_mut()[j] = orig + config.step;
            let up = mean_xent(&probe, &x, &y)?;
            probe.trainable_mut()[i].2.data_mut()[j] = orig - config.step;
            let down = mean_xent(&probe, &x, &y)?;
            probe.trainable_mut()[i].2.data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * config.step);
            let a = analytic[i].data()[j];
            diff += (a - numeric).powi(2);
            na += a * a;
            nn += numeric * numeric;
        }
        let err = diff.sqrt() / (na.sqrt() + nn.sqrt()).max(NORM_FLOOR);
        tensors.push(TensorCheck {
            name: name.clone(),
            elements: len,
            relative_error: err,
            passed: err < config.tolerance,
        });
    }
    let (worst, max_err) = tensors
        .iter()
        .map(|t| (t.name.clone(), t.relative_error))
        .fold((String::new(), 0.0), |acc, (n, e)| if e > acc.1 { (n, e) } else { acc });
    Ok(GradCheckReport {
        tolerance: config.tolerance,
        passed: tensors.iter().all(|t| t.passed),
        tensors,
        max_relative_error: max_err,
        worst,
    })
}
