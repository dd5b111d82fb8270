use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::Result;
use crate::nn::BatchNormState;
use crate::optim::{variance_scaling_init, ParamMut};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
}

impl ParamRole {
    pub fn is_trainable(self) -> bool {
        !matches!(self, ParamRole::RunningMean | ParamRole::RunningVar)
    }

    /// L2 decay applies to conv and dense weights only.
    pub fn is_decayed(self) -> bool {
        self == ParamRole::Weight
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    /// `[Cout, Cin, K]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvParams<T> {
    fn init(cout: usize, cin: usize, kernel: usize, seed: u64) -> Self {
        ConvParams {
            weight: variance_scaling_init(&[cout, cin, kernel], cin * kernel, seed),
            bias: Tensor::zeros(&[cout]),
        }
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T> {
    /// `[F, K]`
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Pre-activation bottleneck: three (BN, ReLU, conv) triplets plus an optional
/// 1×1 projection on the skip path.
#[derive(Clone, Debug, PartialEq)]
pub struct Bottleneck<T> {
    pub bn1: BatchNormState<T>,
    pub conv1: ConvParams<T>,
    pub bn2: BatchNormState<T>,
    pub conv2: ConvParams<T>,
    pub bn3: BatchNormState<T>,
    pub conv3: ConvParams<T>,
    pub projection: Option<ConvParams<T>>,
}

/// Every tensor of the network, including batch-norm running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T = f32> {
    pub config: ModelConfig,
    pub stem: ConvParams<T>,
    /// `layers[l][b]` is block `b` of block layer `l + 1`.
    pub layers: Vec<Vec<Bottleneck<T>>>,
    pub final_bn: BatchNormState<T>,
    pub head: DenseParams<T>,
}

/// Builds the network with variance-scaled weights, zero biases and identity batch norms.
pub fn build_model<T: Real>(config: &ModelConfig, seed: u64) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = || rng.next_u64();

    let stem = ConvParams::init(
        config.initial_filters,
        config.input_channels,
        config.initial_kernel,
        next(),
    );
    let mut width = config.initial_filters;
    let mut layers = Vec::with_capacity(config.num_block_layers);
    for l in 1..=config.num_block_layers {
        let inner = config.inner_width(l);
        let out = config.output_width(l);
        let mut blocks = Vec::with_capacity(config.blocks_per_layer);
        for _ in 0..config.blocks_per_layer {
            let projection = (width != out).then(|| ConvParams::init(out, width, 1, next()));
            blocks.push(Bottleneck {
                bn1: BatchNormState::new(width),
                conv1: ConvParams::init(inner, width, 1, next()),
                bn2: BatchNormState::new(inner),
                conv2: ConvParams::init(inner, inner, 3, next()),
                bn3: BatchNormState::new(inner),
                conv3: ConvParams::init(out, inner, 1, next()),
                projection,
            });
            width = out;
        }
        layers.push(blocks);
    }
    let head = DenseParams {
        weight: variance_scaling_init(&[width, config.num_classes], width, next()),
        bias: Tensor::zeros(&[config.num_classes]),
    };
    Ok(ModelParams {
        config: config.clone(),
        stem,
        layers,
        final_bn: BatchNormState::new(width),
        head,
    })
}

macro_rules! entries_body {
    ($self:ident, $iter:ident, $($mut_:tt)?) => {{
        type Out<'a, T> = Vec<(String, ParamRole, &'a $($mut_)? Tensor<T>)>;
        fn conv<'a, T>(prefix: &str, c: &'a $($mut_)? ConvParams<T>, out: &mut Out<'a, T>) {
            out.push((format!("{prefix}.weight"), ParamRole::Weight, & $($mut_)? c.weight));
            out.push((format!("{prefix}.bias"), ParamRole::Bias, & $($mut_)? c.bias));
        }
        fn bn<'a, T>(prefix: &str, b: &'a $($mut_)? BatchNormState<T>, out: &mut Out<'a, T>) {
            out.push((format!("{prefix}.gamma"), ParamRole::Gamma, & $($mut_)? b.gamma));
            out.push((format!("{prefix}.beta"), ParamRole::Beta, & $($mut_)? b.beta));
            out.push((format!("{prefix}.running_mean"), ParamRole::RunningMean, & $($mut_)? b.running_mean));
            out.push((format!("{prefix}.running_var"), ParamRole::RunningVar, & $($mut_)? b.running_var));
        }
        let mut out: Out<'_, T> = Vec::new();
        conv("stem", & $($mut_)? $self.stem, &mut out);
        for (l, blocks) in $self.layers.$iter().enumerate() {
            for (b, block) in blocks.$iter().enumerate() {
                let p = format!("layer{}.block{}", l + 1, b);
                bn(&format!("{p}.bn1"), & $($mut_)? block.bn1, &mut out);
                conv(&format!("{p}.conv1"), & $($mut_)? block.conv1, &mut out);
                bn(&format!("{p}.bn2"), & $($mut_)? block.bn2, &mut out);
                conv(&format!("{p}.conv2"), & $($mut_)? block.conv2, &mut out);
                bn(&format!("{p}.bn3"), & $($mut_)? block.bn3, &mut out);
                conv(&format!("{p}.conv3"), & $($mut_)? block.conv3, &mut out);
                if let Some(proj) = & $($mut_)? block.projection {
                    conv(&format!("{p}.projection"), proj, &mut out);
                }
            }
        }
        bn("final_bn", & $($mut_)? $self.final_bn, &mut out);
        out.push(("head.weight".to_string(), ParamRole::Weight, & $($mut_)? $self.head.weight));
        out.push(("head.bias".to_string(), ParamRole::Bias, & $($mut_)? $self.head.bias));
        out
    }};
}

impl<T: Real> ModelParams<T> {
    /// Every tensor in canonical order, running statistics included.
    pub fn entries(&self) -> Vec<(String, ParamRole, &Tensor<T>)> {
        entries_body!(self, iter,)
    }

    pub fn entries_mut(&mut self) -> Vec<(String, ParamRole, &mut Tensor<T>)> {
        entries_body!(self, iter_mut, mut)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries().into_iter().map(|(n, _, _)| n).collect()
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.entries()
            .into_iter()
            .filter(|(_, r, _)| r.is_trainable())
            .map(|(n, _, _)| n)
            .collect()
    }

    pub fn trainable_shapes(&self) -> Vec<Vec<usize>> {
        self.trainable().iter().map(|t| t.shape().to_vec()).collect()
    }

    /// Trainable tensors in canonical order.
    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        self.entries()
            .into_iter()
            .filter(|(_, r, _)| r.is_trainable())
            .map(|(_, _, t)| t)
            .collect()
    }

    pub fn trainable_mut(&mut self) -> Vec<(String, ParamRole, &mut Tensor<T>)> {
        self.entries_mut()
            .into_iter()
            .filter(|(_, r, _)| r.is_trainable())
            .collect()
    }

    pub fn num_trainable(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    /// Same structure with every tensor zeroed.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, _, t) in z.entries_mut() {
            t.data_mut().fill(T::zero());
        }
        z
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let mut out = build_model::<U>(&self.config, 0).expect("config was validated at construction");
        for ((_, _, dst), (_, _, src)) in out.entries_mut().into_iter().zip(self.entries()) {
            *dst = src.cast::<U>();
        }
        let eps_mom = |b: &BatchNormState<T>| (U::of(b.epsilon.as_f64()), U::of(b.momentum.as_f64()));
        let mut src_bn = Vec::new();
        self.visit_bn(&mut |b| src_bn.push(eps_mom(b)));
        let mut it = src_bn.into_iter();
        out.visit_bn_mut(&mut |b| {
            let (e, m) = it.next().expect("same topology");
            b.epsilon = e;
            b.momentum = m;
        });
        out
    }

    /// Batch-norm states in forward order.
    pub fn visit_bn(&self, f: &mut dyn FnMut(&BatchNormState<T>)) {
        for block in self.layers.iter().flatten() {
            f(&block.bn1);
            f(&block.bn2);
            f(&block.bn3);
        }
        f(&self.final_bn);
    }

    pub fn visit_bn_mut(&mut self, f: &mut dyn FnMut(&mut BatchNormState<T>)) {
        for block in self.layers.iter_mut().flatten() {
            f(&mut block.bn1);
            f(&mut block.bn2);
            f(&mut block.bn3);
        }
        f(&mut self.final_bn);
    }

    /// Optimizer view: decay flags follow [`ParamRole::is_decayed`].
    pub fn with_param_muts<R>(&mut self, f: impl FnOnce(&mut [ParamMut<'_, T>]) -> R) -> R {
        let handles = self.trainable_mut();
        let mut muts: Vec<ParamMut<'_, T>> = Vec::with_capacity(handles.len());
        let names: Vec<String> = handles.iter().map(|(n, _, _)| n.clone()).collect();
        for ((_, role, t), name) in handles.into_iter().zip(&names) {
            muts.push(ParamMut {
                name,
                decay: role.is_decayed(),
                value: t,
            });
        }
        f(&mut muts)
    }
}
