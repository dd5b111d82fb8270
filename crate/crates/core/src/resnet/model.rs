use super::params::{Bottleneck, ConvParams, ModelParams};
use crate::error::{Error, Result};
use crate::nn::{
    batchnorm_backward, batchnorm_batch, batchnorm_inference, conv1d_backward, conv1d_forward,
    dense_backward, dense_forward, global_mean_pool, global_mean_pool_backward, maxpool1d,
    maxpool1d_backward, relu, relu_backward, softmax, BatchNormState, BatchStats, LayerContext,
    Padding,
};
use crate::tensor::{Real, Tensor};

/// Contexts recorded by a training-mode forward pass, consumed by [`ModelParams::backward`].
pub struct ForwardTrace<T> {
    stem: LayerContext<T>,
    stem_pool: Option<LayerContext<T>>,
    layers: Vec<LayerTrace<T>>,
    final_bn: LayerContext<T>,
    final_relu: LayerContext<T>,
    mean_pool: LayerContext<T>,
    head: LayerContext<T>,
    /// Batch statistics in [`ModelParams::visit_bn`] order.
    bn_stats: Vec<BatchStats<T>>,
}

struct LayerTrace<T> {
    pool: LayerContext<T>,
    blocks: Vec<BlockTrace<T>>,
}

struct BlockTrace<T> {
    bn1: LayerContext<T>,
    relu1: LayerContext<T>,
    conv1: LayerContext<T>,
    bn2: LayerContext<T>,
    relu2: LayerContext<T>,
    conv2: LayerContext<T>,
    bn3: LayerContext<T>,
    relu3: LayerContext<T>,
    conv3: LayerContext<T>,
    projection: Option<LayerContext<T>>,
}

/// Per-epoch class probabilities and the argmax label.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: usize,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Runs batch norm in either mode, collecting batch statistics in training mode.
struct Norm<'s, T> {
    training: bool,
    stats: &'s mut Vec<BatchStats<T>>,
}

impl<T: Real> Norm<'_, T> {
    fn apply(&mut self, x: &Tensor<T>, state: &BatchNormState<T>) -> Result<(Tensor<T>, LayerContext<T>)> {
        let mut ctx = LayerContext::new(self.training);
        if self.training {
            let (y, stats) = batchnorm_batch(x, state, &mut ctx)?;
            self.stats.push(stats);
            Ok((y, ctx))
        } else {
            Ok((batchnorm_inference(x, state)?, ctx))
        }
    }
}

fn conv<T: Real>(x: &Tensor<T>, p: &ConvParams<T>, training: bool) -> Result<(Tensor<T>, LayerContext<T>)> {
    let mut ctx = LayerContext::new(training);
    let y = conv1d_forward(x, &p.weight, &p.bias, 1, Padding::Same, &mut ctx)?;
    Ok((y, ctx))
}

fn block_forward<T: Real>(
    x: &Tensor<T>,
    block: &Bottleneck<T>,
    norm: &mut Norm<'_, T>,
) -> Result<(Tensor<T>, BlockTrace<T>)> {
    let training = norm.training;
    let (h, bn1) = norm.apply(x, &block.bn1)?;
    let mut relu1 = LayerContext::new(training);
    let a1 = relu(&h, &mut relu1);
    let (h, conv1) = conv(&a1, &block.conv1, training)?;

    let (h, bn2) = norm.apply(&h, &block.bn2)?;
    let mut relu2 = LayerContext::new(training);
    let a2 = relu(&h, &mut relu2);
    let (h, conv2) = conv(&a2, &block.conv2, training)?;

    let (h, bn3) = norm.apply(&h, &block.bn3)?;
    let mut relu3 = LayerContext::new(training);
    let a3 = relu(&h, &mut relu3);
    let (mut out, conv3) = conv(&a3, &block.conv3, training)?;

    let projection = match &block.projection {
        Some(p) => {
            let (skip, ctx) = conv(&a1, p, training)?;
            out.add_assign(&skip)?;
            Some(ctx)
        }
        None => {
            out.add_assign(x)?;
            None
        }
    };
    Ok((
        out,
        BlockTrace {
            bn1,
            relu1,
            conv1,
            bn2,
            relu2,
            conv2,
            bn3,
            relu3,
            conv3,
            projection,
        },
    ))
}

fn block_backward<T: Real>(
    grad: &Tensor<T>,
    block: &Bottleneck<T>,
    trace: &BlockTrace<T>,
    out: &mut Bottleneck<T>,
) -> Result<Tensor<T>> {
    let g = conv1d_backward(grad, &block.conv3.weight, &trace.conv3)?;
    out.conv3.weight = g.weight;
    out.conv3.bias = g.bias;
    let g = relu_backward(&g.input, &trace.relu3)?;
    let g = batchnorm_backward(&g, &block.bn3.gamma, &trace.bn3)?;
    out.bn3.gamma = g.gamma;
    out.bn3.beta = g.beta;

    let g = conv1d_backward(&g.input, &block.conv2.weight, &trace.conv2)?;
    out.conv2.weight = g.weight;
    out.conv2.bias = g.bias;
    let g = relu_backward(&g.input, &trace.relu2)?;
    let g = batchnorm_backward(&g, &block.bn2.gamma, &trace.bn2)?;
    out.bn2.gamma = g.gamma;
    out.bn2.beta = g.beta;

    let g = conv1d_backward(&g.input, &block.conv1.weight, &trace.conv1)?;
    out.conv1.weight = g.weight;
    out.conv1.bias = g.bias;
    let mut g_a1 = g.input;

    if let (Some(p), Some(ctx)) = (&block.projection, &trace.projection) {
        let gp = conv1d_backward(grad, &p.weight, ctx)?;
        g_a1.add_assign(&gp.input)?;
        let slot = out.projection.as_mut().expect("gradient mirrors params");
        slot.weight = gp.weight;
        slot.bias = gp.bias;
    }

    let g = relu_backward(&g_a1, &trace.relu1)?;
    let g = batchnorm_backward(&g, &block.bn1.gamma, &trace.bn1)?;
    out.bn1.gamma = g.gamma;
    out.bn1.beta = g.beta;
    let mut g_x = g.input;
    if block.projection.is_none() {
        g_x.add_assign(grad)?;
    }
    Ok(g_x)
}

impl<T: Real> ModelParams<T> {
    fn check_batch(&self, batch: &Tensor<T>) -> Result<()> {
        let (_, c, t) = batch.dims3("resnet forward")?;
        let cfg = &self.config;
        if c != cfg.input_channels || t != cfg.epoch_samples {
            return Err(Error::dim(
                "resnet forward",
                format!("[N, {}, {}]", cfg.input_channels, cfg.epoch_samples),
                format!("{:?}", batch.shape()),
            ));
        }
        Ok(())
    }

    fn forward_impl(&self, batch: &Tensor<T>, training: bool) -> Result<(Tensor<T>, Option<ForwardTrace<T>>)> {
        self.check_batch(batch)?;
        let mut bn_stats = Vec::new();
        let mut norm = Norm {
            training,
            stats: &mut bn_stats,
        };

        let (mut x, stem) = conv(batch, &self.stem, training)?;
        let stem_pool = if self.config.stem_pool {
            let mut ctx = LayerContext::new(training);
            x = maxpool1d(&x, &mut ctx)?;
            Some(ctx)
        } else {
            None
        };

        let mut layers = Vec::with_capacity(self.layers.len());
        for blocks in &self.layers {
            let mut pool = LayerContext::new(training);
            x = maxpool1d(&x, &mut pool)?;
            let mut traces = Vec::with_capacity(blocks.len());
            for block in blocks {
                let (y, tr) = block_forward(&x, block, &mut norm)?;
                x = y;
                traces.push(tr);
            }
            layers.push(LayerTrace { pool, blocks: traces });
        }

        let (h, final_bn) = norm.apply(&x, &self.final_bn)?;
        let mut final_relu = LayerContext::new(training);
        let h = relu(&h, &mut final_relu);
        let mut mean_pool = LayerContext::new(training);
        let features = global_mean_pool(&h, &mut mean_pool)?;
        let mut head = LayerContext::new(training);
        let logits = dense_forward(&features, &self.head.weight, &self.head.bias, &mut head)?;

        let trace = training.then(|| ForwardTrace {
            stem,
            stem_pool,
            layers,
            final_bn,
            final_relu,
            mean_pool,
            head,
            bn_stats,
        });
        Ok((logits, trace))
    }

    /// Inference-mode logits `[N, K]`; running statistics are used and nothing is cached.
    pub fn infer(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_impl(batch, false)?.0)
    }

    /// Training-mode logits plus the trace needed for [`ModelParams::backward`].
    ///
    /// Running statistics are *not* touched; pass the trace to
    /// [`ModelParams::update_running_stats`] once the step is committed.
    pub fn forward_train(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, ForwardTrace<T>)> {
        let (logits, trace) = self.forward_impl(batch, true)?;
        Ok((logits, trace.expect("training forward records a trace")))
    }

    /// Either mode, matching the `forward(params, batch, training)` contract.
    /// Training mode folds the batch statistics into the running averages.
    pub fn forward(&mut self, batch: &Tensor<T>, training: bool) -> Result<(Tensor<T>, Option<ForwardTrace<T>>)> {
        let (logits, trace) = self.forward_impl(batch, training)?;
        if let Some(tr) = &trace {
            self.update_running_stats(tr);
        }
        Ok((logits, trace))
    }

    pub fn update_running_stats(&mut self, trace: &ForwardTrace<T>) {
        let mut it = trace.bn_stats.iter();
        self.visit_bn_mut(&mut |bn| bn.update_running(it.next().expect("one stats entry per batch norm")));
    }

    /// Gradients of `sum(grad_logits * logits)` for every trainable tensor.
    ///
    /// The result mirrors `self`; running-statistic slots are zero.
    pub fn backward(&self, trace: &ForwardTrace<T>, grad_logits: &Tensor<T>) -> Result<ModelParams<T>> {
        let mut grads = self.zeros_like();

        let g = dense_backward(grad_logits, &self.head.weight, &trace.head)?;
        grads.head.weight = g.weight;
        grads.head.bias = g.bias;
        let g = global_mean_pool_backward(&g.input, &trace.mean_pool)?;
        let g = relu_backward(&g, &trace.final_relu)?;
        let g = batchnorm_backward(&g, &self.final_bn.gamma, &trace.final_bn)?;
        grads.final_bn.gamma = g.gamma;
        grads.final_bn.beta = g.beta;
        let mut g = g.input;

        for (l, blocks) in self.layers.iter().enumerate().rev() {
            let lt = &trace.layers[l];
            for (b, block) in blocks.iter().enumerate().rev() {
                g = block_backward(&g, block, &lt.blocks[b], &mut grads.layers[l][b])?;
            }
            g = maxpool1d_backward(&g, &lt.pool)?;
        }
        if let Some(ctx) = &trace.stem_pool {
            g = maxpool1d_backward(&g, ctx)?;
        }
        let gs = conv1d_backward(&g, &self.stem.weight, &trace.stem)?;
        grads.stem.weight = gs.weight;
        grads.stem.bias = gs.bias;
        Ok(grads)
    }

    /// Softmax + argmax per epoch (inference mode).
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<Prediction>> {
        let probs = softmax(&self.infer(batch)?)?;
        let k = self.config.num_classes;
        Ok(probs
            .data()
            .chunks(k)
            .map(|row| {
                let probs: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
                Prediction {
                    label: argmax(&probs),
                    probs,
                }
            })
            .collect())
    }

    /// Per-epoch class probabilities for a whole recording `[E, C, T]`, in temporal order.
    pub fn hypnodensity(&self, epochs: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 16;
        let (e, _, _) = epochs.dims3("hypnodensity")?;
        if e == 0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(e);
        let rows: Vec<usize> = (0..e).collect();
        for chunk in rows.chunks(CHUNK) {
            let batch = epochs.select_rows(chunk);
            out.extend(self.predict(&batch)?.into_iter().map(|p| p.probs));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resnet::{build_model, ModelConfig};

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[0.0; 5]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3, 0.9, 0.2]), 3);
    }

    #[test]
    fn miniature_shapes() {
        let cfg = ModelConfig::miniature();
        let p = build_model::<f64>(&cfg, 1).unwrap();
        let x = Tensor::from_fn(&[3, 2, 32], |i| (i as f64 * 0.1).sin());
        assert_eq!(p.infer(&x).unwrap().shape(), &[3, 3]);
        let bad = Tensor::<f64>::zeros(&[3, 2, 30]);
        assert!(matches!(p.infer(&bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn empty_hypnodensity() {
        let p = build_model::<f32>(&ModelConfig::miniature(), 1).unwrap();
        let x = Tensor::<f32>::zeros(&[0, 2, 32]);
        assert!(p.hypnodensity(&x).unwrap().is_empty());
    }
}
