use super::context::{Cache, LayerContext};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Max pooling with kernel 2 and stride 2 over the time axis.
///
/// Odd lengths are rejected. Ties resolve to the earlier sample.
pub fn maxpool1d<T: Real>(input: &Tensor<T>, ctx: &mut LayerContext<T>) -> Result<Tensor<T>> {
    let (n, c, len) = input.dims3("maxpool1d")?;
    if len % 2 != 0 {
        return Err(Error::dim("maxpool1d", "even time length", len));
    }
    let half = len / 2;
    let mut out = Tensor::zeros(&[n, c, half]);
    let mut argmax = if ctx.is_training() {
        Vec::with_capacity(n * c * half)
    } else {
        Vec::new()
    };
    let x = input.data();
    for (row, o) in out.data_mut().chunks_mut(half.max(1)).enumerate().take(n * c) {
        let base = row * len;
        for (t, slot) in o.iter_mut().enumerate() {
            let (a, b) = (x[base + 2 * t], x[base + 2 * t + 1]);
            let pick = if b > a { 1 } else { 0 };
            *slot = if pick == 1 { b } else { a };
            if ctx.is_training() {
                argmax.push(base + 2 * t + pick);
            }
        }
    }
    ctx.store(Cache::MaxPool {
        argmax,
        input_shape: input.shape().to_vec(),
    });
    Ok(out)
}

pub fn maxpool1d_backward<T: Real>(grad_out: &Tensor<T>, ctx: &LayerContext<T>) -> Result<Tensor<T>> {
    let Cache::MaxPool {
        argmax,
        input_shape,
    } = &ctx.cache
    else {
        return Err(ctx.missing("maxpool1d_backward"));
    };
    if argmax.len() != grad_out.len() {
        return Err(Error::dim("maxpool1d_backward", argmax.len(), grad_out.len()));
    }
    let mut g = Tensor::zeros(input_shape);
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        g.data_mut()[idx] += v;
    }
    Ok(g)
}

/// Mean over the time axis: `[N, C, T] -> [N, C]`.
pub fn global_mean_pool<T: Real>(input: &Tensor<T>, ctx: &mut LayerContext<T>) -> Result<Tensor<T>> {
    let (n, c, len) = input.dims3("global_mean_pool")?;
    if len == 0 {
        return Err(Error::dim("global_mean_pool", "non-empty time axis", 0));
    }
    let inv = T::one() / T::of(len as f64);
    let data = input
        .data()
        .chunks(len)
        .map(|row| row.iter().copied().sum::<T>() * inv)
        .collect();
    ctx.store(Cache::MeanPool {
        input_shape: input.shape().to_vec(),
    });
    Tensor::from_vec(&[n, c], data)
}

pub fn global_mean_pool_backward<T: Real>(
    grad_out: &Tensor<T>,
    ctx: &LayerContext<T>,
) -> Result<Tensor<T>> {
    let Cache::MeanPool { input_shape } = &ctx.cache else {
        return Err(ctx.missing("global_mean_pool_backward"));
    };
    let len = input_shape[2];
    if grad_out.len() * len != input_shape.iter().product::<usize>() {
        return Err(Error::dim(
            "global_mean_pool_backward",
            format!("{:?}", &input_shape[..2]),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let inv = T::one() / T::of(len as f64);
    let mut g = Tensor::zeros(input_shape);
    for (row, &v) in g.data_mut().chunks_mut(len).zip(grad_out.data()) {
        row.fill(v * inv);
    }
    Ok(g)
}
