use super::context::{Cache, LayerContext};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Elementwise `max(0, x)`.
pub fn relu<T: Real>(input: &Tensor<T>, ctx: &mut LayerContext<T>) -> Tensor<T> {
    let out = input.map(|x| if x > T::zero() { x } else { T::zero() });
    if ctx.is_training() {
        let active = input.data().iter().map(|&x| x > T::zero()).collect();
        ctx.store(Cache::Relu { active });
    }
    out
}

/// Passes the gradient where the input was strictly positive (derivative at 0 is 0).
pub fn relu_backward<T: Real>(grad_out: &Tensor<T>, ctx: &LayerContext<T>) -> Result<Tensor<T>> {
    let Cache::Relu { active } = &ctx.cache else {
        return Err(ctx.missing("relu_backward"));
    };
    if active.len() != grad_out.len() {
        return Err(Error::dim("relu_backward", active.len(), grad_out.len()));
    }
    let mut g = grad_out.clone();
    for (v, &on) in g.data_mut().iter_mut().zip(active) {
        if !on {
            *v = T::zero();
        }
    }
    Ok(g)
}
