use super::context::{Cache, LayerContext};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Affine map `z = x·W + b` for `x: [N, F]`, `W: [F, K]`, `b: [K]`.
pub fn dense_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    ctx: &mut LayerContext<T>,
) -> Result<Tensor<T>> {
    let (n, f) = input.dims2("dense_forward")?;
    let (wf, k) = weight.dims2("dense_forward")?;
    if wf != f {
        return Err(Error::dim("dense_forward", format!("weight rows = {f}"), wf));
    }
    if bias.shape() != [k] {
        return Err(Error::dim("dense_forward", format!("bias [{k}]"), format!("{:?}", bias.shape())));
    }
    let mut out = Tensor::zeros(&[n, k]);
    for row in out.data_mut().chunks_mut(k.max(1)).take(n) {
        row.copy_from_slice(bias.data());
    }
    T::gemm(
        n,
        f,
        k,
        T::one(),
        input.data(),
        f as isize,
        1,
        weight.data(),
        k as isize,
        1,
        T::one(),
        out.data_mut(),
        k as isize,
        1,
    );
    ctx.store(Cache::Dense {
        input: input.clone(),
    });
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Real>(
    grad_out: &Tensor<T>,
    weight: &Tensor<T>,
    ctx: &LayerContext<T>,
) -> Result<DenseGrads<T>> {
    let Cache::Dense { input } = &ctx.cache else {
        return Err(ctx.missing("dense_backward"));
    };
    let (n, f) = input.dims2("dense_backward")?;
    let (gn, k) = grad_out.dims2("dense_backward")?;
    if gn != n || weight.shape() != [f, k] {
        return Err(Error::dim(
            "dense_backward",
            format!("grad [{n}, {}]", weight.shape()[1]),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let mut g_input = Tensor::zeros(&[n, f]);
    let mut g_weight = Tensor::zeros(&[f, k]);
    let mut g_bias = Tensor::zeros(&[k]);
    // dX = dZ · Wᵀ
    T::gemm(
        n,
        k,
        f,
        T::one(),
        grad_out.data(),
        k as isize,
        1,
        weight.data(),
        1,
        k as isize,
        T::zero(),
        g_input.data_mut(),
        f as isize,
        1,
    );
    // dW = Xᵀ · dZ
    T::gemm(
        f,
        n,
        k,
        T::one(),
        input.data(),
        1,
        f as isize,
        grad_out.data(),
        k as isize,
        1,
        T::zero(),
        g_weight.data_mut(),
        k as isize,
        1,
    );
    for row in grad_out.data().chunks(k.max(1)) {
        for (b, &g) in g_bias.data_mut().iter_mut().zip(row) {
            *b += g;
        }
    }
    Ok(DenseGrads {
        input: g_input,
        weight: g_weight,
        bias: g_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_passes_input() {
        let x = Tensor::<f64>::from_fn(&[2, 3], |i| i as f64 - 2.0);
        let w = Tensor::<f64>::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let b = Tensor::<f64>::zeros(&[3]);
        let y = dense_forward(&x, &w, &b, &mut LayerContext::inference()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_weight_broadcasts_bias() {
        let x = Tensor::<f64>::from_fn(&[2, 3], |i| i as f64);
        let w = Tensor::<f64>::zeros(&[3, 2]);
        let b = Tensor::<f64>::from_vec(&[2], vec![0.5, -1.5]).unwrap();
        let y = dense_forward(&x, &w, &b, &mut LayerContext::inference()).unwrap();
        assert_eq!(y.data(), &[0.5, -1.5, 0.5, -1.5]);
    }
}
