use super::context::{Cache, LayerContext};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so that the output length is `ceil(T / stride)`.
    Same,
    Valid,
}

pub fn output_len(len: usize, kernel: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Same => len.div_ceil(stride),
        Padding::Valid if len >= kernel => (len - kernel) / stride + 1,
        Padding::Valid => 0,
    }
}

/// Leading zero count; for even kernels the extra pad goes on the right.
fn left_pad(len: usize, kernel: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Valid => 0,
        Padding::Same => {
            let out = output_len(len, kernel, stride, padding);
            ((out.saturating_sub(1)) * stride + kernel).saturating_sub(len) / 2
        }
    }
}

fn is_pointwise(kernel: usize, stride: usize) -> bool {
    kernel == 1 && stride == 1
}

/// Unfold one sample `[Cin, T]` into `[Cin*K, T_out]` columns.
fn im2col<T: Real>(
    x: &[T],
    cin: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    pad_left: usize,
    out_len: usize,
    cols: &mut [T],
) {
    for c in 0..cin {
        let xc = &x[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &mut cols[(c * kernel + k) * out_len..(c * kernel + k + 1) * out_len];
            for (t, slot) in row.iter_mut().enumerate() {
                let pos = (t * stride + k) as isize - pad_left as isize;
                *slot = if pos >= 0 && (pos as usize) < len {
                    xc[pos as usize]
                } else {
                    T::zero()
                };
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Real>(
    cols: &[T],
    cin: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    pad_left: usize,
    out_len: usize,
    gx: &mut [T],
) {
    for c in 0..cin {
        let gc = &mut gx[c * len..(c + 1) * len];
        for k in 0..kernel {
            let row = &cols[(c * kernel + k) * out_len..(c * kernel + k + 1) * out_len];
            for (t, &g) in row.iter().enumerate() {
                let pos = (t * stride + k) as isize - pad_left as isize;
                if pos >= 0 && (pos as usize) < len {
                    gc[pos as usize] += g;
                }
            }
        }
    }
}

/// 1-D cross-correlation over time: `[N, Cin, T] * [Cout, Cin, K] + bias -> [N, Cout, T']`.
pub fn conv1d_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: Padding,
    ctx: &mut LayerContext<T>,
) -> Result<Tensor<T>> {
    let (n, cin, len) = input.dims3("conv1d_forward")?;
    let (cout, wcin, kernel) = weight.dims3("conv1d_forward")?;
    if wcin != cin {
        return Err(Error::dim(
            "conv1d_forward",
            format!("weight input channels = input channels ({cin})"),
            wcin,
        ));
    }
    if bias.shape() != [cout] {
        return Err(Error::dim(
            "conv1d_forward",
            format!("bias shape [{cout}]"),
            format!("{:?}", bias.shape()),
        ));
    }
    if kernel == 0 || stride == 0 {
        return Err(Error::Usage("conv1d_forward: kernel and stride must be >= 1".into()));
    }
    let out_len = output_len(len, kernel, stride, padding);
    let pad = left_pad(len, kernel, stride, padding);

    let mut out = Tensor::zeros(&[n, cout, out_len]);
    let b = bias.data();
    for row in out.data_mut().chunks_mut(out_len.max(1)).enumerate() {
        let (i, chunk) = row;
        chunk.fill(b[i % cout]);
    }

    let ck = cin * kernel;
    let mut cols = if is_pointwise(kernel, stride) {
        Vec::new()
    } else {
        vec![T::zero(); ck * out_len]
    };
    for s in 0..n {
        let x = &input.data()[s * cin * len..(s + 1) * cin * len];
        let y = &mut out.data_mut()[s * cout * out_len..(s + 1) * cout * out_len];
        let rhs: &[T] = if is_pointwise(kernel, stride) {
            x
        } else {
            im2col(x, cin, len, kernel, stride, pad, out_len, &mut cols);
            &cols
        };
        T::gemm(
            cout,
            ck,
            out_len,
            T::one(),
            weight.data(),
            ck as isize,
            1,
            rhs,
            out_len as isize,
            1,
            T::one(),
            y,
            out_len as isize,
            1,
        );
    }

    ctx.store(Cache::Conv {
        input: input.clone(),
        stride,
        pad_left: pad,
    });
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv1d_backward<T: Real>(
    grad_out: &Tensor<T>,
    weight: &Tensor<T>,
    ctx: &LayerContext<T>,
) -> Result<ConvGrads<T>> {
    let Cache::Conv {
        input,
        stride,
        pad_left,
    } = &ctx.cache
    else {
        return Err(ctx.missing("conv1d_backward"));
    };
    let (stride, pad) = (*stride, *pad_left);
    let (n, cin, len) = input.dims3("conv1d_backward")?;
    let (cout, _, kernel) = weight.dims3("conv1d_backward")?;
    let (gn, gc, out_len) = grad_out.dims3("conv1d_backward")?;
    if gn != n || gc != cout {
        return Err(Error::dim(
            "conv1d_backward",
            format!("grad_out [{n}, {cout}, _]"),
            format!("{:?}", grad_out.shape()),
        ));
    }

    let ck = cin * kernel;
    let mut g_input = Tensor::zeros(&[n, cin, len]);
    let mut g_weight = Tensor::zeros(&[cout, cin, kernel]);
    let mut g_bias = Tensor::zeros(&[cout]);

    for (i, chunk) in grad_out.data().chunks(out_len.max(1)).enumerate() {
        g_bias.data_mut()[i % cout] += chunk.iter().copied().sum::<T>();
    }

    let pointwise = is_pointwise(kernel, stride);
    let mut cols = vec![T::zero(); if pointwise { 0 } else { ck * out_len }];
    let mut g_cols = vec![T::zero(); if pointwise { 0 } else { ck * out_len }];
    for s in 0..n {
        let x = &input.data()[s * cin * len..(s + 1) * cin * len];
        let go = &grad_out.data()[s * cout * out_len..(s + 1) * cout * out_len];
        let gx = &mut g_input.data_mut()[s * cin * len..(s + 1) * cin * len];
        let cols_ref: &[T] = if pointwise {
            x
        } else {
            im2col(x, cin, len, kernel, stride, pad, out_len, &mut cols);
            &cols
        };
        // dW += dY · colsᵀ
        T::gemm(
            cout,
            out_len,
            ck,
            T::one(),
            go,
            out_len as isize,
            1,
            cols_ref,
            1,
            out_len as isize,
            T::one(),
            g_weight.data_mut(),
            ck as isize,
            1,
        );
        // dcols = Wᵀ · dY
        let target: &mut [T] = if pointwise { gx } else { &mut g_cols };
        T::gemm(
            ck,
            cout,
            out_len,
            T::one(),
            weight.data(),
            1,
            ck as isize,
            go,
            out_len as isize,
            1,
            T::zero(),
            target,
            out_len as isize,
            1,
        );
        if !pointwise {
            col2im(&g_cols, cin, len, kernel, stride, pad, out_len, gx);
        }
    }

    Ok(ConvGrads {
        input: g_input,
        weight: g_weight,
        bias: g_bias,
    })
}
