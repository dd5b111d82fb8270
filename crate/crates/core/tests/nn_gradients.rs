mod common;

use common::*;
use proptest::prelude::*;
use psg_stager::nn::*;
use psg_stager::Tensor;

/// Direct nested-loop cross-correlation with zero padding.
fn naive_conv(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: &Tensor<f64>,
    stride: usize,
    pad_left: usize,
    out_len: usize,
) -> Tensor<f64> {
    let (n, cin, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, kernel) = (w.shape()[0], w.shape()[2]);
    let mut y = Tensor::zeros(&[n, cout, out_len]);
    for s in 0..n {
        for co in 0..cout {
            for t in 0..out_len {
                let mut acc = b.data()[co];
                for ci in 0..cin {
                    for k in 0..kernel {
                        let pos = (t * stride + k) as isize - pad_left as isize;
                        if pos >= 0 && (pos as usize) < len {
                            acc += x.data()[(s * cin + ci) * len + pos as usize]
                                * w.data()[(co * cin + ci) * kernel + k];
                        }
                    }
                }
                y.data_mut()[(s * cout + co) * out_len + t] = acc;
            }
        }
    }
    y
}

#[test]
fn conv_matches_nested_loop_oracle() {
    let mut r = rng(1);
    for &(kernel, stride, len) in &[(3, 1, 8), (16, 1, 40), (4, 2, 9), (1, 1, 7), (5, 3, 11)] {
        let x = random_tensor(&[2, 3, len], &mut r);
        let w = random_tensor(&[4, 3, kernel], &mut r);
        let b = random_tensor(&[4], &mut r);
        let y = conv1d_forward(&x, &w, &b, stride, Padding::Same, &mut LayerContext::inference()).unwrap();
        let out_len = output_len(len, kernel, stride, Padding::Same);
        let pad = ((out_len - 1) * stride + kernel).saturating_sub(len) / 2;
        let expect = naive_conv(&x, &w, &b, stride, pad, out_len);
        assert_eq!(y.shape(), expect.shape());
        for (a, e) in y.data().iter().zip(expect.data()) {
            assert!((a - e).abs() <= 1e-6 * e.abs().max(1.0), "k={kernel} s={stride}: {a} vs {e}");
        }
        let yv = conv1d_forward(&x, &w, &b, stride, Padding::Valid, &mut LayerContext::inference()).unwrap();
        let ev = naive_conv(&x, &w, &b, stride, 0, output_len(len, kernel, stride, Padding::Valid));
        for (a, e) in yv.data().iter().zip(ev.data()) {
            assert!((a - e).abs() <= 1e-6 * e.abs().max(1.0));
        }
    }
}

fn check_conv_grads(kernel: usize, stride: usize, len: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = random_tensor(&[2, 2, len], &mut r);
    let w = random_tensor(&[3, 2, kernel], &mut r);
    let b = random_tensor(&[3], &mut r);
    let mut ctx = LayerContext::training();
    let y = conv1d_forward(&x, &w, &b, stride, Padding::Same, &mut ctx).unwrap();
    let proj = random_tensor(y.shape(), &mut r);
    let g = conv1d_backward(&proj, &w, &ctx).unwrap();
    let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
        dot(
            &conv1d_forward(x, w, b, stride, Padding::Same, &mut LayerContext::inference()).unwrap(),
            &proj,
        )
    };
    let nx = numeric_grad(&x, 1e-5, |x| loss(x, &w, &b));
    let nw = numeric_grad(&w, 1e-5, |w| loss(&x, w, &b));
    let nb = numeric_grad(&b, 1e-5, |b| loss(&x, &w, b));
    max_rel_err(g.input.data(), &nx)
        .max(max_rel_err(g.weight.data(), &nw))
        .max(max_rel_err(g.bias.data(), &nb))
}

#[test]
fn conv_backward_matches_finite_differences() {
    assert!(check_conv_grads(3, 1, 8, 2) < 1e-6);
    assert!(check_conv_grads(16, 1, 20, 3) < 1e-6);
    assert!(check_conv_grads(4, 2, 9, 4) < 1e-6);
    assert!(check_conv_grads(1, 1, 6, 5) < 1e-6);
}

#[test]
fn conv_backward_single_precision() {
    let mut r = rng(9);
    let x64 = random_tensor(&[2, 2, 8], &mut r);
    let w64 = random_tensor(&[3, 2, 3], &mut r);
    let b64 = random_tensor(&[3], &mut r);
    let proj64 = random_tensor(&[2, 3, 8], &mut r);
    let (x, w, b, proj) = (x64.cast::<f32>(), w64.cast::<f32>(), b64.cast::<f32>(), proj64.cast::<f32>());
    let mut ctx = LayerContext::training();
    conv1d_forward(&x, &w, &b, 1, Padding::Same, &mut ctx).unwrap();
    let g = conv1d_backward(&proj, &w, &ctx).unwrap();
    let h = 1e-2f32;
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let mut wp = w.clone();
        wp.data_mut()[i] += h;
        let mut wm = w.clone();
        wm.data_mut()[i] -= h;
        let f = |w: &Tensor<f32>| -> f32 {
            let y = conv1d_forward(&x, w, &b, 1, Padding::Same, &mut LayerContext::inference()).unwrap();
            y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum()
        };
        let num = ((f(&wp) - f(&wm)) / (2.0 * h)) as f64;
        worst = worst.max(rel_err(g.weight.data()[i] as f64, num));
    }
    assert!(worst < 1e-3, "f32 conv weight grad rel err {worst}");
}

#[test]
fn batchnorm_backward_matches_finite_differences() {
    let mut r = rng(11);
    let x = random_tensor(&[3, 2, 5], &mut r);
    let mut st = BatchNormState::<f64>::new(2);
    st.gamma = random_tensor(&[2], &mut r);
    st.beta = random_tensor(&[2], &mut r);
    let mut ctx = LayerContext::training();
    let y = batchnorm_forward(&x, &mut st.clone(), true, &mut ctx).unwrap();
    let proj = random_tensor(y.shape(), &mut r);
    let g = batchnorm_backward(&proj, &st.gamma, &ctx).unwrap();

    let loss = |x: &Tensor<f64>, gamma: &Tensor<f64>, beta: &Tensor<f64>| {
        let mut s = st.clone();
        s.gamma = gamma.clone();
        s.beta = beta.clone();
        dot(&batchnorm_forward(x, &mut s, true, &mut LayerContext::training()).unwrap(), &proj)
    };
    let nx = numeric_grad(&x, 1e-5, |x| loss(x, &st.gamma, &st.beta));
    let ng = numeric_grad(&st.gamma, 1e-5, |gm| loss(&x, gm, &st.beta));
    let nb = numeric_grad(&st.beta, 1e-5, |bt| loss(&x, &st.gamma, bt));
    assert!(max_rel_err(g.input.data(), &nx) < 1e-6);
    assert!(max_rel_err(g.gamma.data(), &ng) < 1e-6);
    assert!(max_rel_err(g.beta.data(), &nb) < 1e-6);
}

#[test]
fn dense_backward_matches_finite_differences() {
    let mut r = rng(12);
    let x = random_tensor(&[3, 4], &mut r);
    let w = random_tensor(&[4, 5], &mut r);
    let b = random_tensor(&[5], &mut r);
    let mut ctx = LayerContext::training();
    dense_forward(&x, &w, &b, &mut ctx).unwrap();
    let proj = random_tensor(&[3, 5], &mut r);
    let g = dense_backward(&proj, &w, &ctx).unwrap();
    let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
        dot(&dense_forward(x, w, b, &mut LayerContext::inference()).unwrap(), &proj)
    };
    assert!(max_rel_err(g.input.data(), &numeric_grad(&x, 1e-5, |x| loss(x, &w, &b))) < 1e-6);
    assert!(max_rel_err(g.weight.data(), &numeric_grad(&w, 1e-5, |w| loss(&x, w, &b))) < 1e-6);
    assert!(max_rel_err(g.bias.data(), &numeric_grad(&b, 1e-5, |b| loss(&x, &w, b))) < 1e-6);
}

#[test]
fn mean_pool_backward_matches_finite_differences() {
    let mut r = rng(13);
    let x = random_tensor(&[2, 3, 6], &mut r);
    let mut ctx = LayerContext::training();
    global_mean_pool(&x, &mut ctx).unwrap();
    let proj = random_tensor(&[2, 3], &mut r);
    let g = global_mean_pool_backward(&proj, &ctx).unwrap();
    let n = numeric_grad(&x, 1e-5, |x| {
        dot(&global_mean_pool(x, &mut LayerContext::inference()).unwrap(), &proj)
    });
    assert!(max_rel_err(g.data(), &n) < 1e-8);
}

#[test]
fn maxpool_and_relu_backward_match_finite_differences() {
    let mut r = rng(14);
    let x = random_away_from_zero(&[2, 2, 8], &mut r);
    let mut ctx = LayerContext::training();
    let y = maxpool1d(&x, &mut ctx).unwrap();
    let proj = random_tensor(y.shape(), &mut r);
    let g = maxpool1d_backward(&proj, &ctx).unwrap();
    let n = numeric_grad(&x, 1e-6, |x| dot(&maxpool1d(x, &mut LayerContext::inference()).unwrap(), &proj));
    assert!(max_rel_err(g.data(), &n) < 1e-6);

    let mut ctx = LayerContext::training();
    relu(&x, &mut ctx);
    let proj = random_tensor(x.shape(), &mut r);
    let g = relu_backward(&proj, &ctx).unwrap();
    let n = numeric_grad(&x, 1e-6, |x| dot(&relu(x, &mut LayerContext::inference()), &proj));
    assert!(max_rel_err(g.data(), &n) < 1e-6);
}

#[test]
fn softmax_xent_gradient_matches_finite_differences() {
    let mut r = rng(15);
    let z = random_tensor(&[4, 5], &mut r);
    let y = one_hot::<f64>(&[0, 3, 4, 1], 5);
    let out = softmax_xent(&z, &y).unwrap();
    let n = numeric_grad(&z, 1e-5, |z| softmax_xent(z, &y).unwrap().loss.sum());
    assert!(max_rel_err(out.grad_logits.data(), &n) < 1e-6);
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(vals in prop::collection::vec(-50.0f64..50.0, 15)) {
        let z = Tensor::from_vec(&[3, 5], vals).unwrap();
        let p = softmax(&z).unwrap();
        for i in 0..3 {
            let row = p.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn pooling_backward_conserves_gradient(
        vals in prop::collection::vec(-10.0f64..10.0, 24),
        grads in prop::collection::vec(-10.0f64..10.0, 12),
    ) {
        let x = Tensor::from_vec(&[2, 2, 6], vals).unwrap();
        let mut ctx = LayerContext::training();
        maxpool1d(&x, &mut ctx).unwrap();
        let go = Tensor::from_vec(&[2, 2, 3], grads.clone()).unwrap();
        let gi = maxpool1d_backward(&go, &ctx).unwrap();
        prop_assert!((gi.sum() - go.sum()).abs() < 1e-9);

        let mut ctx = LayerContext::training();
        global_mean_pool(&x, &mut ctx).unwrap();
        let go = Tensor::from_vec(&[2, 2], grads[..4].to_vec()).unwrap();
        let gi = global_mean_pool_backward(&go, &ctx).unwrap();
        prop_assert!((gi.sum() - go.sum()).abs() < 1e-9);
    }

    #[test]
    fn inference_batchnorm_is_bit_deterministic(vals in prop::collection::vec(-5.0f32..5.0, 24)) {
        let x = Tensor::from_vec(&[2, 3, 4], vals).unwrap();
        let mut st = BatchNormState::<f32>::new(3);
        st.running_mean.data_mut().copy_from_slice(&[0.3, -0.1, 2.0]);
        st.running_var.data_mut().copy_from_slice(&[1.7, 0.2, 4.0]);
        let a = batchnorm_forward(&x, &mut st, false, &mut LayerContext::inference()).unwrap();
        let b = batchnorm_forward(&x, &mut st, false, &mut LayerContext::inference()).unwrap();
        prop_assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
