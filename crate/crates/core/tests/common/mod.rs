//! Shared test oracles: independent quadruple-loop convolution, central
//! finite differences (64-bit), and toy model builders.
//!
//! Everything here recomputes values through paths independent of the
//! gradients under test: finite differences only evaluate forward losses, and
//! the convolution oracle is a direct nested-loop implementation.

#![allow(dead_code)]

use cxr_ensemble::nn::{LayerSpec, Model, Padding};
use cxr_ensemble::tensor::{Scalar, Tensor};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Direct cross-correlation: for every output element, sum products over
/// (kh, kw, cin) in that order, treating out-of-bounds input as absent.
pub fn conv2d_oracle<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Tensor<T> {
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw, cout) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[3]);
    let (out_h, out_w, pad_y, pad_x) = match padding {
        Padding::Same => (h, w, (kh - 1) / 2, (kw - 1) / 2),
        Padding::Valid => (h - kh + 1, w - kw + 1, 0, 0),
    };
    let mut out = Tensor::zeros(&[out_h, out_w, cout]);
    for oy in 0..out_h {
        for ox in 0..out_w {
            for co in 0..cout {
                let mut acc = T::zero();
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = (oy + ky) as isize - pad_y as isize;
                        let ix = (ox + kx) as isize - pad_x as isize;
                        if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                            continue;
                        }
                        for ci in 0..cin {
                            let v = input.at3(iy as usize, ix as usize, ci);
                            let k = kernels.data()
                                [((ky * kw + kx) * cin + ci) * cout + co];
                            acc = acc + v * k;
                        }
                    }
                }
                out.data_mut()[(oy * out_w + ox) * cout + co] = acc + bias.data()[co];
            }
        }
    }
    out
}

/// Central finite difference step.
pub const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of `f` with respect to every element of
/// every parameter tensor of `model`.
pub fn fd_param_grads(
    model: &Model<f64>,
    f: &dyn Fn(&Model<f64>) -> f64,
) -> Vec<Tensor<f64>> {
    let mut m = model.clone();
    let mut grads = Vec::new();
    for pi in 0..model.params().len() {
        let mut g = Tensor::zeros(model.params()[pi].shape());
        for j in 0..model.params()[pi].len() {
            let orig = m.params()[pi].data()[j];
            m.params_mut()[pi].data_mut()[j] = orig + FD_STEP;
            let plus = f(&m);
            m.params_mut()[pi].data_mut()[j] = orig - FD_STEP;
            let minus = f(&m);
            m.params_mut()[pi].data_mut()[j] = orig;
            g.data_mut()[j] = (plus - minus) / (2.0 * FD_STEP);
        }
        grads.push(g);
    }
    grads
}

/// Central finite-difference gradient of `f` with respect to an input tensor.
pub fn fd_input_grad(input: &Tensor<f64>, f: &dyn Fn(&Tensor<f64>) -> f64) -> Tensor<f64> {
    let mut x = input.clone();
    let mut g = Tensor::zeros(input.shape());
    for j in 0..input.len() {
        let orig = x.data()[j];
        x.data_mut()[j] = orig + FD_STEP;
        let plus = f(&x);
        x.data_mut()[j] = orig - FD_STEP;
        let minus = f(&x);
        x.data_mut()[j] = orig;
        g.data_mut()[j] = (plus - minus) / (2.0 * FD_STEP);
    }
    g
}

/// Relative error with a floor so near-zero pairs compare cleanly.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative error across two gradient sets.
pub fn max_rel_err(analytic: &[Tensor<f64>], numeric: &[Tensor<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (&x, &y) in a.data().iter().zip(n.data()) {
            worst = worst.max(rel_err(x, y));
        }
    }
    worst
}

pub fn max_rel_err_single(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (&x, &y) in analytic.data().iter().zip(numeric.data()) {
        worst = worst.max(rel_err(x, y));
    }
    worst
}

/// Random tensor with entries kept away from zero (ReLU kinks) when
/// `avoid_zero` is set.
pub fn random_tensor<T: Scalar>(shape: &[usize], rng: &mut ChaCha8Rng, avoid_zero: bool) -> Tensor<T> {
    let len: usize = shape.iter().product();
    let data: Vec<T> = (0..len)
        .map(|_| {
            let mut v: f64 = rng.gen_range(-1.0..1.0);
            if avoid_zero {
                v += 0.15 * v.signum();
            }
            T::from_f64(v)
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Arch-style toy stack: two conv blocks on a small input, then the standard
/// flatten / dropout / FC / head tail.
pub fn toy_arch_layers(channels: usize, fc: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d {
            out_channels: channels,
            kernel_h: 3,
            kernel_w: 3,
            padding: Padding::Same,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { window: 2, stride: 2 },
        LayerSpec::Conv2d {
            out_channels: channels,
            kernel_h: 3,
            kernel_w: 3,
            padding: Padding::Same,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { window: 2, stride: 2 },
        LayerSpec::Flatten,
        LayerSpec::Dropout { rate: 0.7 },
        LayerSpec::Dense { neurons: fc },
        LayerSpec::Relu,
        LayerSpec::Dense { neurons: 2 },
        LayerSpec::Softmax,
    ]
}

pub fn toy_model_f64(input: usize, channels: usize, fc: usize, seed: u64) -> Model<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Model::new(&[input, input, 1], toy_arch_layers(channels, fc), &mut rng).unwrap()
}

/// One-hot labels tensor for a batch of class indices.
pub fn one_hot_labels<T: Scalar>(classes: &[usize]) -> Tensor<T> {
    let mut data = vec![T::zero(); classes.len() * 2];
    for (i, &c) in classes.iter().enumerate() {
        data[i * 2 + c] = T::one();
    }
    Tensor::from_vec(&[classes.len(), 2], data).unwrap()
}
