//! 2-D cross-correlation ("convolution") with stride 1.
//!
//! Layout: inputs are `[H, W, Cin]`, kernels `[Kh, Kw, Cin, Cout]`, biases
//! `[Cout]`, all row-major. Per output element the accumulation order is
//! `(kh, kw, cin)`, identical to a direct quadruple loop, so results are
//! reproducible down to the last bit regardless of the channel-vectorized
//! inner loop.

use crate::error::{Error, Result};
use crate::nn::Padding;
use crate::tensor::{Scalar, Tensor};

fn check_conv_shapes<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<()> {
    if input.shape().len() != 3 {
        return Err(Error::shape(format!(
            "conv2d input must be [H,W,Cin], got {:?}",
            input.shape()
        )));
    }
    if kernels.shape().len() != 4 {
        return Err(Error::shape(format!(
            "conv2d kernels must be [Kh,Kw,Cin,Cout], got {:?}",
            kernels.shape()
        )));
    }
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw, kcin, cout) = (
        kernels.shape()[0],
        kernels.shape()[1],
        kernels.shape()[2],
        kernels.shape()[3],
    );
    if kcin != cin {
        return Err(Error::shape(format!(
            "kernel input channels {kcin} do not match input channels {cin}"
        )));
    }
    if kh > h || kw > w {
        return Err(Error::shape(format!(
            "kernel {kh}x{kw} larger than input {h}x{w}"
        )));
    }
    if bias.shape() != [cout] {
        return Err(Error::shape(format!(
            "bias shape {:?} does not match {cout} output channels",
            bias.shape()
        )));
    }
    Ok(())
}

/// Output spatial size and top/left padding for a padding mode.
pub fn conv_output_geometry(h: usize, w: usize, kh: usize, kw: usize, padding: Padding) -> (usize, usize, usize, usize) {
    match padding {
        Padding::Same => (h, w, (kh - 1) / 2, (kw - 1) / 2),
        Padding::Valid => (h - kh + 1, w - kw + 1, 0, 0),
    }
}

/// Cross-correlates `input` with every kernel and adds the bias.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<Tensor<T>> {
    check_conv_shapes(input, kernels, bias)?;
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw, cout) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[3]);
    let (out_h, out_w, pad_y, pad_x) = conv_output_geometry(h, w, kh, kw, padding);

    let x = input.data();
    let k = kernels.data();
    let b = bias.data();
    let mut out = Tensor::zeros(&[out_h, out_w, cout]);
    let o = out.data_mut();
    let mut acc = vec![T::zero(); cout];

    for oy in 0..out_h {
        for ox in 0..out_w {
            for a in acc.iter_mut() {
                *a = T::zero();
            }
            for ky in 0..kh {
                let iy = (oy + ky) as isize - pad_y as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let ix = (ox + kx) as isize - pad_x as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let px = &x[((iy as usize * w) + ix as usize) * cin..][..cin];
                    let krow = &k[((ky * kw + kx) * cin) * cout..][..cin * cout];
                    for (ci, &v) in px.iter().enumerate() {
                        let kr = &krow[ci * cout..][..cout];
                        let acc = &mut acc[..cout];
                        for co in 0..cout {
                            acc[co] += v * kr[co];
                        }
                    }
                }
            }
            let dst = &mut o[(oy * out_w + ox) * cout..][..cout];
            for co in 0..cout {
                dst[co] = acc[co] + b[co];
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to input, kernels, and bias.
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    padding: Padding,
) -> Result<ConvGrads<T>> {
    let mut grad_kernels = Tensor::zeros(kernels.shape());
    let mut grad_bias = Tensor::zeros(&[kernels.shape()[3]]);
    let input_grad = conv2d_backward_accumulate(
        upstream,
        input,
        kernels,
        padding,
        &mut grad_kernels,
        &mut grad_bias,
    )?;
    Ok(ConvGrads {
        input: input_grad,
        kernels: grad_kernels,
        bias: grad_bias,
    })
}

/// Backward pass that *accumulates* kernel/bias gradients into caller-owned
/// buffers (so batch loops avoid per-sample allocations) and returns the
/// fresh input gradient.
///
/// The three gradient components run as separate channel-vectorized passes;
/// the kernel-gradient pass tiles input channels to keep its accumulators in
/// registers across the image sweep.
pub fn conv2d_backward_accumulate<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    padding: Padding,
    grad_kernels: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    if input.shape().len() != 3 || kernels.shape().len() != 4 {
        return Err(Error::shape(
            "conv2d_backward expects [H,W,Cin] input and [Kh,Kw,Cin,Cout] kernels",
        ));
    }
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw, cout) = (kernels.shape()[0], kernels.shape()[1], kernels.shape()[3]);
    if kernels.shape()[2] != cin {
        return Err(Error::shape(format!(
            "kernel input channels {} do not match input channels {cin}",
            kernels.shape()[2]
        )));
    }
    let (out_h, out_w, pad_y, pad_x) = conv_output_geometry(h, w, kh, kw, padding);
    if upstream.shape() != [out_h, out_w, cout] {
        return Err(Error::shape(format!(
            "upstream shape {:?} does not match forward output [{out_h}, {out_w}, {cout}]",
            upstream.shape()
        )));
    }
    if grad_kernels.shape() != kernels.shape() || grad_bias.shape() != [cout] {
        return Err(Error::shape(
            "gradient accumulators do not match kernel/bias shapes",
        ));
    }

    let x = input.data();
    let k = kernels.data();
    let up = upstream.data();

    // bias: plain column sums of the upstream map
    {
        let gb = &mut grad_bias.data_mut()[..cout];
        for px in up.chunks_exact(cout) {
            for co in 0..cout {
                gb[co] += px[co];
            }
        }
    }

    // input gradient: axpy over cin lanes using a [kh,kw,cout,cin] transpose
    let mut grad_input = Tensor::zeros(input.shape());
    {
        let mut kt = vec![T::zero(); k.len()];
        for tap in 0..kh * kw {
            for ci in 0..cin {
                for co in 0..cout {
                    kt[(tap * cout + co) * cin + ci] = k[(tap * cin + ci) * cout + co];
                }
            }
        }
        let gi = grad_input.data_mut();
        for oy in 0..out_h {
            for ox in 0..out_w {
                let up_px = &up[(oy * out_w + ox) * cout..][..cout];
                for ky in 0..kh {
                    let iy = (oy + ky) as isize - pad_y as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox + kx) as isize - pad_x as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let gi_px = &mut gi[((iy as usize * w) + ix as usize) * cin..][..cin];
                        let kt_tap = &kt[(ky * kw + kx) * cout * cin..][..cout * cin];
                        for co in 0..cout {
                            let u = up_px[co];
                            let ktr = &kt_tap[co * cin..][..cin];
                            for ci in 0..cin {
                                gi_px[ci] += u * ktr[ci];
                            }
                        }
                    }
                }
            }
        }
    }

    // kernel gradient: per (tap, cin tile), sweep the image with the partial
    // sums held in a small local accumulator
    {
        const TILE: usize = 4;
        let gk = grad_kernels.data_mut();
        let mut acc = vec![T::zero(); TILE * cout];
        for ky in 0..kh {
            for kx in 0..kw {
                let mut ci0 = 0;
                while ci0 < cin {
                    let tile = TILE.min(cin - ci0);
                    for a in acc.iter_mut() {
                        *a = T::zero();
                    }
                    for oy in 0..out_h {
                        let iy = (oy + ky) as isize - pad_y as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..out_w {
                            let ix = (ox + kx) as isize - pad_x as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let px = &x[((iy as usize * w) + ix as usize) * cin + ci0..][..tile];
                            let up_px = &up[(oy * out_w + ox) * cout..][..cout];
                            for (t, &v) in px.iter().enumerate() {
                                let acc_t = &mut acc[t * cout..][..cout];
                                for co in 0..cout {
                                    acc_t[co] += v * up_px[co];
                                }
                            }
                        }
                    }
                    for t in 0..tile {
                        let dst = &mut gk[((ky * kw + kx) * cin + ci0 + t) * cout..][..cout];
                        let acc_t = &acc[t * cout..][..cout];
                        for co in 0..cout {
                            dst[co] += acc_t[co];
                        }
                    }
                    ci0 += tile;
                }
            }
        }
    }

    Ok(grad_input)
}
