//! Max pooling over `[H, W, C]` with floor semantics: trailing rows/columns
//! that do not fill a window are dropped.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Per-window maximum. Returns the pooled tensor and, per output element, the
/// flat index of its argmax in the input (ties go to the first position in
/// row-major order).
pub fn maxpool2d<T: Scalar>(
    input: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    if input.shape().len() != 3 {
        return Err(Error::shape(format!(
            "maxpool2d input must be [H,W,C], got {:?}",
            input.shape()
        )));
    }
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if window == 0 || stride == 0 || h < window || w < window {
        return Err(Error::shape(format!(
            "maxpool2d window {window}/stride {stride} invalid for {h}x{w} input"
        )));
    }
    let out_h = (h - window) / stride + 1;
    let out_w = (w - window) / stride + 1;
    let x = input.data();
    let mut out = Tensor::zeros(&[out_h, out_w, c]);
    let o = out.data_mut();
    let mut argmax = vec![0usize; out_h * out_w * c];

    for oy in 0..out_h {
        for ox in 0..out_w {
            for ch in 0..c {
                let mut best = T::neg_infinity();
                let mut best_idx = 0usize;
                for wy in 0..window {
                    for wx in 0..window {
                        let idx = ((oy * stride + wy) * w + (ox * stride + wx)) * c + ch;
                        // strict '>' keeps the first maximum in row-major order
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let out_idx = (oy * out_w + ox) * c + ch;
                o[out_idx] = best;
                argmax[out_idx] = best_idx;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes the upstream gradient to each window's argmax position.
pub fn maxpool2d_backward<T: Scalar>(
    upstream: &Tensor<T>,
    input_shape: &[usize],
    argmax: &[usize],
) -> Result<Tensor<T>> {
    if upstream.len() != argmax.len() {
        return Err(Error::shape(format!(
            "maxpool2d_backward upstream length {} does not match {} recorded argmaxes",
            upstream.len(),
            argmax.len()
        )));
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&idx, &u) in argmax.iter().zip(upstream.data().iter()) {
        g[idx] += u;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_window_takes_max() {
        let input = Tensor::from_vec(&[2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let (out, argmax) = maxpool2d(&input, 2, 2).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(argmax, vec![3]);
    }

    #[test]
    fn constant_input_stays_constant() {
        let input = Tensor::filled(&[4, 6, 2], 0.25f32);
        let (out, _) = maxpool2d(&input, 2, 2).unwrap();
        assert_eq!(out.shape(), &[2, 3, 2]);
        assert!(out.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn odd_trailing_rows_are_dropped() {
        let input = Tensor::filled(&[5, 7, 1], 1.0f32);
        let (out, _) = maxpool2d(&input, 2, 2).unwrap();
        assert_eq!(out.shape(), &[2, 3, 1]);
    }

    #[test]
    fn ties_route_to_first_in_row_major_order() {
        let input = Tensor::filled(&[2, 2, 1], 5.0f32);
        let (_, argmax) = maxpool2d(&input, 2, 2).unwrap();
        assert_eq!(argmax, vec![0]);
        let up = Tensor::from_vec(&[1, 1, 1], vec![1.0f32]).unwrap();
        let grad = maxpool2d_backward(&up, &[2, 2, 1], &argmax).unwrap();
        assert_eq!(grad.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_concentrates_on_argmax() {
        let input =
            Tensor::from_vec(&[2, 4, 1], vec![1.0f32, 9.0, 2.0, 3.0, 4.0, 5.0, 8.0, 7.0]).unwrap();
        let (out, argmax) = maxpool2d(&input, 2, 2).unwrap();
        assert_eq!(out.data(), &[9.0, 8.0]);
        let up = Tensor::from_vec(&[1, 2, 1], vec![0.5f32, -1.5]).unwrap();
        let grad = maxpool2d_backward(&up, &[2, 4, 1], &argmax).unwrap();
        let mut expected = vec![0.0f32; 8];
        expected[1] = 0.5;
        expected[6] = -1.5;
        assert_eq!(grad.data(), &expected[..]);
    }
}
