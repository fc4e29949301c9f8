//! Fully connected layer: `y = xW + b` with `x: [n]`, `W: [n, m]`, `b: [m]`.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn check_dense_shapes<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize)> {
    if x.shape().len() != 1 || w.shape().len() != 2 {
        return Err(Error::shape(format!(
            "dense expects x:[n] W:[n,m], got x:{:?} W:{:?}",
            x.shape(),
            w.shape()
        )));
    }
    let (n, m) = (w.shape()[0], w.shape()[1]);
    if x.len() != n {
        return Err(Error::shape(format!(
            "dense input length {} does not match weight rows {n}",
            x.len()
        )));
    }
    if b.shape() != [m] {
        return Err(Error::shape(format!(
            "dense bias shape {:?} does not match {m} outputs",
            b.shape()
        )));
    }
    Ok((n, m))
}

pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, m) = check_dense_shapes(x, w, b)?;
    let xs = x.data();
    let ws = w.data();
    let mut out = b.data().to_vec();
    for i in 0..n {
        let v = xs[i];
        let row = &ws[i * m..][..m];
        let out = &mut out[..m];
        for j in 0..m {
            out[j] += v * row[j];
        }
    }
    Tensor::from_vec(&[m], out)
}

pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Dot product over eight independent lanes so the reduction vectorizes.
fn dot_lanes<T: Scalar>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 8;
    let mut lanes = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let ac = &a[c * LANES..][..LANES];
        let bc = &b[c * LANES..][..LANES];
        for l in 0..LANES {
            lanes[l] += ac[l] * bc[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * LANES..a.len() {
        tail += a[i] * b[i];
    }
    ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5]))
        + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]))
        + tail
}

pub fn dense_backward<T: Scalar>(
    upstream: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (n, m) = check_dense_backward_shapes(upstream, x, w)?;
    let mut grad_w = Tensor::zeros(&[n, m]);
    let mut grad_b = Tensor::zeros(&[m]);
    let grad_x = dense_backward_accumulate(upstream, x, w, &mut grad_w, &mut grad_b)?;
    Ok(DenseGrads {
        input: grad_x,
        weights: grad_w,
        bias: grad_b,
    })
}

fn check_dense_backward_shapes<T: Scalar>(
    upstream: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> Result<(usize, usize)> {
    if w.shape().len() != 2 {
        return Err(Error::shape(format!("dense weights must be [n,m], got {:?}", w.shape())));
    }
    let (n, m) = (w.shape()[0], w.shape()[1]);
    if x.len() != n || upstream.len() != m {
        return Err(Error::shape(format!(
            "dense backward shapes disagree: x:{} upstream:{} W:[{n},{m}]",
            x.len(),
            upstream.len()
        )));
    }
    Ok((n, m))
}

/// Backward pass accumulating weight/bias gradients into caller-owned
/// buffers; returns the fresh input gradient.
pub fn dense_backward_accumulate<T: Scalar>(
    upstream: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_w: &mut Tensor<T>,
    grad_b: &mut Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, m) = check_dense_backward_shapes(upstream, x, w)?;
    if grad_w.shape() != [n, m] || grad_b.shape() != [m] {
        return Err(Error::shape(
            "gradient accumulators do not match dense parameter shapes",
        ));
    }
    let xs = x.data();
    let ws = w.data();
    let up = &upstream.data()[..m];

    {
        let gb = &mut grad_b.data_mut()[..m];
        for j in 0..m {
            gb[j] += up[j];
        }
    }

    let gw = grad_w.data_mut();
    let mut grad_x = vec![T::zero(); n];
    for i in 0..n {
        let v = xs[i];
        let gw_row = &mut gw[i * m..][..m];
        for j in 0..m {
            gw_row[j] += v * up[j];
        }
        grad_x[i] = dot_lanes(&ws[i * m..][..m], up);
    }
    Ok(Tensor::from_vec(&[n], grad_x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let x = Tensor::from_vec(&[3], vec![0.5f32, -1.0, 2.0]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let b = Tensor::zeros(&[3]);
        let y = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn hand_computed_product() {
        // x=[1,1], W=[[1,2],[3,4]], b=[0,0] -> [4,6]
        let x = Tensor::from_vec(&[2], vec![1.0f32, 1.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::zeros(&[2]);
        let y = dense_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0]);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let x = Tensor::from_vec(&[3], vec![1.0f32; 3]).unwrap();
        let w = Tensor::zeros(&[2, 4]);
        let b = Tensor::zeros(&[4]);
        assert!(dense_forward(&x, &w, &b).is_err());
        let b_bad = Tensor::zeros(&[3]);
        let w_ok = Tensor::zeros(&[3, 4]);
        assert!(dense_forward(&x, &w_ok, &b_bad).is_err());
    }

    #[test]
    fn backward_bias_is_upstream() {
        let x = Tensor::from_vec(&[2], vec![1.0f32, 2.0]).unwrap();
        let w = Tensor::from_vec(&[2, 2], vec![1.0f32, 0.0, 0.0, 1.0]).unwrap();
        let up = Tensor::from_vec(&[2], vec![0.3f32, -0.7]).unwrap();
        let grads = dense_backward(&up, &x, &w).unwrap();
        assert_eq!(grads.bias.data(), up.data());
        // grad_w[i][j] = x[i] * up[j]
        assert_eq!(grads.weights.data(), &[0.3, -0.7, 0.6, -1.4]);
    }
}
