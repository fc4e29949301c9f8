//! Elementwise activations and the stable softmax.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes the upstream gradient where the cached input was positive,
/// zero elsewhere (including exactly at zero).
pub fn relu_backward<T: Scalar>(upstream: &Tensor<T>, cached_input: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.shape() != cached_input.shape() {
        return Err(Error::shape(format!(
            "relu_backward shapes disagree: {:?} vs {:?}",
            upstream.shape(),
            cached_input.shape()
        )));
    }
    let data = upstream
        .data()
        .iter()
        .zip(cached_input.data())
        .map(|(&u, &x)| if x > T::zero() { u } else { T::zero() })
        .collect();
    Tensor::from_vec(upstream.shape(), data)
}

/// Max-subtracted softmax over a rank-1 tensor.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .cloned()
        .fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.data().iter().map(|&v| (v - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
    Tensor::from_vec(logits.shape(), exps.into_iter().map(|e| e / sum).collect())
        .expect("softmax preserves shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::from_vec(&[3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_is_identity_on_positive_input() {
        let x = Tensor::from_vec(&[4], vec![0.1f32, 5.0, 2.5, 0.01]).unwrap();
        assert_eq!(relu(&x).data(), x.data());
    }

    #[test]
    fn relu_backward_masks_nonpositive() {
        let x = Tensor::from_vec(&[3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        let up = Tensor::filled(&[3], 1.0f32);
        let g = relu_backward(&up, &x).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let p = softmax(&Tensor::from_vec(&[2], vec![0.0f64, 0.0]).unwrap());
        assert_eq!(p.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_matches_independent_evaluation() {
        // [1, 0] -> [e/(e+1), 1/(e+1)]
        let p = softmax(&Tensor::from_vec(&[2], vec![1.0f64, 0.0]).unwrap());
        let e = std::f64::consts::E;
        assert!((p.data()[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p.data()[0] - 0.7311).abs() < 1e-4);
        assert!((p.data()[1] - 0.2689).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(a in -15.0f64..15.0, b in -15.0f64..15.0) {
            // logit gaps beyond ~36 saturate to exactly 1.0 in f64, so keep
            // the open-interval property testable
            let p = softmax(&Tensor::from_vec(&[2], vec![a, b]).unwrap());
            prop_assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
            prop_assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn softmax_is_shift_invariant(a in -20.0f64..20.0, b in -20.0f64..20.0, c in -100.0f64..100.0) {
            let p1 = softmax(&Tensor::from_vec(&[2], vec![a, b]).unwrap());
            let p2 = softmax(&Tensor::from_vec(&[2], vec![a + c, b + c]).unwrap());
            prop_assert!((p1.data()[0] - p2.data()[0]).abs() < 1e-9);
            prop_assert!((p1.data()[1] - p2.data()[1]).abs() < 1e-9);
        }
    }
}
