//! Inverted dropout: survivors are scaled by `1/(1-rate)` during training so
//! inference is the plain identity.

use crate::error::{Error, Result};
use crate::tensor::{sc, Scalar, Tensor};
use rand::Rng;

/// Applies dropout. In training mode returns the output together with the
/// multiplier mask (0 for dropped elements, `1/(1-rate)` for survivors);
/// in inference mode the input passes through untouched and no mask exists.
///
/// Mask decisions are drawn as f64 so the stream is identical across scalar
/// precisions for the same RNG state.
pub fn dropout<T: Scalar, R: Rng>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor<T>, Option<Tensor<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0,1)")));
    }
    if !training || rate == 0.0 {
        // rate 0 in training mode: still the identity, and no RNG draws
        return Ok((x.clone(), None));
    }
    let keep_scale: T = sc(1.0 / (1.0 - rate));
    let mask_data: Vec<T> = (0..x.len())
        .map(|_| {
            if rng.gen::<f64>() < rate {
                T::zero()
            } else {
                keep_scale
            }
        })
        .collect();
    let mask = Tensor::from_vec(x.shape(), mask_data)?;
    let out_data = x
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&v, &m)| v * m)
        .collect();
    Ok((Tensor::from_vec(x.shape(), out_data)?, Some(mask)))
}

/// Backward pass given the mask captured during the forward call.
pub fn dropout_backward<T: Scalar>(upstream: &Tensor<T>, mask: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.shape() != mask.shape() {
        return Err(Error::shape(format!(
            "dropout_backward shapes disagree: {:?} vs {:?}",
            upstream.shape(),
            mask.shape()
        )));
    }
    let data = upstream
        .data()
        .iter()
        .zip(mask.data())
        .map(|(&u, &m)| u * m)
        .collect();
    Tensor::from_vec(upstream.shape(), data)
}
