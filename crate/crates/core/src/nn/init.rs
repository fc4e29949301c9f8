//! Weight initialization. He-uniform for layers feeding a ReLU,
//! Glorot-uniform otherwise; biases start at zero.
//!
//! Samples are drawn as f64 and cast, so an f32 and an f64 model built from
//! the same seed share the identical initialization stream.

use crate::tensor::{sc, Scalar, Tensor};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / fan_in)`.
    HeUniform,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    GlorotUniform,
}

pub fn init_weights<T: Scalar, R: Rng>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    init: Init,
    rng: &mut R,
) -> Tensor<T> {
    let limit = match init {
        Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
        Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    };
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| sc(rng.gen_range(-limit..limit)))
        .collect();
    Tensor::from_vec(shape, data).expect("init shape is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bounds_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Tensor<f32> = init_weights(&[100], 8, 4, Init::HeUniform, &mut rng);
        let limit = (6.0f32 / 8.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() < limit));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        let wa: Tensor<f32> = init_weights(&[50], 10, 10, Init::GlorotUniform, &mut a);
        let wb: Tensor<f32> = init_weights(&[50], 10, 10, Init::GlorotUniform, &mut b);
        assert_eq!(wa.data(), wb.data());
    }
}
