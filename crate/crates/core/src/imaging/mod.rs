//! Image ingestion, grayscale extraction, resizing, mean normalization, and
//! stochastic affine augmentation.

pub mod augment;
pub mod io;
pub mod resize;

pub use augment::{augment, augment_with, AugmentParams, AugmentationConfig};
pub use io::{load_grayscale, save_grayscale_png, save_rgb_png};
pub use resize::resize_bilinear;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Single-channel image with pixel values in `[0, 255]` before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || height * width != pixels.len() {
            return Err(Error::shape(format!(
                "image {height}x{width} does not match {} pixels",
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::DegenerateInput(
                "image pixels must be finite and non-negative".into(),
            ));
        }
        Ok(GrayImage {
            height,
            width,
            pixels,
        })
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        GrayImage {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f32 {
        let sum: f64 = self.pixels.iter().map(|&v| v as f64).sum();
        (sum / self.pixels.len() as f64) as f32
    }
}

/// Divides every pixel by the image's own mean and shapes the result as a
/// `[H, W, 1]` tensor. The output mean is 1 by construction.
pub fn normalize_mean(img: &GrayImage) -> Result<Tensor<f32>> {
    let mean = img.mean();
    if mean <= 0.0 {
        return Err(Error::DegenerateInput(
            "cannot mean-normalize an all-zero image".into(),
        ));
    }
    let data = img.pixels.iter().map(|&v| v / mean).collect();
    Tensor::from_vec(&[img.height, img.width, 1], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_normalizes_to_ones() {
        let img = GrayImage::constant(4, 4, 37.0);
        let t = normalize_mean(&img).unwrap();
        assert!(t.data().iter().all(|&v| (v - 1.0).abs() < 1e-6));
        assert_eq!(t.shape(), &[4, 4, 1]);
    }

    #[test]
    fn two_pixel_example() {
        let img = GrayImage::new(1, 2, vec![1.0, 3.0]).unwrap();
        let t = normalize_mean(&img).unwrap();
        assert_eq!(t.data(), &[0.5, 1.5]);
    }

    #[test]
    fn all_zero_image_is_degenerate() {
        let img = GrayImage::constant(2, 2, 0.0);
        assert!(normalize_mean(&img).is_err());
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn normalized_mean_is_one(pixels in proptest::collection::vec(0.0f32..255.0, 16..64)) {
            prop_assume!(pixels.iter().sum::<f32>() > 1.0);
            let n = pixels.len();
            // pad to a rectangle
            let (h, w) = (1, n);
            let img = GrayImage::new(h, w, pixels).unwrap();
            let t = normalize_mean(&img).unwrap();
            let mean: f64 = t.data().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            prop_assert!((mean - 1.0).abs() < 1e-6);
        }
    }
}
