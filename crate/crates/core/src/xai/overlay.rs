//! Heatmap rendering: colormap lookup plus alpha blend over the X-ray.

use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::tensor::Tensor;
use crate::xai::colormap::Colormap;

/// Colorizes `map` (values in `[0, 1]`, shape `[H, W]`) and blends it over
/// the grayscale X-ray: `out = (1 - alpha) * gray + alpha * color`, rounded
/// to 8 bits. Returns interleaved RGB bytes.
pub fn render_overlay(
    xray: &GrayImage,
    map: &Tensor<f32>,
    colormap: &Colormap,
    alpha: f32,
) -> Result<Vec<u8>> {
    if map.shape() != [xray.height, xray.width] {
        return Err(Error::shape(format!(
            "heatmap shape {:?} does not match {}x{} image",
            map.shape(),
            xray.height,
            xray.width
        )));
    }
    let mut rgb = Vec::with_capacity(xray.height * xray.width * 3);
    for (&gray, &v) in xray.pixels.iter().zip(map.data()) {
        let color = colormap.lookup(v);
        let g = gray.clamp(0.0, 255.0);
        for c in 0..3 {
            let blended = (1.0 - alpha) * g + alpha * color[c] as f32;
            rgb.push(blended.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(rgb)
}

/// Integer upscale by pixel replication (nearest neighbor), for viewing
/// 150x150 artifacts at a comfortable size.
pub fn upscale_rgb(rgb: &[u8], height: usize, width: usize, factor: usize) -> Vec<u8> {
    if factor <= 1 {
        return rgb.to_vec();
    }
    let mut out = Vec::with_capacity(rgb.len() * factor * factor);
    for y in 0..height * factor {
        let sy = y / factor;
        for x in 0..width * factor {
            let sx = x / factor;
            let off = (sy * width + sx) * 3;
            out.extend_from_slice(&rgb[off..off + 3]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_heatmap_tints_uniformly() {
        let xray = GrayImage::constant(4, 4, 100.0);
        let map = Tensor::zeros(&[4, 4]);
        let rgb = render_overlay(&xray, &map, Colormap::jet(), 0.5).unwrap();
        let blue = Colormap::jet().lookup(0.0);
        for px in rgb.chunks(3) {
            for c in 0..3 {
                let expected = (0.5 * 100.0 + 0.5 * blue[c] as f32).round() as u8;
                assert_eq!(px[c], expected);
            }
        }
    }

    #[test]
    fn alpha_arithmetic_hand_check() {
        // gray 200 blended with color channel 100 at 50% -> 150
        let xray = GrayImage::constant(1, 1, 200.0);
        let map = Tensor::zeros(&[1, 1]);
        let gray_map = Colormap::parse(&"100,100,100\n".repeat(256)).unwrap();
        let rgb = render_overlay(&xray, &map, &gray_map, 0.5).unwrap();
        assert_eq!(rgb, vec![150, 150, 150]);
    }

    #[test]
    fn render_is_deterministic() {
        let xray = GrayImage::new(2, 2, vec![10.0, 60.0, 120.0, 250.0]).unwrap();
        let map = Tensor::from_vec(&[2, 2], vec![0.0f32, 0.3, 0.7, 1.0]).unwrap();
        let a = render_overlay(&xray, &map, Colormap::jet(), 0.5).unwrap();
        let b = render_overlay(&xray, &map, Colormap::jet(), 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let xray = GrayImage::constant(2, 2, 0.0);
        let map = Tensor::zeros(&[3, 3]);
        assert!(render_overlay(&xray, &map, Colormap::jet(), 0.5).is_err());
    }

    #[test]
    fn upscale_replicates_pixels() {
        let rgb = vec![1, 2, 3, 4, 5, 6];
        let up = upscale_rgb(&rgb, 1, 2, 2);
        assert_eq!(up.len(), 24);
        assert_eq!(&up[0..3], &[1, 2, 3]);
        assert_eq!(&up[3..6], &[1, 2, 3]);
        assert_eq!(&up[6..9], &[4, 5, 6]);
    }
}
