//! Image file I/O. Inputs: PNG (8-bit gray or RGB), PGM (P5), and JPEG.
//! Outputs: PNG. Multi-channel inputs keep channel 0 only; for grayscale
//! X-rays stored as RGB the three channels are redundant.

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Loads an image and extracts channel 0 as grayscale.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::Image {
        path: path.into(),
        message: e.to_string(),
    })?;
    let (pixels, w, h) = match decoded {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width(), img.height());
            (img.into_raw().iter().map(|&v| v as f32).collect(), w, h)
        }
        DynamicImage::ImageLumaA8(img) => {
            let (w, h) = (img.width(), img.height());
            (img.pixels().map(|p| p.0[0] as f32).collect(), w, h)
        }
        DynamicImage::ImageRgb8(img) => {
            let (w, h) = (img.width(), img.height());
            (img.pixels().map(|p| p.0[0] as f32).collect(), w, h)
        }
        DynamicImage::ImageRgba8(img) => {
            let (w, h) = (img.width(), img.height());
            (img.pixels().map(|p| p.0[0] as f32).collect(), w, h)
        }
        other => {
            // 16-bit and exotic layouts: reduce to 8-bit RGB first.
            let img = other.to_rgb8();
            let (w, h) = (img.width(), img.height());
            (img.pixels().map(|p| p.0[0] as f32).collect(), w, h)
        }
    };
    if w == 0 || h == 0 {
        return Err(Error::Image {
            path: path.into(),
            message: "image has a zero dimension".into(),
        });
    }
    GrayImage::new(h as usize, w as usize, pixels)
}

/// Writes a grayscale image as 8-bit PNG. Values are clamped to `[0, 255]`
/// and rounded.
pub fn save_grayscale_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .pixels
        .iter()
        .map(|&v| v.clamp(0.0, 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("buffer length matches dimensions");
    buf.save(path).map_err(|e| Error::Image {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Writes interleaved RGB bytes as 8-bit PNG.
pub fn save_rgb_png(height: usize, width: usize, rgb: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if rgb.len() != height * width * 3 {
        return Err(Error::shape(format!(
            "rgb buffer of {} bytes does not match {height}x{width}x3",
            rgb.len()
        )));
    }
    let buf = image::RgbImage::from_raw(width as u32, height as u32, rgb.to_vec())
        .expect("buffer length matches dimensions");
    buf.save(path).map_err(|e| Error::Image {
        path: path.into(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn pgm_p5_values_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(b"P5\n2 2\n255\n").unwrap();
        f.write_all(&[0u8, 85, 170, 255]).unwrap();
        drop(f);
        let img = load_grayscale(&path).unwrap();
        assert_eq!((img.height, img.width), (2, 2));
        assert_eq!(img.pixels, vec![0.0, 85.0, 170.0, 255.0]);
    }

    #[test]
    fn rgb_png_keeps_first_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let mut buf = image::RgbImage::new(3, 2);
        for p in buf.pixels_mut() {
            *p = image::Rgb([7, 200, 90]);
        }
        buf.save(&path).unwrap();
        let img = load_grayscale(&path).unwrap();
        assert!(img.pixels.iter().all(|&v| v == 7.0));
    }

    #[test]
    fn truncated_file_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.png");
        std::fs::write(&path, b"\x89PNG\r\n\x1a\n truncated").unwrap();
        assert!(load_grayscale(&path).is_err());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(load_grayscale("/nonexistent/nope.png").is_err());
    }

    #[test]
    fn grayscale_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        let img = GrayImage::new(2, 3, vec![0.0, 10.0, 50.0, 100.0, 200.0, 255.0]).unwrap();
        save_grayscale_png(&img, &path).unwrap();
        let back = load_grayscale(&path).unwrap();
        assert_eq!(back, img);
    }
}
