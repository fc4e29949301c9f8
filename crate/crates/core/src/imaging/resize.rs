//! Bilinear resize on a corner-aligned sampling grid: output corners map
//! exactly onto input corners, so resizing to the same size is the identity.

use crate::error::Result;
use crate::imaging::GrayImage;

pub fn resize_bilinear(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    if img.height == out_h && img.width == out_w {
        return Ok(img.clone());
    }
    let scale_y = if out_h > 1 {
        (img.height - 1) as f64 / (out_h - 1) as f64
    } else {
        0.0
    };
    let scale_x = if out_w > 1 {
        (img.width - 1) as f64 / (out_w - 1) as f64
    } else {
        0.0
    };
    let mut pixels = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let sy = oy as f64 * scale_y;
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = (sy - y0 as f64) as f32;
        for ox in 0..out_w {
            let sx = ox as f64 * scale_x;
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = (sx - x0 as f64) as f32;
            let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
            let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
            pixels.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    GrayImage::new(out_h, out_w, pixels)
}
