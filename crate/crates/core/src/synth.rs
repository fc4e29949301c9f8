//! Built-in synthetic dataset: a bright Gaussian blob on a noisy background,
//! in the left half for class 0 and the right half for class 1. Separable by
//! construction, so it serves as a fast end-to-end check of the whole
//! pipeline (training, ensembling, metrics, and saliency localization).

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{save_manifest, Label};
use crate::error::{Error, Result};
use crate::imaging::{save_grayscale_png, GrayImage};
use crate::rng::seeded_rng;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    /// Uniform noise half-range added to every pixel.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 400,
            height: 150,
            width: 150,
            noise: 12.0,
            seed: 0,
        }
    }
}

/// Blob placement margins keep the blob's mass inside its half even after
/// augmentation shifts of up to 10% of the width.
fn blob_center<R: Rng>(cfg: &SynthConfig, label: Label, rng: &mut R) -> (f64, f64) {
    let w = cfg.width as f64;
    let h = cfg.height as f64;
    let cx = match label {
        Label::NonConsolidation => rng.gen_range(0.13 * w..0.37 * w),
        Label::Consolidation => rng.gen_range(0.63 * w..0.87 * w),
    };
    let cy = rng.gen_range(0.2 * h..0.8 * h);
    (cx, cy)
}

/// Renders one sample image.
pub fn synth_image<R: Rng>(cfg: &SynthConfig, label: Label, rng: &mut R) -> GrayImage {
    let (cx, cy) = blob_center(cfg, label, rng);
    let sigma = rng.gen_range(0.08..0.12) * cfg.width as f64;
    let amplitude = rng.gen_range(100.0..140.0);
    let background = 30.0;
    let mut pixels = Vec::with_capacity(cfg.height * cfg.width);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            let blob = amplitude * (-d2 / (2.0 * sigma * sigma)).exp();
            let noise = rng.gen_range(-cfg.noise..=cfg.noise);
            pixels.push((background + blob + noise).clamp(0.0, 255.0) as f32);
        }
    }
    GrayImage {
        height: cfg.height,
        width: cfg.width,
        pixels,
    }
}

/// Generates the dataset under `dir` (PNG files plus `manifest.csv` with
/// paths relative to the directory) and returns the manifest path.
/// Classes alternate, so any prefix is balanced.
pub fn generate_blob_dataset(dir: impl AsRef<Path>, cfg: &SynthConfig) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if cfg.count < 4 {
        return Err(Error::Config("synthetic dataset needs at least 4 images".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = seeded_rng(cfg.seed, &[0x5F27]);
    let mut rows = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let label = if i % 2 == 0 {
            Label::NonConsolidation
        } else {
            Label::Consolidation
        };
        let img = synth_image(cfg, label, &mut rng);
        let name = format!("blob_{i:04}.png");
        save_grayscale_png(&img, dir.join(&name))?;
        rows.push((name, label));
    }
    let manifest_path = dir.join("manifest.csv");
    save_manifest(&manifest_path, &rows)?;
    Ok(manifest_path)
}

/// True half of the image for a label: class 0 owns columns `< width/2`,
/// class 1 owns the rest. Used by saliency-localization checks.
pub fn in_label_half(x: usize, width: usize, label: Label) -> bool {
    match label {
        Label::NonConsolidation => x < width / 2,
        Label::Consolidation => x >= width / 2,
    }
}
