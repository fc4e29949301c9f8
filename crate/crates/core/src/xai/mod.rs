//! Gradient-saliency heatmaps per output neuron, ensemble mean and
//! standard-deviation (uncertainty) maps, and overlay rendering.

pub mod colormap;
pub mod overlay;

pub use colormap::Colormap;
pub use overlay::{render_overlay, upscale_rgb};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::INPUT_SIZE;
use crate::ensemble::{average_predictions, Ensemble};
use crate::error::{Error, Result};
use crate::imaging::{load_grayscale, normalize_mean, resize_bilinear, GrayImage};
use crate::nn::Model;
use crate::tensor::{Scalar, Tensor};
use crate::training::{predict, Prediction};

/// A normalized saliency map: `[H, W]` values in `[0, 1]`, where 1 marks the
/// pixel the model's output is most sensitive to. The map is all zeros when
/// the raw gradient vanished everywhere.
#[derive(Clone, Debug)]
pub struct Heatmap {
    pub map: Tensor<f32>,
    pub class_index: usize,
    pub source: String,
}

/// Min-max normalizes absolute values into `[0, 1]`; an all-constant map
/// collapses to zeros rather than dividing by zero.
fn normalize_abs<T: Scalar>(raw: &Tensor<T>) -> Tensor<f32> {
    let abs: Vec<f64> = raw.data().iter().map(|v| v.to_f64_lossy().abs()).collect();
    let max = abs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    let data: Vec<f32> = if range <= 0.0 {
        vec![0.0; abs.len()]
    } else {
        abs.iter().map(|&v| ((v - min) / range) as f32).collect()
    };
    Tensor::from_vec(raw.shape(), data).expect("shape preserved")
}

/// Saliency of `class_index` for one preprocessed image: the gradient of the
/// linear (softmax-removed) output neuron with respect to the input, absolute
/// value per pixel, min-max normalized to `[0, 1]`.
pub fn saliency<T: Scalar>(
    model: &Model<T>,
    image: &Tensor<T>,
    class_index: usize,
) -> Result<Heatmap> {
    let grad = model.input_gradient(image, class_index)?;
    let (h, w) = (grad.shape()[0], grad.shape()[1]);
    let map = normalize_abs(&grad).reshape(&[h, w])?;
    Ok(Heatmap {
        map,
        class_index,
        source: String::new(),
    })
}

/// Per-pixel mean and sample standard deviation over member maps.
/// With a single map the deviation is identically zero.
pub fn aggregate_maps(maps: &[&Tensor<f32>]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Config("aggregate_maps needs at least one map".into()))?;
    for m in maps {
        if m.shape() != first.shape() {
            return Err(Error::shape(format!(
                "heatmap shapes disagree: {:?} vs {:?}",
                m.shape(),
                first.shape()
            )));
        }
    }
    let n = maps.len();
    let len = first.len();
    let mut mean = vec![0.0f32; len];
    let mut std = vec![0.0f32; len];
    for i in 0..len {
        let sum: f64 = maps.iter().map(|m| m.data()[i] as f64).sum();
        let mu = sum / n as f64;
        mean[i] = mu as f32;
        if n > 1 {
            let var: f64 = maps
                .iter()
                .map(|m| (m.data()[i] as f64 - mu).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            std[i] = var.sqrt() as f32;
        }
    }
    Ok((
        Tensor::from_vec(first.shape(), mean)?,
        Tensor::from_vec(first.shape(), std)?,
    ))
}

/// Heatmaps of one class across ensemble members.
#[derive(Clone, Debug)]
pub struct ClassHeatmaps {
    pub members: Vec<Heatmap>,
    pub mean: Tensor<f32>,
    pub std: Tensor<f32>,
}

/// Member, mean, and uncertainty maps for both classes, plus the ensemble's
/// predicted probabilities for the image.
#[derive(Clone, Debug)]
pub struct HeatmapBundle {
    pub per_class: Vec<ClassHeatmaps>,
    pub prediction: Prediction,
}

/// Computes both classes' member heatmaps with their per-pixel mean and
/// sample standard deviation, and attaches the ensemble prediction.
pub fn ensemble_heatmaps(ensemble: &Ensemble, image: &Tensor<f32>) -> Result<HeatmapBundle> {
    let batch = Tensor::from_vec(
        &[1, image.shape()[0], image.shape()[1], image.shape()[2]],
        image.data().to_vec(),
    )?;
    let per_member: Vec<Vec<Prediction>> = ensemble
        .members
        .iter()
        .map(|m| predict(m, &batch))
        .collect::<Result<_>>()?;
    let prediction = average_predictions(&per_member)[0];

    let mut per_class = Vec::with_capacity(2);
    for class_index in 0..2 {
        let members: Vec<Heatmap> = ensemble
            .members
            .par_iter()
            .enumerate()
            .map(|(i, model)| {
                let mut hm = saliency(model, image, class_index).map_err(|e| Error::Member {
                    member: i,
                    source: Box::new(e),
                })?;
                hm.source = format!("member_{}", i + 1);
                Ok(hm)
            })
            .collect::<Result<_>>()?;
        let maps: Vec<&Tensor<f32>> = members.iter().map(|h| &h.map).collect();
        let (mean, std) = aggregate_maps(&maps)?;
        per_class.push(ClassHeatmaps { members, mean, std });
    }

    Ok(HeatmapBundle {
        per_class,
        prediction,
    })
}

/// Probabilities sidecar written next to the explanation PNGs.
#[derive(Serialize)]
struct Sidecar {
    p_non_consolidation: f64,
    p_consolidation: f64,
}

/// Paths of the artifact set written by [`explain`].
#[derive(Clone, Debug)]
pub struct ExplanationArtifacts {
    pub original: PathBuf,
    pub mean_overlays: [PathBuf; 2],
    pub std_overlays: [PathBuf; 2],
    pub sidecar: PathBuf,
    pub prediction: Prediction,
}

const CLASS_NAMES: [&str; 2] = ["non_consolidation", "consolidation"];
/// Overlay transparency: half X-ray, half heatmap.
pub const OVERLAY_ALPHA: f32 = 0.5;

/// Runs the full explanation pipeline for one X-ray: loads and preprocesses
/// the image, computes the ensemble heatmap bundle, and writes the artifact
/// set (original plus per-class mean and std overlays, with a JSON sidecar
/// carrying the predicted probabilities) into `out_dir`.
pub fn explain(
    ensemble: &Ensemble,
    image_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    upscale: usize,
) -> Result<ExplanationArtifacts> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let raw = load_grayscale(image_path.as_ref())?;
    let resized = resize_bilinear(&raw, INPUT_SIZE, INPUT_SIZE)?;
    let input = normalize_mean(&resized)?;
    let bundle = ensemble_heatmaps(ensemble, &input)?;

    let write_rgb = |name: &str, rgb: &[u8]| -> Result<PathBuf> {
        let path = out_dir.join(name);
        let scaled = upscale_rgb(rgb, INPUT_SIZE, INPUT_SIZE, upscale.max(1));
        let side = INPUT_SIZE * upscale.max(1);
        crate::imaging::save_rgb_png(side, side, &scaled, &path)?;
        Ok(path)
    };

    let original = out_dir.join("original.png");
    let gray_scaled = upscale_gray(&resized, upscale.max(1));
    crate::imaging::save_grayscale_png(&gray_scaled, &original)?;

    let jet = Colormap::jet();
    let mut mean_overlays = Vec::with_capacity(2);
    let mut std_overlays = Vec::with_capacity(2);
    for class_index in 0..2 {
        let class = &bundle.per_class[class_index];
        let mean_rgb = render_overlay(&resized, &class.mean, jet, OVERLAY_ALPHA)?;
        mean_overlays.push(write_rgb(&format!("mean_{}.png", CLASS_NAMES[class_index]), &mean_rgb)?);
        let std_rgb = render_overlay(&resized, &class.std, jet, OVERLAY_ALPHA)?;
        std_overlays.push(write_rgb(&format!("std_{}.png", CLASS_NAMES[class_index]), &std_rgb)?);
    }

    let sidecar_path = out_dir.join("explanation.json");
    let sidecar = Sidecar {
        p_non_consolidation: bundle.prediction.probs[0],
        p_consolidation: bundle.prediction.probs[1],
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Config(format!("serialize sidecar: {e}")))?;
    std::fs::write(&sidecar_path, json).map_err(|e| Error::io(&sidecar_path, e))?;

    Ok(ExplanationArtifacts {
        original,
        mean_overlays: [mean_overlays.remove(0), mean_overlays.remove(0)],
        std_overlays: [std_overlays.remove(0), std_overlays.remove(0)],
        sidecar: sidecar_path,
        prediction: bundle.prediction,
    })
}

fn upscale_gray(img: &GrayImage, factor: usize) -> GrayImage {
    if factor <= 1 {
        return img.clone();
    }
    let mut pixels = Vec::with_capacity(img.pixels.len() * factor * factor);
    for y in 0..img.height * factor {
        for x in 0..img.width * factor {
            pixels.push(img.get(y / factor, x / factor));
        }
    }
    GrayImage {
        height: img.height * factor,
        width: img.width * factor,
        pixels,
    }
}
