//! Image loading, preprocessing, and augmented batch iteration.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::imaging::{augment, normalize_mean, resize_bilinear, AugmentationConfig, GrayImage};
use crate::rng::seeded_rng;
use crate::tensor::Tensor;

pub const INPUT_SIZE: usize = 150;
pub const DEFAULT_BATCH_SIZE: usize = 32;

/// Loads and resizes manifest images on demand, caching the resized
/// grayscale result so ensemble members sharing a dataset decode each file
/// once. Thread-safe; values are immutable once cached.
pub struct ImageStore {
    manifest: DatasetManifest,
    target: (usize, usize),
    cache: Mutex<HashMap<usize, Arc<GrayImage>>>,
}

impl ImageStore {
    pub fn new(manifest: DatasetManifest) -> Self {
        ImageStore {
            manifest,
            target: (INPUT_SIZE, INPUT_SIZE),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn path(&self, index: usize) -> &PathBuf {
        &self.manifest.entries()[index].path
    }

    /// Resized (but not normalized) grayscale image for a manifest index.
    pub fn resized(&self, index: usize) -> Result<Arc<GrayImage>> {
        if let Some(img) = self.cache.lock().unwrap().get(&index) {
            return Ok(Arc::clone(img));
        }
        let entry = &self.manifest.entries()[index];
        let raw = crate::imaging::load_grayscale(&entry.path)?;
        let resized = Arc::new(resize_bilinear(&raw, self.target.0, self.target.1)?);
        let mut cache = self.cache.lock().unwrap();
        Ok(Arc::clone(cache.entry(index).or_insert(resized)))
    }
}

/// A preprocessed batch: images `[b, H, W, 1]` and one-hot labels `[b, 2]`.
#[derive(Debug)]
pub struct Batch {
    pub images: Tensor<f32>,
    pub labels: Tensor<f32>,
    pub indices: Vec<usize>,
}

fn assemble_batch(store: &ImageStore, indices: &[usize], augmented: Option<(&AugmentationConfig, &mut ChaCha8Rng)>) -> Result<Batch> {
    let (h, w) = (INPUT_SIZE, INPUT_SIZE);
    let mut images = Vec::with_capacity(indices.len() * h * w);
    let mut labels = Vec::with_capacity(indices.len() * 2);
    let mut aug = augmented;
    for &idx in indices {
        let resized = store.resized(idx)?;
        let prepared = match aug.as_mut() {
            Some((cfg, rng)) => augment(&resized, cfg, *rng),
            None => (*resized).clone(),
        };
        let tensor = normalize_mean(&prepared)?;
        images.extend_from_slice(tensor.data());
        let label = store.manifest().entries()[idx].label.index();
        labels.extend_from_slice(if label == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] });
    }
    Ok(Batch {
        images: Tensor::from_vec(&[indices.len(), h, w, 1], images)?,
        labels: Tensor::from_vec(&[indices.len(), 2], labels)?,
        indices: indices.to_vec(),
    })
}

/// Seeded stream of augmented training batches. Each epoch reshuffles the
/// index order and draws fresh augmentations; validation/test data never
/// passes through here.
pub struct BatchStream {
    store: Arc<ImageStore>,
    indices: Vec<usize>,
    augmentation: Option<AugmentationConfig>,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl BatchStream {
    pub fn new(
        store: Arc<ImageStore>,
        indices: Vec<usize>,
        augmentation: Option<AugmentationConfig>,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Config("batch stream needs a nonempty index list".into()));
        }
        if let Some(cfg) = &augmentation {
            cfg.validate()?;
        }
        Ok(BatchStream {
            store,
            indices,
            augmentation,
            batch_size: batch_size.max(1),
            rng: seeded_rng(seed, &[0xBA7C]),
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.indices.len().div_ceil(self.batch_size)
    }

    /// Runs one epoch: shuffles, then yields batches to `consume` in order.
    /// The final short batch is included.
    pub fn for_each_batch(
        &mut self,
        mut consume: impl FnMut(usize, Batch) -> Result<()>,
    ) -> Result<()> {
        let mut order = self.indices.clone();
        order.shuffle(&mut self.rng);
        for (step, chunk) in order.chunks(self.batch_size).enumerate() {
            let batch = assemble_batch(
                &self.store,
                chunk,
                self.augmentation.as_ref().map(|cfg| (cfg, &mut self.rng)),
            )?;
            consume(step, batch)?;
        }
        Ok(())
    }

    /// Collects one full epoch eagerly (convenient for small datasets).
    pub fn epoch_batches(&mut self) -> Result<Vec<Batch>> {
        let mut out = Vec::with_capacity(self.batches_per_epoch());
        self.for_each_batch(|_, b| {
            out.push(b);
            Ok(())
        })?;
        Ok(out)
    }
}

/// Preprocessed evaluation set (validation or test): no shuffling, no
/// augmentation, deterministic order.
pub struct EvalSet {
    pub batches: Vec<Batch>,
    pub label_indices: Vec<usize>,
}

impl EvalSet {
    pub fn build(store: &ImageStore, indices: &[usize], batch_size: usize) -> Result<Self> {
        let mut batches = Vec::new();
        for chunk in indices.chunks(batch_size.max(1)) {
            batches.push(assemble_batch(store, chunk, None)?);
        }
        let label_indices = indices
            .iter()
            .map(|&i| store.manifest().entries()[i].label.index())
            .collect();
        Ok(EvalSet {
            batches,
            label_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.label_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label_indices.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::{DatasetManifest, Label, ManifestEntry};
    use crate::imaging::save_grayscale_png;

    fn synthetic_store(n: usize, dir: &std::path::Path) -> Arc<ImageStore> {
        let mut entries = Vec::new();
        for i in 0..n {
            let path = dir.join(format!("img{i}.png"));
            let value = 20.0 + (i % 200) as f32;
            save_grayscale_png(&GrayImage::constant(8, 8, value), &path).unwrap();
            entries.push(ManifestEntry {
                path,
                label: if i % 2 == 0 { Label::NonConsolidation } else { Label::Consolidation },
            });
        }
        Arc::new(ImageStore::new(DatasetManifest::new(entries).unwrap()))
    }

    #[test]
    fn batch_sizes_include_final_short_batch() {
        let dir = tempfile::tempdir().unwrap();
        let store = synthetic_store(70, dir.path());
        let mut stream = BatchStream::new(store, (0..70).collect(), None, 32, 1).unwrap();
        let sizes: Vec<usize> = stream
            .epoch_batches()
            .unwrap()
            .iter()
            .map(|b| b.indices.len())
            .collect();
        assert_eq!(sizes, vec![32, 32, 6]);
    }

    #[test]
    fn epoch_visits_every_index_exactly_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = synthetic_store(23, dir.path());
        let mut stream = BatchStream::new(store, (0..23).collect(), Some(AugmentationConfig::default()), 8, 3).unwrap();
        let mut seen: Vec<usize> = stream
            .epoch_batches()
            .unwrap()
            .iter()
            .flat_map(|b| b.indices.clone())
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_gives_identical_streams() {
        let dir = tempfile::tempdir().unwrap();
        let store = synthetic_store(20, dir.path());
        let mut s1 = BatchStream::new(Arc::clone(&store), (0..20).collect(), None, 8, 5).unwrap();
        let mut s2 = BatchStream::new(store, (0..20).collect(), None, 8, 5).unwrap();
        let e1 = s1.epoch_batches().unwrap();
        let e2 = s2.epoch_batches().unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert_eq!(a.indices, b.indices);
            assert_eq!(a.images.data(), b.images.data());
            assert_eq!(a.labels.data(), b.labels.data());
        }
    }

    #[test]
    fn labels_are_one_hot() {
        let dir = tempfile::tempdir().unwrap();
        let store = synthetic_store(6, dir.path());
        let eval = EvalSet::build(&store, &[0, 1, 2], 2).unwrap();
        for batch in &eval.batches {
            for row in batch.labels.data().chunks(2) {
                assert_eq!(row.iter().sum::<f32>(), 1.0);
            }
        }
    }

    #[test]
    fn unreadable_image_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            ManifestEntry { path: dir.path().join("missing0.png"), label: Label::NonConsolidation },
            ManifestEntry { path: dir.path().join("missing1.png"), label: Label::Consolidation },
        ];
        let store = Arc::new(ImageStore::new(DatasetManifest::new(entries).unwrap()));
        let mut stream = BatchStream::new(store, vec![0, 1], None, 2, 0).unwrap();
        let err = stream.epoch_batches().unwrap_err().to_string();
        assert!(err.contains("missing"), "error should carry the path: {err}");
    }
}
