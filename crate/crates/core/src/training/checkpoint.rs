//! Model checkpoint container.
//!
//! Layout (stable across versions):
//!
//! ```text
//! bytes 0..4    magic  b"CXRK"
//! bytes 4..8    format version, u32 little-endian (currently 1)
//! bytes 8..12   header length N, u32 little-endian
//! bytes 12..12+N  header: UTF-8 JSON (CheckpointMeta + parameter shapes)
//! remainder     parameter tensors in layer order, f32 little-endian,
//!               row-major, concatenated
//! ```
//!
//! Writes go to a temporary sibling file first and are renamed into place,
//! so a crash never leaves a truncated checkpoint under the final name.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Model;
use crate::tensor::Tensor;
use crate::training::{ArchitectureSpec, TrainingHistory, INPUT_SHAPE};

const MAGIC: &[u8; 4] = b"CXRK";
const VERSION: u32 = 1;

/// Everything needed to rebuild and audit a trained model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub arch: ArchitectureSpec,
    pub seed: u64,
    pub trained_epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl CheckpointMeta {
    pub fn from_history(arch: ArchitectureSpec, seed: u64, history: &TrainingHistory) -> Self {
        CheckpointMeta {
            arch,
            seed,
            trained_epochs: history.epochs(),
            best_epoch: history.best_epoch,
            best_val_loss: history
                .val_loss
                .get(history.best_epoch)
                .copied()
                .unwrap_or(f64::NAN),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: CheckpointMeta,
    param_shapes: Vec<Vec<usize>>,
}

fn checkpoint_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.into(),
        message: message.into(),
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model<f32>, meta: &CheckpointMeta) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        meta: meta.clone(),
        param_shapes: model.params().iter().map(|p| p.shape().to_vec()).collect(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| checkpoint_error(path, e.to_string()))?;

    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(MAGIC).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&VERSION.to_le_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&(header_json.len() as u32).to_le_bytes())
            .map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&header_json).map_err(|e| Error::io(&tmp, e))?;
        for p in model.params() {
            let mut bytes = Vec::with_capacity(p.len() * 4);
            for &v in p.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        }
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model<f32>, CheckpointMeta)> {
    let path = path.as_ref();
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(checkpoint_error(path, "bad magic; not a checkpoint file"));
    }
    let mut word = [0u8; 4];
    f.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(checkpoint_error(path, format!("unsupported version {version}")));
    }
    f.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
    let header_len = u32::from_le_bytes(word) as usize;
    let mut header_bytes = vec![0u8; header_len];
    f.read_exact(&mut header_bytes).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| checkpoint_error(path, format!("bad header: {e}")))?;
    header.meta.arch.validate()?;

    let mut params = Vec::with_capacity(header.param_shapes.len());
    for shape in &header.param_shapes {
        let len: usize = shape.iter().product();
        let mut bytes = vec![0u8; len * 4];
        f.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        params.push(Tensor::from_vec(shape, data)?);
    }
    let mut trailing = [0u8; 1];
    if f.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(checkpoint_error(path, "trailing bytes after parameters"));
    }

    let model = Model::from_parts(&INPUT_SHAPE, header.meta.arch.layer_stack(), params)
        .map_err(|e| checkpoint_error(path, e.to_string()))?;
    Ok((model, header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::trainer::build_model;

    #[test]
    fn checkpoint_round_trips_bit_exact() {
        let arch = ArchitectureSpec::ALL[3];
        let model = build_model(&arch, 123).unwrap();
        let meta = CheckpointMeta {
            arch,
            seed: 123,
            trained_epochs: 4,
            best_epoch: 2,
            best_val_loss: 0.5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &model, &meta).unwrap();
        let (back, back_meta) = load_checkpoint(&path).unwrap();
        assert_eq!(back_meta.seed, 123);
        assert_eq!(back_meta.best_epoch, 2);
        for (a, b) in model.params().iter().zip(back.params()) {
            assert_eq!(a.data(), b.data());
            assert_eq!(a.shape(), b.shape());
        }
        // no stray temp file left behind
        assert!(!dir.path().join("model.ckpt.tmp").exists());
    }

    #[test]
    fn garbage_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
