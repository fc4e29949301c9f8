//! Model construction from an architecture spec and the train/validate loop.

pub mod checkpoint;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use trainer::{build_model, predict, predict_eval_set, train, Prediction};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Padding};

/// Kernels per convolutional layer.
pub const CONV_KERNELS: usize = 32;
/// Spatial kernel size (square), stride 1, "same" padding.
pub const CONV_KERNEL_SIZE: usize = 3;
/// Dropout rate before the hidden FC layer.
pub const DROPOUT_RATE: f64 = 0.7;
/// L2 strength on the hidden FC kernel.
pub const L2_STRENGTH: f64 = 0.01;
/// Network input: 150x150 grayscale.
pub const INPUT_SHAPE: [usize; 3] = [150, 150, 1];

/// One of the six benchmark architectures: 3 or 4 conv blocks and a hidden
/// FC layer of 64, 128, or 256 neurons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub conv_layers: usize,
    pub fc_neurons: usize,
}

impl ArchitectureSpec {
    /// Arch1..Arch6 in canonical order.
    pub const ALL: [ArchitectureSpec; 6] = [
        ArchitectureSpec { conv_layers: 4, fc_neurons: 64 },
        ArchitectureSpec { conv_layers: 4, fc_neurons: 128 },
        ArchitectureSpec { conv_layers: 4, fc_neurons: 256 },
        ArchitectureSpec { conv_layers: 3, fc_neurons: 64 },
        ArchitectureSpec { conv_layers: 3, fc_neurons: 128 },
        ArchitectureSpec { conv_layers: 3, fc_neurons: 256 },
    ];

    pub fn by_name(name: &str) -> Option<Self> {
        let normalized = name.trim().to_ascii_lowercase();
        let idx: usize = normalized.strip_prefix("arch")?.parse().ok()?;
        (1..=6).contains(&idx).then(|| Self::ALL[idx - 1])
    }

    pub fn name(&self) -> String {
        let idx = Self::ALL.iter().position(|a| a == self).expect("validated spec");
        format!("Arch{}", idx + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if Self::ALL.contains(self) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unsupported architecture: {} conv layers, {} FC neurons",
                self.conv_layers, self.fc_neurons
            )))
        }
    }

    /// The full layer stack:
    /// `[conv(32,3x3,same) + relu + maxpool(2)] x conv_layers -> flatten ->
    /// dropout(0.7) -> dense(fc) + relu -> dense(2) + softmax`.
    pub fn layer_stack(&self) -> Vec<LayerSpec> {
        let mut layers = Vec::new();
        for _ in 0..self.conv_layers {
            layers.push(LayerSpec::Conv2d {
                out_channels: CONV_KERNELS,
                kernel_h: CONV_KERNEL_SIZE,
                kernel_w: CONV_KERNEL_SIZE,
                padding: Padding::Same,
            });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::MaxPool2d { window: 2, stride: 2 });
        }
        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Dropout { rate: DROPOUT_RATE });
        layers.push(LayerSpec::Dense { neurons: self.fc_neurons });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Dense { neurons: 2 });
        layers.push(LayerSpec::Softmax);
        layers
    }
}

/// Knobs for one training run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_strength: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            max_epochs: 150,
            patience: 15,
            batch_size: 32,
            learning_rate: 1e-4,
            l2_strength: L2_STRENGTH,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "max_epochs, patience, and batch_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch record of one training run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Epoch (0-based) whose weights the run returned.
    pub best_epoch: usize,
}

impl TrainingHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }

    /// CSV: `epoch,train_loss,val_loss,val_acc`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss,val_acc")?;
        for i in 0..self.epochs() {
            writeln!(
                w,
                "{},{},{},{}",
                i, self.train_loss[i], self.val_loss[i], self.val_accuracy[i]
            )?;
        }
        Ok(())
    }
}
