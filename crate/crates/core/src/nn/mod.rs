//! Minimal feed-forward network engine: layer primitives, forward/backward
//! passes, cross-entropy loss with L2 regularization, and Adam.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod init;
pub mod model;
pub mod pool;

pub use activation::{relu, relu_backward, softmax};
pub use adam::{AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_backward_accumulate, conv2d_forward, ConvGrads};
pub use dense::{dense_backward, dense_backward_accumulate, dense_forward, DenseGrads};
pub use dropout::{dropout, dropout_backward};
pub use init::{init_weights, Init};
pub use model::{batch_dropout_seeds, Gradients, Model, Trace};
pub use pool::{maxpool2d, maxpool2d_backward};

/// Spatial padding mode for convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Output keeps the input's spatial size (zero padding).
    Same,
    /// No padding; output shrinks by `kernel - 1`.
    Valid,
}

/// One layer of a model stack.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        padding: Padding,
    },
    Relu,
    MaxPool2d {
        window: usize,
        stride: usize,
    },
    Flatten,
    Dropout {
        rate: f64,
    },
    Dense {
        neurons: usize,
    },
    Softmax,
}
