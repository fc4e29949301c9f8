//! A feed-forward stack of layers with explicit parameters, forward traces,
//! and a full backward pass.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::activation::{relu, relu_backward, softmax};
use crate::nn::conv::{conv2d_backward_accumulate, conv2d_forward, conv_output_geometry};
use crate::nn::dense::{dense_backward_accumulate, dense_forward};
use crate::nn::dropout::{dropout, dropout_backward};
use crate::nn::init::{init_weights, Init};
use crate::nn::pool::{maxpool2d, maxpool2d_backward};
use crate::nn::LayerSpec;
use crate::rng::derive_seed;
use crate::tensor::{sc, Scalar, Tensor};

/// Probability floor inside `ln` to keep the loss finite at extreme logits.
const PROB_FLOOR: f64 = 1e-12;

/// Fixed number of gradient-accumulation slots per batch. Chunk boundaries
/// depend only on the batch size, never on the thread count, so batch
/// gradients are bit-identical for any `--jobs` value.
const BATCH_CHUNKS: usize = 8;

/// Indices into `Model::params` owned by one layer.
#[derive(Clone, Copy, Debug)]
struct ParamBinding {
    weights: usize,
    bias: usize,
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    params: Vec<Tensor<T>>,
    bindings: Vec<Option<ParamBinding>>,
    /// Input shape of each layer; last entry is the network output shape.
    shapes: Vec<Vec<usize>>,
    /// Parameter indices of dense kernels that receive the L2 penalty
    /// (dense layers feeding a ReLU).
    l2_params: Vec<usize>,
}

/// Activations captured during a forward pass, enough to run backward.
pub struct Trace<T> {
    inputs: Vec<Tensor<T>>,
    masks: Vec<Option<Tensor<T>>>,
    argmaxes: Vec<Option<Vec<usize>>>,
    /// Output of the last layer before any final softmax.
    pub logits: Tensor<T>,
    /// Network output with the final softmax applied (equals `logits` when
    /// the stack has no softmax head).
    pub probs: Tensor<T>,
}

/// Gradients aligned with [`Model::params`], plus the input-image gradient.
pub struct Gradients<T> {
    pub params: Vec<Tensor<T>>,
    pub input: Tensor<T>,
}

fn validate_layer(spec: &LayerSpec) -> Result<()> {
    match *spec {
        LayerSpec::Conv2d {
            out_channels,
            kernel_h,
            kernel_w,
            ..
        } => {
            if out_channels == 0 || kernel_h == 0 || kernel_w == 0 {
                return Err(Error::Config("conv2d needs at least one kernel of nonzero size".into()));
            }
        }
        LayerSpec::Dropout { rate } => {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("dropout rate {rate} outside [0,1)")));
            }
        }
        LayerSpec::Dense { neurons } => {
            if neurons == 0 {
                return Err(Error::Config("dense layer needs at least one neuron".into()));
            }
        }
        LayerSpec::MaxPool2d { window, stride } => {
            if window == 0 || stride == 0 {
                return Err(Error::Config("maxpool window and stride must be nonzero".into()));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Computes the output shape of `spec` applied to `shape`.
fn infer_shape(spec: &LayerSpec, shape: &[usize]) -> Result<Vec<usize>> {
    match *spec {
        LayerSpec::Conv2d {
            out_channels,
            kernel_h,
            kernel_w,
            padding,
        } => {
            if shape.len() != 3 {
                return Err(Error::shape(format!("conv2d expects [H,W,C] input, got {shape:?}")));
            }
            if kernel_h > shape[0] || kernel_w > shape[1] {
                return Err(Error::shape(format!(
                    "kernel {kernel_h}x{kernel_w} larger than input {}x{}",
                    shape[0], shape[1]
                )));
            }
            let (h, w, _, _) = conv_output_geometry(shape[0], shape[1], kernel_h, kernel_w, padding);
            Ok(vec![h, w, out_channels])
        }
        LayerSpec::MaxPool2d { window, stride } => {
            if shape.len() != 3 || shape[0] < window || shape[1] < window {
                return Err(Error::shape(format!(
                    "maxpool2d window {window} invalid for input {shape:?}"
                )));
            }
            Ok(vec![
                (shape[0] - window) / stride + 1,
                (shape[1] - window) / stride + 1,
                shape[2],
            ])
        }
        LayerSpec::Flatten => Ok(vec![shape.iter().product()]),
        LayerSpec::Dense { neurons } => {
            if shape.len() != 1 {
                return Err(Error::shape(format!("dense expects flattened input, got {shape:?}")));
            }
            Ok(vec![neurons])
        }
        LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(shape.to_vec()),
        LayerSpec::Softmax => {
            if shape.len() != 1 {
                return Err(Error::shape(format!("softmax expects flattened input, got {shape:?}")));
            }
            Ok(shape.to_vec())
        }
    }
}

impl<T: Scalar> Model<T> {
    /// Builds a model with freshly initialized parameters.
    pub fn new<R: Rng>(input_shape: &[usize], layers: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        let mut model = Self::skeleton(input_shape, layers)?;
        let mut params = Vec::new();
        for (i, spec) in model.layers.iter().enumerate() {
            let feeds_relu = matches!(model.layers.get(i + 1), Some(LayerSpec::Relu));
            let init = if feeds_relu { Init::HeUniform } else { Init::GlorotUniform };
            match *spec {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel_h,
                    kernel_w,
                    ..
                } => {
                    let cin = model.shapes[i][2];
                    let fan_in = kernel_h * kernel_w * cin;
                    let fan_out = kernel_h * kernel_w * out_channels;
                    params.push(init_weights(
                        &[kernel_h, kernel_w, cin, out_channels],
                        fan_in,
                        fan_out,
                        init,
                        rng,
                    ));
                    params.push(Tensor::zeros(&[out_channels]));
                }
                LayerSpec::Dense { neurons } => {
                    let n = model.shapes[i][0];
                    params.push(init_weights(&[n, neurons], n, neurons, init, rng));
                    params.push(Tensor::zeros(&[neurons]));
                }
                _ => {}
            }
        }
        model.params = params;
        Ok(model)
    }

    /// Rebuilds a model around existing parameter tensors (e.g. from a
    /// checkpoint), validating every shape against the layer stack.
    pub fn from_parts(
        input_shape: &[usize],
        layers: Vec<LayerSpec>,
        params: Vec<Tensor<T>>,
    ) -> Result<Self> {
        let mut model = Self::skeleton(input_shape, layers)?;
        let expected = model.expected_param_shapes();
        if params.len() != expected.len() {
            return Err(Error::shape(format!(
                "expected {} parameter tensors, got {}",
                expected.len(),
                params.len()
            )));
        }
        for (i, (p, exp)) in params.iter().zip(&expected).enumerate() {
            if p.shape() != &exp[..] {
                return Err(Error::shape(format!(
                    "parameter {i} has shape {:?}, expected {exp:?}",
                    p.shape()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    /// Layer bookkeeping without parameters.
    fn skeleton(input_shape: &[usize], layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        let mut shapes = vec![input_shape.to_vec()];
        let mut bindings = Vec::with_capacity(layers.len());
        let mut l2_params = Vec::new();
        let mut param_count = 0usize;
        for (i, spec) in layers.iter().enumerate() {
            validate_layer(spec)?;
            if matches!(spec, LayerSpec::Softmax) && i + 1 != layers.len() {
                return Err(Error::Config("softmax is only supported as the final layer".into()));
            }
            let out = infer_shape(spec, shapes.last().unwrap())?;
            match spec {
                LayerSpec::Conv2d { .. } => {
                    bindings.push(Some(ParamBinding {
                        weights: param_count,
                        bias: param_count + 1,
                    }));
                    param_count += 2;
                }
                LayerSpec::Dense { .. } => {
                    if matches!(layers.get(i + 1), Some(LayerSpec::Relu)) {
                        l2_params.push(param_count);
                    }
                    bindings.push(Some(ParamBinding {
                        weights: param_count,
                        bias: param_count + 1,
                    }));
                    param_count += 2;
                }
                _ => bindings.push(None),
            }
            shapes.push(out);
        }
        Ok(Model {
            input_shape: input_shape.to_vec(),
            layers,
            params: Vec::new(),
            bindings,
            shapes,
            l2_params,
        })
    }

    fn expected_param_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for (i, spec) in self.layers.iter().enumerate() {
            match *spec {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel_h,
                    kernel_w,
                    ..
                } => {
                    out.push(vec![kernel_h, kernel_w, self.shapes[i][2], out_channels]);
                    out.push(vec![out_channels]);
                }
                LayerSpec::Dense { neurons } => {
                    out.push(vec![self.shapes[i][0], neurons]);
                    out.push(vec![neurons]);
                }
                _ => {}
            }
        }
        out
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    /// Parameter indices carrying the L2 kernel penalty.
    pub fn l2_param_indices(&self) -> &[usize] {
        &self.l2_params
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().unwrap()[0]
    }

    /// Number of flattened features entering the first dense layer, if any.
    pub fn flatten_width(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Flatten))
            .map(|i| self.shapes[i + 1][0])
    }

    /// Forward pass in inference mode: dropout is the identity.
    pub fn forward_infer(&self, input: &Tensor<T>) -> Result<Trace<T>> {
        self.forward::<ChaCha8Rng>(input, None)
    }

    /// Forward pass in training mode with live dropout.
    pub fn forward_train<R: Rng>(&self, input: &Tensor<T>, rng: &mut R) -> Result<Trace<T>> {
        self.forward(input, Some(rng))
    }

    fn forward<R: Rng>(&self, input: &Tensor<T>, mut rng: Option<&mut R>) -> Result<Trace<T>> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::shape(format!(
                "model input shape {:?} does not match expected {:?}",
                input.shape(),
                self.input_shape
            )));
        }
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut masks = vec![None; n];
        let mut argmaxes = vec![None; n];
        let mut current = input.clone();
        let mut logits = None;

        for (i, spec) in self.layers.iter().enumerate() {
            let next = match *spec {
                LayerSpec::Conv2d { padding, .. } => {
                    let b = self.bindings[i].unwrap();
                    conv2d_forward(&current, &self.params[b.weights], &self.params[b.bias], padding)?
                }
                LayerSpec::Relu => relu(&current),
                LayerSpec::MaxPool2d { window, stride } => {
                    let (out, argmax) = maxpool2d(&current, window, stride)?;
                    argmaxes[i] = Some(argmax);
                    out
                }
                LayerSpec::Flatten => current.clone().reshape(&[current.len()])?,
                LayerSpec::Dropout { rate } => match rng.as_deref_mut() {
                    Some(r) => {
                        let (out, mask) = dropout(&current, rate, r, true)?;
                        masks[i] = mask;
                        out
                    }
                    None => current.clone(),
                },
                LayerSpec::Dense { .. } => {
                    let b = self.bindings[i].unwrap();
                    dense_forward(&current, &self.params[b.weights], &self.params[b.bias])?
                }
                LayerSpec::Softmax => {
                    logits = Some(current.clone());
                    softmax(&current)
                }
            };
            inputs.push(current);
            current = next;
        }

        let logits = logits.unwrap_or_else(|| current.clone());
        Ok(Trace {
            inputs,
            masks,
            argmaxes,
            logits,
            probs: current,
        })
    }

    /// Backward pass from a gradient with respect to the logits (the output
    /// of the last layer before any softmax head). The softmax layer itself
    /// is bypassed: training fuses it with the cross-entropy gradient and
    /// saliency replaces it with the identity.
    pub fn backward(&self, trace: &Trace<T>, dlogits: &Tensor<T>) -> Result<Gradients<T>> {
        let mut grads: Vec<Tensor<T>> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let input = self.backward_accumulate(trace, dlogits, &mut grads)?;
        Ok(Gradients {
            params: grads,
            input,
        })
    }

    /// Backward pass that accumulates parameter gradients into `grads`
    /// (aligned with [`Model::params`]) and returns the input gradient.
    pub fn backward_accumulate(
        &self,
        trace: &Trace<T>,
        dlogits: &Tensor<T>,
        grads: &mut [Tensor<T>],
    ) -> Result<Tensor<T>> {
        if grads.len() != self.params.len() {
            return Err(Error::shape(format!(
                "gradient accumulator holds {} tensors, model has {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        let mut upstream = dlogits.clone();

        for (i, spec) in self.layers.iter().enumerate().rev() {
            match *spec {
                LayerSpec::Softmax => continue,
                LayerSpec::Conv2d { padding, .. } => {
                    let b = self.bindings[i].unwrap();
                    let (gk, rest) = grads[b.weights..].split_first_mut().unwrap();
                    let gb = &mut rest[0];
                    upstream = conv2d_backward_accumulate(
                        &upstream,
                        &trace.inputs[i],
                        &self.params[b.weights],
                        padding,
                        gk,
                        gb,
                    )?;
                }
                LayerSpec::Relu => {
                    upstream = relu_backward(&upstream, &trace.inputs[i])?;
                }
                LayerSpec::MaxPool2d { .. } => {
                    let argmax = trace.argmaxes[i].as_ref().expect("argmax recorded in forward");
                    upstream = maxpool2d_backward(&upstream, trace.inputs[i].shape(), argmax)?;
                }
                LayerSpec::Flatten => {
                    upstream = upstream.reshape(trace.inputs[i].shape())?;
                }
                LayerSpec::Dropout { .. } => {
                    if let Some(mask) = &trace.masks[i] {
                        upstream = dropout_backward(&upstream, mask)?;
                    }
                }
                LayerSpec::Dense { .. } => {
                    let b = self.bindings[i].unwrap();
                    let (gw, rest) = grads[b.weights..].split_first_mut().unwrap();
                    let gb = &mut rest[0];
                    upstream = dense_backward_accumulate(
                        &upstream,
                        &trace.inputs[i],
                        &self.params[b.weights],
                        gw,
                        gb,
                    )?;
                }
            }
        }
        Ok(upstream)
    }

    /// Class probabilities for a single image (inference mode).
    pub fn predict_one(&self, input: &Tensor<T>) -> Result<Vec<f64>> {
        let trace = self.forward_infer(input)?;
        Ok(trace.probs.data().iter().map(|v| v.to_f64_lossy()).collect())
    }

    /// Gradient of output neuron `class_index` with respect to the input
    /// image, with the softmax head replaced by the identity and dropout off.
    pub fn input_gradient(&self, input: &Tensor<T>, class_index: usize) -> Result<Tensor<T>> {
        if class_index >= self.output_dim() {
            return Err(Error::Config(format!(
                "class index {class_index} out of range for {} outputs",
                self.output_dim()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                context: "model parameters".into(),
            });
        }
        let trace = self.forward_infer(input)?;
        let mut dlogits = Tensor::zeros(trace.logits.shape());
        dlogits.data_mut()[class_index] = T::one();
        Ok(self.backward(&trace, &dlogits)?.input)
    }

    /// Mean cross-entropy over the batch plus `l2_strength * sum(W_fc^2)`,
    /// with gradients over all parameters.
    ///
    /// `images` is `[b, H, W, C]`, `labels` is one-hot `[b, classes]`.
    /// `dropout_seeds` enables training-mode dropout with one RNG per sample;
    /// `None` evaluates the loss in inference mode.
    pub fn loss_and_grad(
        &self,
        images: &Tensor<T>,
        labels: &Tensor<T>,
        l2_strength: f64,
        dropout_seeds: Option<&[u64]>,
    ) -> Result<(f64, Vec<Tensor<T>>)> {
        let b = self.check_batch(images, labels)?;
        if let Some(seeds) = dropout_seeds {
            if seeds.len() != b {
                return Err(Error::Config(format!(
                    "got {} dropout seeds for a batch of {b}",
                    seeds.len()
                )));
            }
        }
        let classes = self.output_dim();
        let inv_b: T = sc(1.0 / b as f64);

        let chunk_len = b.div_ceil(BATCH_CHUNKS);
        let ranges: Vec<(usize, usize)> = (0..b)
            .step_by(chunk_len)
            .map(|s| (s, (s + chunk_len).min(b)))
            .collect();

        let partials: Vec<Result<(T, Vec<Tensor<T>>)>> = ranges
            .par_iter()
            .map(|&(start, end)| {
                let mut loss = T::zero();
                let mut grads: Vec<Tensor<T>> =
                    self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
                for idx in start..end {
                    let image = self.extract_sample(images, idx)?;
                    let trace = match dropout_seeds {
                        Some(seeds) => {
                            let mut rng = ChaCha8Rng::seed_from_u64(seeds[idx]);
                            self.forward_train(&image, &mut rng)?
                        }
                        None => self.forward_infer(&image)?,
                    };
                    let probs = softmax(&trace.logits);
                    let target = &labels.data()[idx * classes..][..classes];
                    let mut dlogits = Tensor::zeros(&[classes]);
                    for c in 0..classes {
                        let p = probs.data()[c];
                        let y = target[c];
                        if y > T::zero() {
                            loss = loss - y * p.max(sc(PROB_FLOOR)).ln();
                        }
                        dlogits.data_mut()[c] = (p - y) * inv_b;
                    }
                    self.backward_accumulate(&trace, &dlogits, &mut grads)?;
                }
                Ok((loss, grads))
            })
            .collect();

        let mut total_loss = T::zero();
        let mut grads: Vec<Tensor<T>> =
            self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        for partial in partials {
            let (loss, part) = partial?;
            total_loss += loss;
            for (acc, g) in grads.iter_mut().zip(&part) {
                acc.add_assign(g);
            }
        }
        let mut loss = total_loss.to_f64_lossy() / b as f64;

        if l2_strength != 0.0 {
            let lambda: T = sc(l2_strength);
            let two = sc::<T>(2.0);
            for &pi in &self.l2_params {
                let w = &self.params[pi];
                let penalty = w.data().iter().fold(T::zero(), |a, &v| a + v * v);
                loss += l2_strength * penalty.to_f64_lossy();
                let gw = grads[pi].data_mut();
                for (g, &v) in gw.iter_mut().zip(w.data()) {
                    *g += two * lambda * v;
                }
            }
        }

        Ok((loss, grads))
    }

    fn check_batch(&self, images: &Tensor<T>, labels: &Tensor<T>) -> Result<usize> {
        let ishape = images.shape();
        if ishape.len() != self.input_shape.len() + 1 || ishape[1..] != self.input_shape[..] {
            return Err(Error::shape(format!(
                "batch shape {ishape:?} does not match input shape {:?}",
                self.input_shape
            )));
        }
        let b = ishape[0];
        if labels.shape() != [b, self.output_dim()] {
            return Err(Error::shape(format!(
                "labels shape {:?} does not match batch of {b} over {} classes",
                labels.shape(),
                self.output_dim()
            )));
        }
        Ok(b)
    }

    /// Copies sample `idx` out of a `[b, ...]` batch tensor.
    pub fn extract_sample(&self, images: &Tensor<T>, idx: usize) -> Result<Tensor<T>> {
        let sample_len: usize = self.input_shape.iter().product();
        let data = images.data()[idx * sample_len..][..sample_len].to_vec();
        Tensor::from_vec(&self.input_shape, data)
    }
}

/// Per-sample dropout seeds for one batch, derived from the training seed and
/// the batch position so any sample's mask stream is replayable.
pub fn batch_dropout_seeds(train_seed: u64, epoch: usize, step: usize, batch: usize) -> Vec<u64> {
    (0..batch)
        .map(|i| derive_seed(train_seed, &[0xD20, epoch as u64, step as u64, i as u64]))
        .collect()
}
