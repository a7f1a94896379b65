use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Layer, LayerGrad, NnError, Result, Tensor};
use crate::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// Ordered layer stack. Immutable during inference (forward passes take
/// `&self` and are safe to share across threads); training mutates
/// parameters through [`crate::nn::Optimizer`] only.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    mode: Mode,
}

/// Everything `backward` needs from a forward pass: per-layer activations
/// (index 0 is the input) and the dropout masks that were drawn.
pub struct ForwardTrace {
    pub activations: Vec<Tensor>,
    dropout_masks: Vec<Option<Vec<f32>>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("trace has activations")
    }

    /// Dropout mask drawn for the given layer, if any. Exposed so external
    /// reference checks can replay the exact same stochastic pass.
    pub fn dropout_mask(&self, layer: usize) -> Option<&[f32]> {
        self.dropout_masks[layer].as_deref()
    }
}

/// Gradients from one backward pass: one entry per layer (None for
/// parameterless layers) plus the gradient with respect to the input.
pub struct Gradients {
    pub layers: Vec<Option<LayerGrad>>,
    pub input: Tensor,
}

impl Gradients {
    /// Parameter gradients flattened in network order (weight, bias per
    /// parameterized layer); aligns with [`Network::params`].
    pub fn flat(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for g in self.layers.iter().flatten() {
            out.push(&g.weight);
            out.push(&g.bias);
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        debug_assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                a.weight.add_scaled(&b.weight, 1.0);
                a.bias.add_scaled(&b.bias, 1.0);
            }
        }
        self.input.add_scaled(&other.input, 1.0);
    }

    pub fn scale(&mut self, factor: f32) {
        for g in self.layers.iter_mut().flatten() {
            g.weight.scale(factor);
            g.bias.scale(factor);
        }
        self.input.scale(factor);
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Network {
        Network {
            layers,
            mode: Mode::Inference,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.numel()).sum()
    }

    /// Trainable tensors in order (weight, bias per conv/dense layer).
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv3x3 { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                    out.push(weight);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv3x3 { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                    out.push(weight);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    /// Shape-checks the whole stack against an input shape; returns the
    /// output shape of every layer.
    pub fn shapes(&self, input: &[usize]) -> Result<Vec<Vec<usize>>> {
        let mut cur = input.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer
                .output_shape(&cur)
                .ok_or_else(|| NnError::ShapeMismatch {
                    layer: i,
                    expected: layer.expects(),
                    got: cur.clone(),
                })?;
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// Inference pass: dropout is the identity. Returns one activation per
    /// layer; the last is the network output.
    pub fn forward(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        Ok(self.run(input, None)?.activations.split_off(1))
    }

    /// Convenience: inference output only.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let trace = self.run(input, None)?;
        Ok(trace.activations.into_iter().last().expect("nonempty"))
    }

    /// Training pass with dropout active. `nonce` must be unique per sample
    /// within a training run; equal (seed, nonce) pairs reproduce the exact
    /// same masks, which keeps batch-parallel training deterministic.
    pub fn forward_train(&self, input: &Tensor, nonce: u64) -> Result<ForwardTrace> {
        if self.mode != Mode::Training {
            return Err(NnError::WrongMode(self.mode, Mode::Training));
        }
        self.run(input, Some(nonce))
    }

    /// Forward pass keeping the full trace but with inference semantics
    /// (no dropout). This is what input-gradient computations use.
    pub fn forward_trace(&self, input: &Tensor) -> Result<ForwardTrace> {
        self.run(input, None)
    }

    fn run(&self, input: &Tensor, train_nonce: Option<u64>) -> Result<ForwardTrace> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut masks = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = activations.last().expect("nonempty");
            if layer.output_shape(cur.shape()).is_none() {
                return Err(NnError::ShapeMismatch {
                    layer: i,
                    expected: layer.expects(),
                    got: cur.shape().to_vec(),
                });
            }
            let mask = match train_nonce {
                Some(nonce) => layer.dropout_mask(mix_seed(nonce, i as u64), cur.numel()),
                None => None,
            };
            let out = layer.forward(cur, mask.as_deref());
            debug_assert!(out.is_finite(), "non-finite activation after layer {i}");
            activations.push(out);
            masks.push(mask);
        }
        Ok(ForwardTrace {
            activations,
            dropout_masks: masks,
        })
    }

    /// Backpropagates `output_grad` through a trace produced by this
    /// network, yielding parameter gradients and the input gradient.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &Tensor) -> Result<Gradients> {
        if trace.activations.len() != self.layers.len() + 1 {
            return Err(NnError::GradientMismatch {
                expected: self.layers.len() + 1,
                got: trace.activations.len(),
            });
        }
        let out = trace.output();
        if output_grad.shape() != out.shape() {
            return Err(NnError::ShapeMismatch {
                layer: self.layers.len().saturating_sub(1),
                expected: out.shape().to_vec(),
                got: output_grad.shape().to_vec(),
            });
        }
        let mut grad = output_grad.clone();
        let mut layer_grads: Vec<Option<LayerGrad>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.activations[i];
            let output = &trace.activations[i + 1];
            let (din, lg) = layer.backward(input, output, &grad, trace.dropout_masks[i].as_deref());
            debug_assert!(din.is_finite(), "non-finite gradient after layer {i}");
            layer_grads.push(lg);
            grad = din;
        }
        layer_grads.reverse();
        Ok(Gradients {
            layers: layer_grads,
            input: grad,
        })
    }

    /// Zero-valued gradients matching this network's parameter layout.
    pub fn zero_grads(&self, input_shape: &[usize]) -> Gradients {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv3x3 { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                    Some(LayerGrad {
                        weight: Tensor::zeros(weight.shape()),
                        bias: Tensor::zeros(bias.shape()),
                    })
                }
                _ => None,
            })
            .collect();
        Gradients {
            layers,
            input: Tensor::zeros(input_shape),
        }
    }
}

/// Builds a network with seeded He-uniform initialization. Dropout layers
/// receive independent stream keys derived from the same seed.
pub struct NetworkBuilder {
    layers: Vec<Layer>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl NetworkBuilder {
    pub fn new(seed: u64) -> Self {
        NetworkBuilder {
            layers: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn conv3x3(mut self, in_c: usize, out_c: usize) -> Self {
        let layer = Layer::conv3x3(in_c, out_c, &mut self.rng);
        self.layers.push(layer);
        self
    }

    pub fn relu(mut self) -> Self {
        self.layers.push(Layer::Relu);
        self
    }

    pub fn maxpool2x2(mut self) -> Self {
        self.layers.push(Layer::MaxPool2x2);
        self
    }

    pub fn dropout(mut self, rate: f32) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0,1)");
        let seed = mix_seed(self.seed, 0xd0d0 + self.layers.len() as u64);
        self.layers.push(Layer::Dropout { rate, seed });
        self
    }

    pub fn flatten(mut self) -> Self {
        self.layers.push(Layer::Flatten);
        self
    }

    pub fn dense(mut self, in_dim: usize, out_dim: usize) -> Self {
        let layer = Layer::dense(in_dim, out_dim, &mut self.rng);
        self.layers.push(layer);
        self
    }

    pub fn softmax(mut self) -> Self {
        self.layers.push(Layer::Softmax);
        self
    }

    pub fn build(self) -> Network {
        Network::new(self.layers)
    }
}
