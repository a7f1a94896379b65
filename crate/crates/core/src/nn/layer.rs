use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sgemm, Tensor};
use crate::mix_seed;

/// One network layer. Convolutions are 3x3 stride-1 with zero ("same")
/// padding; max-pooling is 2x2 stride-2; dropout uses inverted scaling at
/// train time so inference is the identity.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv3x3 {
        in_c: usize,
        out_c: usize,
        /// Shape `[out_c, in_c, 3, 3]`.
        weight: Tensor,
        /// Shape `[out_c]`.
        bias: Tensor,
    },
    Relu,
    MaxPool2x2,
    Dropout {
        rate: f32,
        /// Stream key; per-sample masks are derived from this and the
        /// caller-supplied nonce, never from shared mutable state.
        seed: u64,
    },
    Flatten,
    Dense {
        in_dim: usize,
        out_dim: usize,
        /// Shape `[out_dim, in_dim]`.
        weight: Tensor,
        /// Shape `[out_dim]`.
        bias: Tensor,
    },
    Softmax,
}

/// Parameter gradients for one layer (conv and dense only).
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weight: Tensor,
    pub bias: Tensor,
}

fn he_uniform(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f32> {
    let limit = (6.0 / fan_in as f32).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl Layer {
    pub fn conv3x3(in_c: usize, out_c: usize, rng: &mut ChaCha8Rng) -> Layer {
        let weight = Tensor::from_vec(
            &[out_c, in_c, 3, 3],
            he_uniform(rng, in_c * 9, out_c * in_c * 9),
        );
        Layer::Conv3x3 {
            in_c,
            out_c,
            weight,
            bias: Tensor::zeros(&[out_c]),
        }
    }

    pub fn dense(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Layer {
        let weight = Tensor::from_vec(&[out_dim, in_dim], he_uniform(rng, in_dim, out_dim * in_dim));
        Layer::Dense {
            in_dim,
            out_dim,
            weight,
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    /// Output shape for a given input shape, or `None` if they do not compose.
    pub fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match self {
            Layer::Conv3x3 { in_c, out_c, .. } => match input {
                [c, h, w] if c == in_c && *h >= 1 && *w >= 1 => Some(vec![*out_c, *h, *w]),
                _ => None,
            },
            Layer::Relu | Layer::Dropout { .. } => Some(input.to_vec()),
            Layer::MaxPool2x2 => match input {
                [c, h, w] if *h >= 2 && *w >= 2 => Some(vec![*c, h / 2, w / 2]),
                _ => None,
            },
            Layer::Flatten => Some(vec![input.iter().product()]),
            Layer::Dense { in_dim, out_dim, .. } => match input {
                [d] if d == in_dim => Some(vec![*out_dim]),
                _ => None,
            },
            Layer::Softmax => match input {
                [d] => Some(vec![*d]),
                _ => None,
            },
        }
    }

    /// Expected input shape for error messages; empty when any shape works.
    pub(crate) fn expects(&self) -> Vec<usize> {
        match self {
            Layer::Conv3x3 { in_c, .. } => vec![*in_c, 0, 0],
            Layer::Dense { in_dim, .. } => vec![*in_dim],
            _ => vec![],
        }
    }

    /// Inverted-dropout mask for one training pass, or `None` for layers
    /// without stochastic state. Fully determined by (layer seed, nonce).
    pub(crate) fn dropout_mask(&self, nonce: u64, numel: usize) -> Option<Vec<f32>> {
        match self {
            Layer::Dropout { rate, seed } if *rate > 0.0 => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(*seed, nonce));
                let keep = 1.0 / (1.0 - rate);
                Some(
                    (0..numel)
                        .map(|_| if rng.gen::<f32>() < *rate { 0.0 } else { keep })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Applies the layer. `mask` must be the mask from [`Layer::dropout_mask`]
    /// for training passes and `None` for inference (dropout = identity).
    /// Input shape must already be validated via [`Layer::output_shape`].
    pub(crate) fn forward(&self, input: &Tensor, mask: Option<&[f32]>) -> Tensor {
        match self {
            Layer::Conv3x3 {
                in_c,
                out_c,
                weight,
                bias,
            } => {
                let (h, w) = (input.shape()[1], input.shape()[2]);
                let patches = im2col(input.data(), *in_c, h, w);
                let mut out = vec![0.0f32; out_c * h * w];
                sgemm(*out_c, in_c * 9, h * w, weight.data(), false, &patches, false, 0.0, &mut out);
                for oc in 0..*out_c {
                    let b = bias.data()[oc];
                    for v in &mut out[oc * h * w..(oc + 1) * h * w] {
                        *v += b;
                    }
                }
                Tensor::from_vec(&[*out_c, h, w], out)
            }
            Layer::Relu => Tensor::from_vec(
                input.shape(),
                input.data().iter().map(|&v| v.max(0.0)).collect(),
            ),
            Layer::MaxPool2x2 => {
                let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
                let (oh, ow) = (h / 2, w / 2);
                let mut out = vec![0.0f32; c * oh * ow];
                let data = input.data();
                for ch in 0..c {
                    for y in 0..oh {
                        for x in 0..ow {
                            let base = ch * h * w + 2 * y * w + 2 * x;
                            let m = data[base]
                                .max(data[base + 1])
                                .max(data[base + w])
                                .max(data[base + w + 1]);
                            out[ch * oh * ow + y * ow + x] = m;
                        }
                    }
                }
                Tensor::from_vec(&[c, oh, ow], out)
            }
            Layer::Dropout { .. } => match mask {
                Some(m) => Tensor::from_vec(
                    input.shape(),
                    input.data().iter().zip(m).map(|(&v, &k)| v * k).collect(),
                ),
                None => input.clone(),
            },
            Layer::Flatten => input.reshaped(&[input.numel()]),
            Layer::Dense {
                in_dim,
                out_dim,
                weight,
                bias,
            } => {
                let mut out = bias.data().to_vec();
                sgemm(*out_dim, *in_dim, 1, weight.data(), false, input.data(), false, 1.0, &mut out);
                Tensor::from_vec(&[*out_dim], out)
            }
            Layer::Softmax => {
                let max = input.data().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
                let exp: Vec<f32> = input.data().iter().map(|&v| (v - max).exp()).collect();
                let sum: f32 = exp.iter().sum();
                Tensor::from_vec(input.shape(), exp.iter().map(|&e| e / sum).collect())
            }
        }
    }

    /// Backpropagates `grad` (d loss / d output) through the layer.
    /// Returns the input gradient and, for parameterized layers, the
    /// parameter gradients.
    pub(crate) fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad: &Tensor,
        mask: Option<&[f32]>,
    ) -> (Tensor, Option<LayerGrad>) {
        match self {
            Layer::Conv3x3 {
                in_c,
                out_c,
                weight,
                ..
            } => {
                let (h, w) = (input.shape()[1], input.shape()[2]);
                let hw = h * w;
                let patches = im2col(input.data(), *in_c, h, w);

                let mut db = vec![0.0f32; *out_c];
                for oc in 0..*out_c {
                    db[oc] = grad.data()[oc * hw..(oc + 1) * hw].iter().sum();
                }

                // dW = grad (out_c x hw) @ patches^T (hw x in_c*9)
                let mut dw = vec![0.0f32; out_c * in_c * 9];
                sgemm(*out_c, hw, in_c * 9, grad.data(), false, &patches, true, 0.0, &mut dw);

                // dPatches = W^T (in_c*9 x out_c) @ grad (out_c x hw)
                let mut dpatches = vec![0.0f32; in_c * 9 * hw];
                sgemm(in_c * 9, *out_c, hw, weight.data(), true, grad.data(), false, 0.0, &mut dpatches);
                let dinput = col2im(&dpatches, *in_c, h, w);

                (
                    Tensor::from_vec(&[*in_c, h, w], dinput),
                    Some(LayerGrad {
                        weight: Tensor::from_vec(&[*out_c, *in_c, 3, 3], dw),
                        bias: Tensor::from_vec(&[*out_c], db),
                    }),
                )
            }
            Layer::Relu => (
                Tensor::from_vec(
                    input.shape(),
                    input
                        .data()
                        .iter()
                        .zip(grad.data())
                        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                        .collect(),
                ),
                None,
            ),
            Layer::MaxPool2x2 => {
                let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
                let (oh, ow) = (h / 2, w / 2);
                let mut dinput = vec![0.0f32; c * h * w];
                let data = input.data();
                for ch in 0..c {
                    for y in 0..oh {
                        for x in 0..ow {
                            let base = ch * h * w + 2 * y * w + 2 * x;
                            // First maximum in scan order wins, matching forward.
                            let candidates = [base, base + 1, base + w, base + w + 1];
                            let mut best = candidates[0];
                            for &i in &candidates[1..] {
                                if data[i] > data[best] {
                                    best = i;
                                }
                            }
                            dinput[best] += grad.data()[ch * oh * ow + y * ow + x];
                        }
                    }
                }
                (Tensor::from_vec(&[c, h, w], dinput), None)
            }
            Layer::Dropout { .. } => match mask {
                Some(m) => (
                    Tensor::from_vec(
                        input.shape(),
                        grad.data().iter().zip(m).map(|(&g, &k)| g * k).collect(),
                    ),
                    None,
                ),
                None => (grad.clone(), None),
            },
            Layer::Flatten => (grad.reshaped(input.shape()), None),
            Layer::Dense {
                in_dim,
                out_dim,
                weight,
                ..
            } => {
                // dW = g (out x 1) @ x^T (1 x in)
                let mut dw = vec![0.0f32; out_dim * in_dim];
                sgemm(*out_dim, 1, *in_dim, grad.data(), false, input.data(), false, 0.0, &mut dw);
                // dx = W^T (in x out) @ g (out x 1)
                let mut dx = vec![0.0f32; *in_dim];
                sgemm(*in_dim, *out_dim, 1, weight.data(), true, grad.data(), false, 0.0, &mut dx);
                (
                    Tensor::from_vec(&[*in_dim], dx),
                    Some(LayerGrad {
                        weight: Tensor::from_vec(&[*out_dim, *in_dim], dw),
                        bias: grad.clone(),
                    }),
                )
            }
            Layer::Softmax => {
                let y = output.data();
                let g = grad.data();
                let dot: f32 = y.iter().zip(g).map(|(&yi, &gi)| yi * gi).sum();
                (
                    Tensor::from_vec(
                        input.shape(),
                        y.iter().zip(g).map(|(&yi, &gi)| yi * (gi - dot)).collect(),
                    ),
                    None,
                )
            }
        }
    }
}

/// Unrolls 3x3 zero-padded patches into an `(in_c*9) x (h*w)` row-major
/// matrix so convolution becomes one matrix product.
fn im2col(input: &[f32], in_c: usize, h: usize, w: usize) -> Vec<f32> {
    let hw = h * w;
    let mut patches = vec![0.0f32; in_c * 9 * hw];
    for ic in 0..in_c {
        let chan = &input[ic * hw..(ic + 1) * hw];
        for ky in 0..3usize {
            for kx in 0..3usize {
                let row = &mut patches[(ic * 9 + ky * 3 + kx) * hw..(ic * 9 + ky * 3 + kx + 1) * hw];
                let dy = ky as isize - 1;
                let dx = kx as isize - 1;
                for y in 0..h {
                    let iy = y as isize + dy;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let x0 = (-dx).max(0) as usize;
                    let x1 = ((w as isize - dx).min(w as isize)) as usize;
                    if x0 >= x1 {
                        continue;
                    }
                    let src = iy as usize * w;
                    row[y * w + x0..y * w + x1].copy_from_slice(
                        &chan[(src as isize + x0 as isize + dx) as usize
                            ..(src as isize + x1 as isize + dx) as usize],
                    );
                }
            }
        }
    }
    patches
}

/// Adjoint of [`im2col`]: scatter-adds patch gradients back to input layout.
fn col2im(dpatches: &[f32], in_c: usize, h: usize, w: usize) -> Vec<f32> {
    let hw = h * w;
    let mut dinput = vec![0.0f32; in_c * hw];
    for ic in 0..in_c {
        for ky in 0..3usize {
            for kx in 0..3usize {
                let row = &dpatches[(ic * 9 + ky * 3 + kx) * hw..(ic * 9 + ky * 3 + kx + 1) * hw];
                let dy = ky as isize - 1;
                let dx = kx as isize - 1;
                for y in 0..h {
                    let iy = y as isize + dy;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let x0 = (-dx).max(0) as usize;
                    let x1 = ((w as isize - dx).min(w as isize)) as usize;
                    for x in x0..x1 {
                        let src = (ic * hw) as isize + iy * w as isize + x as isize + dx;
                        dinput[src as usize] += row[y * w + x];
                    }
                }
            }
        }
    }
    dinput
}
