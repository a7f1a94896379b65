//! Minimal deterministic neural-network engine.
//!
//! Supports exactly the layer kinds the pipeline needs (3x3 same-padding
//! convolution, ReLU, 2x2 max-pool, inverted dropout, flatten, dense,
//! softmax) with manual backpropagation. Inference passes are pure and
//! shareable across threads; training passes derive dropout masks from an
//! explicit nonce so batch parallelism stays bit-reproducible.

mod layer;
#[cfg(test)]
mod tests;
mod loss;
mod network;
mod optim;
mod serialize;
mod tensor;

pub use layer::{Layer, LayerGrad};
pub use loss::{contrastive_loss, cross_entropy_loss};
pub use network::{ForwardTrace, Gradients, Mode, Network, NetworkBuilder};
pub use optim::Optimizer;
pub use serialize::{load_network, save_network, FORMAT_MAGIC, FORMAT_VERSION};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {layer}: expected input shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        layer: usize,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("pair distance must be nonnegative, got {0}")]
    NegativeDistance(f32),
    #[error("gradients do not match network parameters ({got} grads for {expected} params)")]
    GradientMismatch { expected: usize, got: usize },
    #[error("network is in {0:?} mode, operation requires {1:?}")]
    WrongMode(Mode, Mode),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Row-major single-precision matrix product `c = a @ b + beta * c`.
///
/// `a` is m x k, `b` is k x n, `c` is m x n. `at`/`bt` multiply by the
/// transpose without materializing it.
pub(crate) fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    at: bool,
    b: &[f32],
    bt: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if at { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if bt { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
