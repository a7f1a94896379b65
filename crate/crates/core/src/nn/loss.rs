use super::{NnError, Result, Tensor};

/// Probability floor inside the log so a zero predicted probability yields a
/// large finite loss instead of infinity.
const PROB_FLOOR: f32 = 1e-12;

/// Negative log-likelihood of `label` under a probability vector.
/// Returns the loss and its gradient with respect to the probabilities.
pub fn cross_entropy_loss(probs: &Tensor, label: usize) -> Result<(f32, Tensor)> {
    let n = probs.numel();
    if label >= n {
        return Err(NnError::LabelOutOfRange { label, classes: n });
    }
    let p = probs.data()[label].max(PROB_FLOOR);
    let mut grad = Tensor::zeros(probs.shape());
    grad.data_mut()[label] = -1.0 / p;
    Ok((-p.ln(), grad))
}

/// Contrastive pair loss on an embedding distance `d_w >= 0`.
///
/// `adversarial = false` (matched pair) pulls the distance toward zero;
/// `adversarial = true` pushes it beyond the margin `m`:
///
/// `(1-y) * d^2/2 + y * max(0, m-d)^2 / 2`
///
/// Returns the loss and d(loss)/d(d_w).
pub fn contrastive_loss(d_w: f32, adversarial: bool, margin: f32) -> Result<(f32, f32)> {
    if d_w < 0.0 {
        return Err(NnError::NegativeDistance(d_w));
    }
    assert!(margin > 0.0, "margin must be positive");
    if adversarial {
        let gap = (margin - d_w).max(0.0);
        Ok((0.5 * gap * gap, -gap))
    } else {
        Ok((0.5 * d_w * d_w, d_w))
    }
}
