//! Saliency-guided targeted L0 attack.
//!
//! Each iteration scores every pixel position by how much it pushes the
//! model toward the target class while pulling it away from the others,
//! then perturbs the best-scoring untouched position by `theta`.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{finish_result, predict, AttackConfig, AttackError, AttackResult, Result};
use crate::image::Image;
use crate::nn::{Network, Tensor};

/// Adversarial saliency score per pixel position.
///
/// With `a_i` the derivative of the target-class output and `s_i` the
/// summed derivative of all other class outputs with respect to position
/// `i` (channels summed), the score is `0` when `a_i < 0` or `s_i > 0`,
/// and `a_i * |s_i|` otherwise. The Jacobian rows come from one backward
/// pass per output class.
pub fn saliency_map(model: &Network, image: &Image, target: usize) -> Result<Vec<f32>> {
    let input = image.to_tensor();
    let trace = model.forward_trace(&input)?;
    let classes = trace.output().numel();
    if target >= classes {
        return Err(AttackError::InvalidConfig(format!(
            "target class {target} out of range for {classes} outputs"
        )));
    }
    let n = image.pixels();
    let channels = image.channels();

    let mut target_grad = vec![0.0f32; n];
    let mut others_grad = vec![0.0f32; n];
    for class in 0..classes {
        let mut one_hot = Tensor::zeros(trace.output().shape());
        one_hot.data_mut()[class] = 1.0;
        let grads = model.backward(&trace, &one_hot)?;
        let sink = if class == target {
            &mut target_grad
        } else {
            &mut others_grad
        };
        for c in 0..channels {
            for i in 0..n {
                sink[i] += grads.input.data()[c * n + i];
            }
        }
    }

    Ok((0..n)
        .map(|i| {
            let a = target_grad[i];
            let s = others_grad[i];
            if a < 0.0 || s > 0.0 {
                0.0
            } else {
                a * s.abs()
            }
        })
        .collect())
}

/// Targeted saliency attack. Stops on success, an exhausted pixel budget,
/// or when no modifiable position has positive saliency; failure is a
/// result state, not an error.
pub fn jsma_attack(model: &Network, image: &Image, cfg: &AttackConfig) -> Result<AttackResult> {
    jsma_attack_explore(model, image, cfg, None)
}

/// Like [`jsma_attack`], but when `explore` is given, each step picks
/// uniformly among the best few candidates instead of the single argmax.
/// The adaptive attack uses this to explore different perturbation paths.
pub(crate) fn jsma_attack_explore(
    model: &Network,
    image: &Image,
    cfg: &AttackConfig,
    mut explore: Option<&mut ChaCha8Rng>,
) -> Result<AttackResult> {
    cfg.validate()?;
    let budget = cfg.budget_pixels(image);
    let n = image.pixels();
    let mut current = image.clone();
    let mut touched = vec![false; n];
    let mut picked = 0usize;

    loop {
        if predict(model, &current)? == cfg.target_class {
            return Ok(finish_result(image, current, true, picked, cfg));
        }
        if picked >= budget {
            return Ok(finish_result(image, current, false, picked, cfg));
        }

        let scores = saliency_map(model, &current, cfg.target_class)?;
        let movable = |i: usize| {
            (0..current.channels()).any(|c| {
                let v = current.channel(c)[i];
                if cfg.theta > 0.0 {
                    v < 1.0
                } else {
                    v > 0.0
                }
            })
        };

        let choice = match explore.as_deref_mut() {
            None => {
                let mut best: Option<usize> = None;
                for i in 0..n {
                    if touched[i] || scores[i] <= 0.0 || !movable(i) {
                        continue;
                    }
                    if best.map_or(true, |b| scores[i] > scores[b]) {
                        best = Some(i);
                    }
                }
                best
            }
            Some(rng) => {
                // Uniform pick among the top 8 positive candidates.
                let mut cands: Vec<usize> = (0..n)
                    .filter(|&i| !touched[i] && scores[i] > 0.0 && movable(i))
                    .collect();
                cands.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
                cands.truncate(8);
                cands.choose(rng).copied()
            }
        };

        let Some(pos) = choice else {
            return Ok(finish_result(image, current, false, picked, cfg));
        };
        for c in 0..current.channels() {
            let v = current.channel(c)[pos];
            current.channel_mut(c)[pos] = (v + cfg.theta).clamp(0.0, 1.0);
        }
        touched[pos] = true;
        picked += 1;
    }
}
