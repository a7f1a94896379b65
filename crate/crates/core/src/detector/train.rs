//! Contrastive training of the shared subnet.
//!
//! Both twins are the same `Network`; each pair contributes the gradients
//! of both forward passes to the single parameter set. Early stopping
//! watches validation pair-classification accuracy at the currently best
//! threshold, and the best-epoch parameters are the ones retained.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    calibrate_threshold, embedding_distance, siamese_subnet, Calibration, DetectorError, Result,
    SiameseModel,
};
use crate::image::Image;
use crate::inpaint::Preprocessor;
use crate::mix_seed;
use crate::nn::{contrastive_loss, Gradients, Mode, Network, Optimizer, Tensor};

const BATCH_SIZE: usize = 32;
const LEARNING_RATE: f32 = 1e-3;

/// One training/validation item: an image, its preprocessed partner, and
/// whether the image is a (successful) adversarial example.
#[derive(Debug, Clone)]
pub struct Pair {
    pub image: Image,
    pub processed: Image,
    pub adversarial: bool,
}

/// Builds `(I, preprocessor(I))` pairs in parallel.
pub fn make_pairs(items: &[(Image, bool)], preprocessor: &Preprocessor) -> Result<Vec<Pair>> {
    items
        .par_iter()
        .map(|(image, adversarial)| {
            Ok(Pair {
                image: image.clone(),
                processed: preprocessor.apply(image)?,
                adversarial: *adversarial,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiameseOptions {
    pub margin: f32,
    pub epochs: usize,
    /// Additional epochs tolerated past the best one before stopping;
    /// 0 stops after the first epoch.
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub softmax_head: bool,
}

impl SiameseOptions {
    /// Epoch/patience budgets for a given pair count: 100 epochs and
    /// patience 30 for gray, 200/50 for color, scaled proportionally below
    /// the full 20k-pair scale (with small floors).
    pub fn desk_scale(channels: usize, pairs: usize, seed: u64) -> SiameseOptions {
        let (base_epochs, base_patience) = if channels == 1 { (100, 30) } else { (200, 50) };
        let scale = (pairs as f64 / 20_000.0).min(1.0);
        SiameseOptions {
            margin: 1.0,
            epochs: ((base_epochs as f64 * scale).round() as usize).max(8),
            patience: ((base_patience as f64 * scale).round() as usize).max(2),
            min_delta: 0.001,
            seed,
            softmax_head: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DetectorEpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_tau: f32,
}

fn pair_grads(
    net: &Network,
    pair: &Pair,
    margin: f32,
    nonce: u64,
) -> Result<(f32, Gradients)> {
    let trace_a = net.forward_train(&pair.image.to_tensor(), mix_seed(nonce, 0))?;
    let trace_b = net.forward_train(&pair.processed.to_tensor(), mix_seed(nonce, 1))?;
    let ea = trace_a.output();
    let eb = trace_b.output();
    let d = embedding_distance(ea, eb);
    let (loss, dloss_dd) = contrastive_loss(d, pair.adversarial, margin)?;

    let dim = ea.numel();
    let mut ga = Tensor::zeros(&[dim]);
    // d(d)/d(ea) = (ea - eb) / d; at d = 0 the subgradient 0 is used.
    if d > 1e-12 {
        for i in 0..dim {
            ga.data_mut()[i] = dloss_dd * (ea.data()[i] - eb.data()[i]) / d;
        }
    }
    let mut gb = Tensor::zeros(&[dim]);
    for i in 0..dim {
        gb.data_mut()[i] = -ga.data()[i];
    }

    // Twins share one parameter set: both passes accumulate into it.
    let mut grads = net.backward(&trace_a, &ga)?;
    let grads_b = net.backward(&trace_b, &gb)?;
    grads.add_assign(&grads_b);
    Ok((loss, grads))
}

/// Validation pair accuracy under the verdict rule `distance > tau`.
fn pair_accuracy(net: &Network, val: &[Pair], tau: f32) -> Result<f64> {
    let correct = val
        .par_iter()
        .map(|pair| {
            let ea = net.infer(&pair.image.to_tensor())?;
            let eb = net.infer(&pair.processed.to_tensor())?;
            let d = embedding_distance(&ea, &eb);
            Ok::<usize, DetectorError>(usize::from((d > tau) == pair.adversarial))
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))?;
    Ok(correct as f64 / val.len().max(1) as f64)
}

/// Trains a Siamese detector on prebuilt pairs. Deterministic for a fixed
/// seed; aborts on divergence. Returns the model with the best-epoch
/// parameters and a threshold recalibrated on `val` for those parameters.
pub fn train_siamese(
    train: &[Pair],
    val: &[Pair],
    preprocessor: &Preprocessor,
    opts: &SiameseOptions,
) -> Result<(SiameseModel, Vec<DetectorEpochStats>)> {
    let first = train
        .first()
        .ok_or_else(|| DetectorError::InvalidConfig("empty pair set".into()))?;
    if val.is_empty() {
        return Err(DetectorError::InvalidConfig("empty validation pair set".into()));
    }
    if opts.margin <= 0.0 {
        return Err(DetectorError::InvalidConfig("margin must be positive".into()));
    }
    let img = &first.image;
    let mut net = siamese_subnet(
        img.channels(),
        img.height(),
        img.width(),
        opts.softmax_head,
        opts.seed,
    );
    net.set_mode(Mode::Training);
    let mut opt = Optimizer::adam(LEARNING_RATE, &net);

    let mut stats = Vec::new();
    let mut best: Option<(f64, usize, Network)> = None; // (accuracy, epoch, params)

    for epoch in 0..opts.epochs.max(1) {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(
            opts.seed,
            0x11c0 + epoch as u64,
        )));

        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(BATCH_SIZE) {
            let per_pair: Vec<(f32, Gradients)> = batch
                .par_iter()
                .map(|&i| pair_grads(&net, &train[i], opts.margin, mix_seed(epoch as u64, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            let mut acc: Option<Gradients> = None;
            let mut batch_loss = 0.0f64;
            for (loss, grads) in per_pair {
                batch_loss += loss as f64;
                match &mut acc {
                    Some(a) => a.add_assign(&grads),
                    None => acc = Some(grads),
                }
            }
            if !batch_loss.is_finite() {
                return Err(DetectorError::Nn(crate::nn::NnError::Diverged(format!(
                    "non-finite contrastive loss in epoch {epoch}"
                ))));
            }
            epoch_loss += batch_loss;
            let mut acc = acc.expect("nonempty batch");
            acc.scale(1.0 / batch.len() as f32);
            opt.step(&mut net, &acc)?;
        }

        let cal = calibrate_threshold(&net, val)?;
        let val_accuracy = pair_accuracy(&net, val, cal.tau)?;
        stats.push(DetectorEpochStats {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_accuracy,
            val_tau: cal.tau,
        });

        let improved = best
            .as_ref()
            .map_or(true, |(b, _, _)| val_accuracy >= b + opts.min_delta);
        if improved {
            best = Some((val_accuracy, epoch, net.clone()));
        }
        let best_epoch = best.as_ref().map(|(_, e, _)| *e).unwrap_or(epoch);
        if epoch - best_epoch >= opts.patience {
            break;
        }
    }

    let (_, _, mut best_net) = best.expect("at least one epoch ran");
    best_net.set_mode(Mode::Inference);
    let Calibration { tau, .. } = calibrate_threshold(&best_net, val)?;
    let model = SiameseModel::new(best_net, opts.margin, tau, *preprocessor)?;
    Ok((model, stats))
}
