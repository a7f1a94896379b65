//! Deterministic target-classifier training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AttackError, Result};
use crate::image::LabeledDataset;
use crate::mix_seed;
use crate::nn::{cross_entropy_loss, Gradients, Mode, Network, NetworkBuilder, Optimizer};

const BATCH_SIZE: usize = 32;
const LEARNING_RATE: f32 = 1e-3;
const CLASSES: usize = 10;

/// Small convolutional classifier: two conv-relu-pool blocks into a dense
/// softmax head.
pub fn target_cnn(channels: usize, height: usize, width: usize, seed: u64) -> Network {
    let flat = 32 * (height / 4) * (width / 4);
    NetworkBuilder::new(seed)
        .conv3x3(channels, 16)
        .relu()
        .maxpool2x2()
        .conv3x3(16, 32)
        .relu()
        .maxpool2x2()
        .flatten()
        .dense(flat, CLASSES)
        .softmax()
        .build()
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Fraction of `ds` the model classifies correctly.
pub fn accuracy(model: &Network, ds: &LabeledDataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let correct = ds
        .images
        .par_iter()
        .zip(ds.labels.par_iter())
        .map(|(img, &label)| {
            Ok::<usize, crate::nn::NnError>(usize::from(
                model.infer(&img.to_tensor())?.argmax() == label as usize,
            ))
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))
        .map_err(AttackError::Nn)?;
    Ok(correct as f64 / ds.len() as f64)
}

/// Trains the target CNN with Adam and cross-entropy. Fully deterministic
/// for a fixed seed: shuffling, initialization, and dropout derive from it,
/// and per-sample gradients (computed in parallel) are reduced in index
/// order. Aborts with a diagnostic if the loss diverges.
pub fn train_target(
    train: &LabeledDataset,
    val: &LabeledDataset,
    epochs: usize,
    seed: u64,
) -> Result<(Network, Vec<EpochStats>)> {
    let first = train
        .images
        .first()
        .ok_or_else(|| AttackError::InvalidConfig("empty training set".into()))?;
    let mut net = target_cnn(first.channels(), first.height(), first.width(), seed);
    net.set_mode(Mode::Training);
    let mut opt = Optimizer::adam(LEARNING_RATE, &net);
    let mut stats = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        // Shuffling draws from its own seed stream, distinct from dropout nonces.
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(
            seed,
            0x5aff1e00 + epoch as u64,
        )));

        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(BATCH_SIZE) {
            let per_sample: Vec<(f32, Gradients)> = batch
                .par_iter()
                .map(|&i| {
                    let x = train.images[i].to_tensor();
                    let trace = net.forward_train(&x, mix_seed(epoch as u64, i as u64))?;
                    let (loss, grad) = cross_entropy_loss(trace.output(), train.labels[i] as usize)?;
                    let grads = net.backward(&trace, &grad)?;
                    Ok((loss, grads))
                })
                .collect::<Result<Vec<_>>>()?;

            let mut batch_loss = 0.0f64;
            let mut acc: Option<Gradients> = None;
            for (loss, grads) in per_sample {
                batch_loss += loss as f64;
                match &mut acc {
                    Some(a) => a.add_assign(&grads),
                    None => acc = Some(grads),
                }
            }
            let mut acc = acc.expect("nonempty batch");
            acc.scale(1.0 / batch.len() as f32);
            if !batch_loss.is_finite() {
                return Err(AttackError::Nn(crate::nn::NnError::Diverged(format!(
                    "non-finite loss in epoch {epoch}"
                ))));
            }
            epoch_loss += batch_loss;
            opt.step(&mut net, &acc)?;
        }

        let val_accuracy = accuracy(&net, val)?;
        stats.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_accuracy,
        });
    }
    net.set_mode(Mode::Inference);
    Ok((net, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::synth;

    #[test]
    fn untrained_model_is_near_chance() {
        let val = synth::generate(200, 7);
        let net = target_cnn(1, 28, 28, 3);
        let acc = accuracy(&net, &val).unwrap();
        assert!((acc - 0.1).abs() <= 0.05, "chance-level accuracy, got {acc}");
    }

    #[test]
    fn zero_epochs_returns_initialized_network() {
        let train = synth::generate(10, 1);
        let val = synth::generate(10, 2);
        let (net, stats) = train_target(&train, &val, 0, 5).unwrap();
        assert!(stats.is_empty());
        let fresh = target_cnn(1, 28, 28, 5);
        assert_eq!(net.params(), fresh.params());
    }

    #[test]
    fn same_seed_trains_bit_identical_networks() {
        let train = synth::generate(64, 11);
        let val = synth::generate(16, 12);
        let (a, _) = train_target(&train, &val, 1, 77).unwrap();
        let (b, _) = train_target(&train, &val, 1, 77).unwrap();
        for (pa, pb) in a.params().iter().zip(b.params()) {
            let ba: Vec<u32> = pa.data().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = pb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(ba, bb);
        }
    }

    #[test]
    fn short_training_improves_accuracy() {
        let train = synth::generate(600, 21);
        let val = synth::generate(100, 22);
        let (_, stats) = train_target(&train, &val, 2, 9).unwrap();
        assert!(
            stats.last().unwrap().val_accuracy > 0.5,
            "expected clear learning, got {:?}",
            stats
        );
    }
}
