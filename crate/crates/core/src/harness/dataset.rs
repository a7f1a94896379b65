//! Attack-dataset construction under the evaluation discipline: benign
//! items classify correctly, adversarial items actually fool the target
//! model, and no source image contributes to both train and test.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::attack::{greedy_l0_attack, jsma_attack, predict, AttackConfig, AttackResult};
use crate::image::{Image, LabeledDataset};
use crate::mix_seed;
use crate::nn::Network;

pub const CLASSES: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Jsma,
    Greedy,
}

impl AttackKind {
    pub fn run(&self, model: &Network, image: &Image, cfg: &AttackConfig) -> crate::attack::Result<AttackResult> {
        match self {
            AttackKind::Jsma => jsma_attack(model, image, cfg),
            AttackKind::Greedy => greedy_l0_attack(model, image, cfg),
        }
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttackKind::Jsma => write!(f, "jsma"),
            AttackKind::Greedy => write!(f, "greedy"),
        }
    }
}

/// Sizes and attack parameters for one dataset build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeDatasetSpec {
    pub train_benign: usize,
    pub train_ae: usize,
    pub test_benign: usize,
    pub test_ae: usize,
    pub attack: AttackKind,
    pub theta: f32,
    pub budget_fraction: f32,
    pub seed: u64,
}

impl AeDatasetSpec {
    /// Desk-scale defaults: 2,000 training pairs and 400 test pairs,
    /// one tenth of the full-scale 20,000/2,000 discipline.
    pub fn desk_scale(attack: AttackKind, seed: u64) -> AeDatasetSpec {
        AeDatasetSpec {
            train_benign: 1000,
            train_ae: 1000,
            test_benign: 200,
            test_ae: 200,
            attack,
            theta: 1.0,
            budget_fraction: 0.1,
            seed,
        }
    }
}

/// One dataset item. `adversarial` items carry the attacked image; the
/// original class is kept so recovery accuracy can be scored.
#[derive(Debug, Clone)]
pub struct AeItem {
    pub image: Image,
    pub adversarial: bool,
    pub true_label: u8,
    pub source_index: usize,
}

/// One attack attempt, for the per-image run manifest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackAttempt {
    pub source_index: usize,
    pub success: bool,
    pub n_altered: usize,
    pub n_extreme: usize,
    pub rho: f64,
    pub iterations: usize,
}

#[derive(Debug)]
pub struct AeDataset {
    pub train: Vec<AeItem>,
    pub test: Vec<AeItem>,
    pub spec: AeDatasetSpec,
    /// Every attack attempt in order, successful or not.
    pub attempts: Vec<AttackAttempt>,
    /// Attack attempts spent building the adversarial pools.
    pub attack_attempts: usize,
    /// Successful attacks (equals the adversarial items when the source
    /// pool was large enough; smaller means a partial dataset).
    pub attack_successes: usize,
}

impl AeDataset {
    pub fn is_partial(&self) -> bool {
        let ae_items = |items: &[AeItem]| items.iter().filter(|i| i.adversarial).count();
        ae_items(&self.train) < self.spec.train_ae || ae_items(&self.test) < self.spec.test_ae
    }
}

/// Targeted-attack convention: the class after the true one.
pub fn next_class(label: u8) -> u8 {
    (label + 1) % CLASSES
}

/// Builds train/test pools from `source`. Benign pools contain only
/// images the model classifies correctly; adversarial pools contain only
/// successful attacks. Shortfalls produce a partial dataset (recorded in
/// the returned counts), never silent padding.
pub fn build_ae_dataset(
    model: &Network,
    source: &LabeledDataset,
    spec: &AeDatasetSpec,
) -> Result<AeDataset> {
    // Keep only correctly classified source images.
    let correct: Vec<usize> = source
        .images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            Ok::<Option<usize>, HarnessError>(
                (predict(model, img)? == source.labels[i] as usize).then_some(i),
            )
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut pool = correct;
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xda7a)));

    let benign_total = spec.train_benign + spec.test_benign;
    if pool.len() < benign_total {
        return Err(HarnessError::Experiment(format!(
            "only {} correctly-classified images, need at least {benign_total} for the benign pools",
            pool.len()
        )));
    }
    let (benign_idx, candidate_idx) = pool.split_at(benign_total);

    let benign_item = |i: usize| AeItem {
        image: source.images[i].clone(),
        adversarial: false,
        true_label: source.labels[i],
        source_index: i,
    };
    let mut train: Vec<AeItem> = benign_idx[..spec.train_benign].iter().copied().map(benign_item).collect();
    let mut test: Vec<AeItem> = benign_idx[spec.train_benign..].iter().copied().map(benign_item).collect();

    // Attack candidates in deterministic chunks until the quotas fill.
    let mut train_ae = Vec::with_capacity(spec.train_ae);
    let mut test_ae = Vec::with_capacity(spec.test_ae);
    let mut attempts = Vec::new();
    for chunk in candidate_idx.chunks(64) {
        if train_ae.len() >= spec.train_ae && test_ae.len() >= spec.test_ae {
            break;
        }
        let results: Vec<(usize, AttackResult)> = chunk
            .par_iter()
            .map(|&i| {
                let cfg = AttackConfig {
                    theta: spec.theta,
                    budget_fraction: spec.budget_fraction,
                    target_class: next_class(source.labels[i]) as usize,
                    seed: mix_seed(spec.seed, i as u64),
                    ..AttackConfig::default()
                };
                let r = spec.attack.run(model, &source.images[i], &cfg)?;
                Ok::<_, HarnessError>((i, r))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, r) in results {
            attempts.push(AttackAttempt {
                source_index: i,
                success: r.success,
                n_altered: r.n_altered,
                n_extreme: r.n_extreme,
                rho: r.rho,
                iterations: r.iterations,
            });
            if !r.success {
                continue;
            }
            let item = AeItem {
                image: r.ae,
                adversarial: true,
                true_label: source.labels[i],
                source_index: i,
            };
            if train_ae.len() < spec.train_ae {
                train_ae.push(item);
            } else if test_ae.len() < spec.test_ae {
                test_ae.push(item);
            }
        }
    }

    let attack_successes = train_ae.len() + test_ae.len();
    train.extend(train_ae);
    test.extend(test_ae);

    // Interleave so batches see both classes early; order stays a pure
    // function of the seed.
    train.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x7a31)));
    test.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x7e57)));

    Ok(AeDataset {
        train,
        test,
        spec: *spec,
        attack_attempts: attempts.len(),
        attempts,
        attack_successes,
    })
}

/// Re-verifies the dataset discipline against the target model: benign
/// items classify correctly, adversarial items reach their target class.
pub fn verify_dataset(model: &Network, items: &[AeItem]) -> Result<()> {
    let bad = items
        .par_iter()
        .map(|item| {
            let pred = predict(model, &item.image)?;
            let ok = if item.adversarial {
                pred == next_class(item.true_label) as usize
            } else {
                pred == item.true_label as usize
            };
            Ok::<usize, HarnessError>(usize::from(!ok))
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))?;
    if bad > 0 {
        return Err(HarnessError::Experiment(format!(
            "{bad} of {} items violate the dataset discipline",
            items.len()
        )));
    }
    Ok(())
}
