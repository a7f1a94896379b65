//! The individual defense/detection experiments.

use rayon::prelude::*;

use super::dataset::{next_class, AeItem};
use super::metrics::{compute_metrics, MetricsReport};
use super::{HarnessError, Result};
use crate::attack::{adaptive_attack, predict, AttackConfig};
use crate::detector::{make_pairs, train_siamese, Pair, SiameseModel, SiameseOptions};
use crate::image::Image;
use crate::inpaint::{preprocess, InpaintParams, Preprocessor};
use crate::nn::Network;

/// One detection verdict for the per-image CSV.
#[derive(Debug, Clone, Copy)]
pub struct DetectionRow {
    pub id: usize,
    pub distance: f32,
    pub verdict: bool,
    pub label: bool,
}

/// Runs the detector over `items` with `preprocessor` as the pairing
/// transform. The stored threshold is used as-is (transferability reuses
/// the source attack's calibration rather than recalibrating).
pub fn detection_run(
    model: &SiameseModel,
    preprocessor: &Preprocessor,
    items: &[AeItem],
) -> Result<(Vec<DetectionRow>, MetricsReport)> {
    let rows: Vec<DetectionRow> = items
        .par_iter()
        .enumerate()
        .map(|(id, item)| {
            let det = model.detect(preprocessor, &item.image)?;
            Ok::<_, HarnessError>(DetectionRow {
                id,
                distance: det.distance,
                verdict: det.adversarial,
                label: item.adversarial,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdicts: Vec<bool> = rows.iter().map(|r| r.verdict).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
    let scores: Vec<f32> = rows.iter().map(|r| r.distance).collect();
    let report = compute_metrics(&verdicts, &labels).with_auc(&scores, &labels);
    Ok((rows, report))
}

/// Detector trained on one attack family, evaluated untouched on items
/// from another; the training-time threshold is reused.
pub fn transferability_run(
    model: &SiameseModel,
    preprocessor: &Preprocessor,
    other_attack_items: &[AeItem],
) -> Result<(Vec<DetectionRow>, MetricsReport)> {
    detection_run(model, preprocessor, other_attack_items)
}

/// Classification accuracy of the target model on preprocessed
/// adversarial examples, scored against the pre-attack labels.
/// `None` when there are no adversarial items (undefined, not 100%).
pub fn defense_recovery(
    model: &Network,
    params: &InpaintParams,
    items: &[AeItem],
) -> Result<Option<f64>> {
    let aes: Vec<&AeItem> = items.iter().filter(|i| i.adversarial).collect();
    if aes.is_empty() {
        return Ok(None);
    }
    let correct = aes
        .par_iter()
        .map(|item| {
            let rectified = preprocess(&item.image, params)?.image;
            Ok::<usize, HarnessError>(usize::from(
                predict(model, &rectified)? == item.true_label as usize,
            ))
        })
        .try_reduce(|| 0usize, |a, b| Ok(a + b))?;
    Ok(Some(correct as f64 / aes.len() as f64))
}

#[derive(Debug, Clone, Copy)]
pub struct BenignImpact {
    pub original_accuracy: f64,
    pub processed_accuracy: f64,
    /// processed - original; negative when pre-processing hurts.
    pub delta: f64,
}

/// Accuracy change on benign images caused by the pre-processor.
pub fn benign_impact(
    model: &Network,
    params: &InpaintParams,
    items: &[AeItem],
) -> Result<BenignImpact> {
    let benign: Vec<&AeItem> = items.iter().filter(|i| !i.adversarial).collect();
    if benign.is_empty() {
        return Err(HarnessError::Experiment("no benign items".into()));
    }
    let (orig, proc) = benign
        .par_iter()
        .map(|item| {
            let o = usize::from(predict(model, &item.image)? == item.true_label as usize);
            let rectified = preprocess(&item.image, params)?.image;
            let p = usize::from(predict(model, &rectified)? == item.true_label as usize);
            Ok::<(usize, usize), HarnessError>((o, p))
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let n = benign.len() as f64;
    Ok(BenignImpact {
        original_accuracy: orig as f64 / n,
        processed_accuracy: proc as f64 / n,
        delta: (proc as f64 - orig as f64) / n,
    })
}

/// Recovery accuracy over the standard bounds grid (rows: beta 0.6, 0.7,
/// 0.8; columns: alpha 0.0, 0.1, 0.2).
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub alphas: Vec<f32>,
    pub betas: Vec<f32>,
    /// `accuracy[bi][ai]` for `betas[bi]`, `alphas[ai]`.
    pub accuracy: Vec<Vec<Option<f64>>>,
}

pub fn sweep_recovery(
    model: &Network,
    base: &InpaintParams,
    items: &[AeItem],
) -> Result<SweepGrid> {
    let alphas = vec![0.0f32, 0.1, 0.2];
    let betas = vec![0.6f32, 0.7, 0.8];
    let mut accuracy = Vec::with_capacity(betas.len());
    for &beta in &betas {
        let mut row = Vec::with_capacity(alphas.len());
        for &alpha in &alphas {
            let params = InpaintParams {
                alpha,
                beta,
                ..*base
            };
            row.push(defense_recovery(model, &params, items)?);
        }
        accuracy.push(row);
    }
    Ok(SweepGrid {
        alphas,
        betas,
        accuracy,
    })
}

/// Weak-pre-processor study: the same detector pipeline with bit-depth
/// reduction replacing inpainting for both training pairs and detection.
pub fn weak_preprocessor_run(
    bits: u8,
    train_items: &[AeItem],
    val_items: &[AeItem],
    test_items: &[AeItem],
    opts: &SiameseOptions,
) -> Result<(SiameseModel, Vec<DetectionRow>, MetricsReport)> {
    let pp = Preprocessor::BitDepth { bits };
    let to_pairs = |items: &[AeItem]| -> Result<Vec<Pair>> {
        let tagged: Vec<(Image, bool)> = items
            .iter()
            .map(|i| (i.image.clone(), i.adversarial))
            .collect();
        Ok(make_pairs(&tagged, &pp)?)
    };
    let train = to_pairs(train_items)?;
    let val = to_pairs(val_items)?;
    let (model, _) = train_siamese(&train, &val, &pp, opts)?;
    let (rows, report) = detection_run(&model, &pp, test_items)?;
    Ok((model, rows, report))
}

/// Per-image outcome of the adaptive attack.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveRow {
    pub index: usize,
    pub base_success: bool,
    pub evaded: bool,
    /// rho of the last candidate tried for this image.
    pub final_rho: f64,
}

/// Mean extreme-pixel ratio and evasion statistics per restart index of
/// the adaptive attack across a batch of images.
#[derive(Debug, Clone)]
pub struct AdaptiveStudy {
    /// Per restart index: mean rho over images that reached that restart.
    pub mean_rho: Vec<f64>,
    /// Per restart index: images whose candidate at that restart evaded.
    pub evasions_at: Vec<usize>,
    pub images: usize,
    /// Images where some restart evaded the defense.
    pub evaded: usize,
    /// Images where the plain (non-adaptive) attack succeeded against the
    /// bare model.
    pub base_successes: usize,
    pub rows: Vec<AdaptiveRow>,
}

pub fn adaptive_study(
    model: &Network,
    preprocessor: &Preprocessor,
    images: &[(Image, u8)],
    cfg_template: &AttackConfig,
) -> Result<AdaptiveStudy> {
    let restarts = cfg_template.max_restarts.max(1);
    let per_image: Vec<(Vec<(f64, bool)>, bool, bool)> = images
        .par_iter()
        .enumerate()
        .map(|(i, (img, label))| {
            let cfg = AttackConfig {
                target_class: next_class(*label) as usize,
                seed: crate::mix_seed(cfg_template.seed, i as u64),
                ..*cfg_template
            };
            let out = adaptive_attack(model, preprocessor, img, &cfg)?;
            let trace: Vec<(f64, bool)> = out.restarts.iter().map(|r| (r.rho, r.evades)).collect();
            let base_success = out.restarts.first().is_some_and(|r| r.base_success);
            Ok::<_, HarnessError>((trace, out.result.success, base_success))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean_rho = vec![0.0f64; restarts];
    let mut counts = vec![0usize; restarts];
    let mut evasions_at = vec![0usize; restarts];
    let mut evaded = 0;
    let mut base_successes = 0;
    let mut rows = Vec::with_capacity(per_image.len());
    for (i, (trace, success, base)) in per_image.iter().enumerate() {
        for (r, (rho, evades)) in trace.iter().enumerate() {
            mean_rho[r] += rho;
            counts[r] += 1;
            if *evades {
                evasions_at[r] += 1;
            }
        }
        if *success {
            evaded += 1;
        }
        if *base {
            base_successes += 1;
        }
        rows.push(AdaptiveRow {
            index: i,
            base_success: *base,
            evaded: *success,
            final_rho: trace.last().map_or(0.0, |(rho, _)| *rho),
        });
    }
    for (m, c) in mean_rho.iter_mut().zip(&counts) {
        if *c > 0 {
            *m /= *c as f64;
        }
    }
    Ok(AdaptiveStudy {
        mean_rho,
        evasions_at,
        images: images.len(),
        evaded,
        base_successes,
        rows,
    })
}
