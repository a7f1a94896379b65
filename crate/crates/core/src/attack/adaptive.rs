//! Defense-aware attack loop.
//!
//! The attacker knows the pre-processor and only counts an adversarial
//! example as a win if it still classifies as the target after
//! pre-processing. Each restart explores a different perturbation path
//! (randomized choice among the top saliency candidates); the per-restart
//! extreme-pixel ratio trace is recorded for analysis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::jsma::jsma_attack_explore;
use super::{finish_result, predict, AttackConfig, AttackResult, Result};
use crate::image::Image;
use crate::inpaint::Preprocessor;
use crate::mix_seed;
use crate::nn::Network;

/// One restart of the adaptive loop.
#[derive(Debug, Clone, Copy)]
pub struct RestartStat {
    pub restart: usize,
    /// The raw attack reached the target class on the unprocessed image.
    pub base_success: bool,
    /// The preprocessed candidate still classifies as the target.
    pub evades: bool,
    pub rho: f64,
    pub n_altered: usize,
}

#[derive(Debug)]
pub struct AdaptiveResult {
    /// The first evading candidate, or the last attempt when none evades.
    /// `success` here means evasion.
    pub result: AttackResult,
    pub restarts: Vec<RestartStat>,
}

/// Runs the saliency attack up to `cfg.max_restarts` times with different
/// exploration seeds; after each run the candidate is pre-processed and
/// re-classified. Success requires the processed image to keep the target
/// class. Failure is a result state, not an error.
pub fn adaptive_attack(
    model: &Network,
    preprocessor: &Preprocessor,
    image: &Image,
    cfg: &AttackConfig,
) -> Result<AdaptiveResult> {
    cfg.validate()?;
    let mut restarts = Vec::with_capacity(cfg.max_restarts.max(1));
    let mut last: Option<AttackResult> = None;

    for restart in 0..cfg.max_restarts.max(1) {
        // Restart 0 is the plain argmax attack; later restarts randomize
        // the candidate choice to explore different paths.
        let candidate = if restart == 0 {
            jsma_attack_explore(model, image, cfg, None)?
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, restart as u64));
            jsma_attack_explore(model, image, cfg, Some(&mut rng))?
        };

        let evades = if candidate.success {
            let processed = preprocessor.apply(&candidate.ae)?;
            predict(model, &processed)? == cfg.target_class
        } else {
            false
        };
        restarts.push(RestartStat {
            restart,
            base_success: candidate.success,
            evades,
            rho: candidate.rho,
            n_altered: candidate.n_altered,
        });

        if evades {
            let iterations = candidate.iterations;
            let result = finish_result(image, candidate.ae, true, iterations, cfg);
            return Ok(AdaptiveResult { result, restarts });
        }
        last = Some(candidate);
    }

    let mut result = last.expect("at least one restart ran");
    result.success = false;
    Ok(AdaptiveResult { result, restarts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{jsma_attack, target_cnn};

    #[test]
    fn identity_preprocessor_reduces_to_base_attack() {
        let model = target_cnn(1, 8, 8, 11);
        let t = crate::testutil::random_tensor(&[1, 8, 8], 0.2, 0.7, 3);
        let img = Image::new(1, 8, 8, t.into_data()).unwrap();
        let cfg = AttackConfig {
            target_class: (predict(&model, &img).unwrap() + 1) % 10,
            budget_fraction: 0.2,
            max_restarts: 3,
            ..AttackConfig::default()
        };
        let base = jsma_attack(&model, &img, &cfg).unwrap();
        let adaptive = adaptive_attack(&model, &Preprocessor::Identity, &img, &cfg).unwrap();
        assert_eq!(adaptive.restarts[0].base_success, base.success);
        assert_eq!(adaptive.restarts[0].evades, base.success);
        if base.success {
            // First restart is the plain attack; identity preprocessing
            // cannot strip its success.
            assert_eq!(adaptive.result.ae, base.ae);
            assert!(adaptive.result.success);
        }
    }

    #[test]
    fn unperturbable_image_fails_after_all_restarts() {
        let model = target_cnn(1, 8, 8, 11);
        let img = Image::constant(1, 8, 8, 0.5);
        let cfg = AttackConfig {
            target_class: (predict(&model, &img).unwrap() + 1) % 10,
            budget_fraction: 0.02, // floor(0.02 * 64) = 1 pixel: hopeless
            max_restarts: 4,
            ..AttackConfig::default()
        };
        let adaptive = adaptive_attack(&model, &Preprocessor::Identity, &img, &cfg).unwrap();
        assert!(!adaptive.result.success);
        assert_eq!(adaptive.restarts.len(), 4);
        assert!(adaptive.restarts.iter().all(|r| !r.evades));
    }
}
