//! Target-model training and L0 adversarial example generation.
//!
//! Two attack families with deliberately different mechanisms: the
//! saliency-guided attack perturbs the pixel with the highest adversarial
//! saliency score by a fixed step each iteration, while the greedy attack
//! saturates whichever candidate pixel most increases the target-class
//! probability. Both are targeted and L0-bounded. The adaptive loop folds
//! the defense's pre-processor into generation with randomized restarts.

mod adaptive;
mod greedy;
mod jsma;
mod train;

pub use adaptive::{adaptive_attack, AdaptiveResult, RestartStat};
pub use greedy::greedy_l0_attack;
pub use jsma::{jsma_attack, saliency_map};
pub use train::{accuracy, target_cnn, train_target, EpochStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{l0_distance, Image, ImageError};
use crate::nn::{Network, NnError};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("invalid attack config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, AttackError>;

/// Attack parameters. `budget_fraction` bounds the number of modifiable
/// pixel positions as a fraction of the image; `theta` is the per-step
/// perturbation applied to every channel of the chosen position (clamped
/// to `[0,1]`). `extreme_alpha`/`extreme_beta` are the bounds used for the
/// extreme-pixel statistic reported with each result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub theta: f32,
    pub budget_fraction: f32,
    pub target_class: usize,
    pub max_restarts: usize,
    pub seed: u64,
    pub extreme_alpha: f32,
    pub extreme_beta: f32,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            theta: 1.0,
            budget_fraction: 0.1,
            target_class: 0,
            max_restarts: 10,
            seed: 0,
            extreme_alpha: 0.1,
            extreme_beta: 0.8,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.budget_fraction) || self.budget_fraction <= 0.0 {
            return Err(AttackError::InvalidConfig(format!(
                "budget fraction must be in (0,1], got {}",
                self.budget_fraction
            )));
        }
        if self.theta == 0.0 {
            return Err(AttackError::InvalidConfig("theta must be nonzero".into()));
        }
        Ok(())
    }

    /// Maximum number of pixel positions the attack may touch.
    pub fn budget_pixels(&self, image: &Image) -> usize {
        (self.budget_fraction * image.pixels() as f32).floor() as usize
    }
}

/// Outcome of one attack run. `success` means a fresh forward pass on `ae`
/// yields the target class (for the adaptive attack: on the preprocessed
/// `ae`). `rho = n_extreme / n_altered` is the fraction of altered pixels
/// carrying extreme values, 0 when nothing was altered.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub ae: Image,
    pub success: bool,
    pub n_altered: usize,
    pub n_extreme: usize,
    pub rho: f64,
    pub iterations: usize,
}

/// Class prediction: argmax of the network output.
pub fn predict(model: &Network, image: &Image) -> Result<usize> {
    Ok(model.infer(&image.to_tensor())?.argmax())
}

/// `(n_altered, n_extreme, rho)`: altered positions, altered positions
/// where any channel of `ae` is below `alpha` or above `beta`, and their
/// ratio (0 when nothing was altered).
pub fn extreme_ratio(original: &Image, ae: &Image, alpha: f32, beta: f32) -> (usize, usize, f64) {
    let n = original.pixels();
    let n_altered = l0_distance(original, ae);
    let mut n_extreme = 0;
    for i in 0..n {
        let mut altered = false;
        let mut extreme = false;
        for c in 0..original.channels() {
            let v = ae.channel(c)[i];
            if (v - original.channel(c)[i]).abs() > 1e-6 {
                altered = true;
            }
            if v < alpha || v > beta {
                extreme = true;
            }
        }
        if altered && extreme {
            n_extreme += 1;
        }
    }
    let rho = if n_altered == 0 {
        0.0
    } else {
        n_extreme as f64 / n_altered as f64
    };
    (n_altered, n_extreme, rho)
}

pub(crate) fn finish_result(
    original: &Image,
    ae: Image,
    success: bool,
    iterations: usize,
    cfg: &AttackConfig,
) -> AttackResult {
    let (n_altered, n_extreme, rho) = extreme_ratio(original, &ae, cfg.extreme_alpha, cfg.extreme_beta);
    AttackResult {
        ae,
        success,
        n_altered,
        n_extreme,
        rho,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extreme_ratio_identical_images() {
        let img = Image::constant(1, 4, 4, 0.5);
        assert_eq!(extreme_ratio(&img, &img.clone(), 0.1, 0.8), (0, 0, 0.0));
    }

    #[test]
    fn extreme_ratio_single_bright_pixel() {
        let img = Image::constant(1, 4, 4, 0.5);
        let mut ae = img.clone();
        ae.set(0, 1, 2, 0.95);
        let (na, ne, rho) = extreme_ratio(&img, &ae, 0.1, 0.8);
        assert_eq!((na, ne), (1, 1));
        assert_eq!(rho, 1.0);
    }

    #[test]
    fn extreme_ratio_matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let channels = if rng.gen_bool(0.5) { 1 } else { 3 };
            let n = channels * 36;
            let a: Vec<f32> = (0..n).map(|_| rng.gen_range(0.2..0.7)).collect();
            let mut b = a.clone();
            for _ in 0..rng.gen_range(0..8) {
                let i = rng.gen_range(0..n);
                b[i] = rng.gen_range(0.0..1.0);
            }
            let (alpha, beta) = (0.15, 0.75);
            let ia = Image::new(channels, 6, 6, a).unwrap();
            let ib = Image::new(channels, 6, 6, b).unwrap();
            let (na, ne, rho) = extreme_ratio(&ia, &ib, alpha, beta);

            // Brute force: two independent passes.
            let mut want_na = 0;
            let mut want_ne = 0;
            for i in 0..36 {
                let altered = (0..channels)
                    .any(|c| (ia.channel(c)[i] - ib.channel(c)[i]).abs() > 1e-6);
                if altered {
                    want_na += 1;
                    if (0..channels).any(|c| ib.channel(c)[i] < alpha || ib.channel(c)[i] > beta) {
                        want_ne += 1;
                    }
                }
            }
            assert_eq!((na, ne), (want_na, want_ne));
            if want_na == 0 {
                assert_eq!(rho, 0.0);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = AttackConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.budget_fraction = 0.0;
        assert!(cfg.validate().is_err());
        cfg.budget_fraction = 0.5;
        cfg.theta = 0.0;
        assert!(cfg.validate().is_err());
    }
}
