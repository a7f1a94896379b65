//! Greedy saturation attack: the fallback L0 attack family.
//!
//! Instead of gradients, each round evaluates a random candidate subset of
//! untouched positions by forward passes, saturating whichever position
//! (to 0 or to 1, whichever is better) most increases the target-class
//! probability. Mechanically unrelated to the saliency attack, which is
//! what makes detector-transferability experiments meaningful.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{finish_result, predict, AttackConfig, AttackResult, Result};
use crate::image::Image;
use crate::nn::Network;

const CANDIDATES_PER_ROUND: usize = 64;
/// Consecutive improvement-free rounds tolerated before giving up (the
/// candidate subset is random, so one barren round is not conclusive).
const MAX_STALLS: usize = 3;

pub fn greedy_l0_attack(model: &Network, image: &Image, cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    let budget = cfg.budget_pixels(image);
    let n = image.pixels();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = image.clone();
    let mut touched = vec![false; n];
    let mut picked = 0usize;
    let mut stalls = 0usize;

    loop {
        if predict(model, &current)? == cfg.target_class {
            return Ok(finish_result(image, current, true, picked, cfg));
        }
        if picked >= budget || stalls >= MAX_STALLS {
            return Ok(finish_result(image, current, false, picked, cfg));
        }

        let p_now = model.infer(&current.to_tensor())?.data()[cfg.target_class];

        let mut pool: Vec<usize> = (0..n).filter(|&i| !touched[i]).collect();
        pool.shuffle(&mut rng);
        pool.truncate(CANDIDATES_PER_ROUND);

        let mut best: Option<(usize, f32, f32)> = None; // (pos, sat, p_target)
        let mut scratch = current.clone();
        for &pos in &pool {
            for sat in [0.0f32, 1.0] {
                let mut changed = false;
                for c in 0..current.channels() {
                    let v = current.channel(c)[pos];
                    scratch.channel_mut(c)[pos] = sat;
                    changed |= (v - sat).abs() > 1e-6;
                }
                if changed {
                    let p = model.infer(&scratch.to_tensor())?.data()[cfg.target_class];
                    if p > best.map_or(p_now, |(_, _, bp)| bp) {
                        best = Some((pos, sat, p));
                    }
                }
            }
            for c in 0..current.channels() {
                scratch.channel_mut(c)[pos] = current.channel(c)[pos];
            }
        }

        match best {
            Some((pos, sat, _)) => {
                for c in 0..current.channels() {
                    current.channel_mut(c)[pos] = sat;
                }
                touched[pos] = true;
                picked += 1;
                stalls = 0;
            }
            None => stalls += 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::target_cnn;
    use crate::image::l0_distance;

    #[test]
    fn already_target_classified_input_succeeds() {
        let model = target_cnn(1, 8, 8, 4);
        let img = Image::constant(1, 8, 8, 0.5);
        let cfg = AttackConfig {
            target_class: predict(&model, &img).unwrap(),
            ..AttackConfig::default()
        };
        let r = greedy_l0_attack(&model, &img, &cfg).unwrap();
        assert!(r.success);
        assert_eq!(r.n_altered, 0);
    }

    #[test]
    fn deterministic_for_equal_seed() {
        let model = target_cnn(1, 8, 8, 21);
        let t = crate::testutil::random_tensor(&[1, 8, 8], 0.2, 0.7, 2);
        let img = Image::new(1, 8, 8, t.into_data()).unwrap();
        let cfg = AttackConfig {
            target_class: (predict(&model, &img).unwrap() + 1) % 10,
            budget_fraction: 0.15,
            seed: 33,
            ..AttackConfig::default()
        };
        let a = greedy_l0_attack(&model, &img, &cfg).unwrap();
        let b = greedy_l0_attack(&model, &img, &cfg).unwrap();
        assert_eq!(a.ae, b.ae);
        assert_eq!(a.success, b.success);
    }

    #[test]
    fn result_invariants_hold() {
        let model = target_cnn(1, 8, 8, 11);
        for seed in 0..4u64 {
            let t = crate::testutil::random_tensor(&[1, 8, 8], 0.2, 0.7, seed + 40);
            let img = Image::new(1, 8, 8, t.into_data()).unwrap();
            let cfg = AttackConfig {
                target_class: (predict(&model, &img).unwrap() + 1) % 10,
                budget_fraction: 0.2,
                seed,
                ..AttackConfig::default()
            };
            let r = greedy_l0_attack(&model, &img, &cfg).unwrap();
            assert_eq!(r.n_altered, l0_distance(&img, &r.ae));
            assert!(r.n_altered <= cfg.budget_pixels(&img));
            assert!(r.n_extreme <= r.n_altered);
            if r.success {
                assert_eq!(predict(&model, &r.ae).unwrap(), cfg.target_class);
            }
            // Saturation writes extreme values by construction.
            if r.n_altered > 0 {
                assert_eq!(r.n_extreme, r.n_altered);
            }
        }
    }
}
