//! Decision-threshold calibration.
//!
//! The verdict rule is `distance > tau`. Tau is chosen to maximize
//! Youden's J (TPR - FPR) over a validation split, with ties broken
//! toward the lower false-positive rate (the larger threshold).

use super::{embedding_distance, Pair, Result};
use crate::nn::Network;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct Calibration {
    pub tau: f32,
    /// Best Youden's J = TPR - FPR achieved at `tau`.
    pub youden_j: f64,
    /// All validation distances were identical; tau is that value and the
    /// threshold carries no information.
    pub degenerate: bool,
}

/// Calibrates from `(distance, adversarial)` scores. Candidate thresholds
/// are midpoints between adjacent distinct distances (a perfectly
/// separated split gets the midpoint of the gap).
pub fn calibrate_from_scores(scores: &[(f32, bool)]) -> Calibration {
    assert!(!scores.is_empty(), "calibration needs at least one score");
    let mut sorted: Vec<(f32, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let positives = sorted.iter().filter(|(_, adv)| *adv).count();
    let negatives = sorted.len() - positives;

    if sorted.first().unwrap().0 == sorted.last().unwrap().0 {
        return Calibration {
            tau: sorted[0].0,
            youden_j: 0.0,
            degenerate: true,
        };
    }

    // Sweep descending thresholds: start above the max (nothing flagged),
    // then move tau below each distinct value, accumulating how many
    // positives/negatives exceed it. J is compared in exact integer form,
    // tp*negatives - fp*positives, so ties are unambiguous.
    let mut best_tau = sorted.last().unwrap().0 + 1.0;
    let mut best_j_num = 0i64;
    let mut tp = 0i64;
    let mut fp = 0i64;
    let mut i = sorted.len();
    while i > 0 {
        // Consume the whole tie group at this distance.
        let group_end = i;
        let d = sorted[i - 1].0;
        while i > 0 && sorted[i - 1].0 == d {
            i -= 1;
        }
        for item in &sorted[i..group_end] {
            if item.1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let tau = if i > 0 {
            (sorted[i - 1].0 + d) / 2.0
        } else {
            d - 1.0
        };
        let j_num = tp * negatives as i64 - fp * positives as i64;
        // Strictly-greater keeps the largest tau (lowest FPR) among ties.
        if j_num > best_j_num {
            best_j_num = j_num;
            best_tau = tau;
        }
    }
    let scale = (positives.max(1) * negatives.max(1)) as f64;
    Calibration {
        tau: best_tau,
        youden_j: best_j_num as f64 / scale,
        degenerate: false,
    }
}

/// Computes validation distances with the shared subnet and calibrates.
pub fn calibrate_threshold(subnet: &Network, val: &[Pair]) -> Result<Calibration> {
    let scores: Vec<(f32, bool)> = val
        .par_iter()
        .map(|pair| {
            let ea = subnet.infer(&pair.image.to_tensor())?;
            let eb = subnet.infer(&pair.processed.to_tensor())?;
            Ok((embedding_distance(&ea, &eb), pair.adversarial))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(calibrate_from_scores(&scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfectly_separated_scores_get_midpoint() {
        let scores = vec![(0.1, false), (0.9, true)];
        let c = calibrate_from_scores(&scores);
        assert!((c.tau - 0.5).abs() < 1e-6);
        assert_eq!(c.youden_j, 1.0);
        assert!(!c.degenerate);
    }

    #[test]
    fn identical_scores_are_degenerate() {
        let scores = vec![(0.3, false), (0.3, true), (0.3, true)];
        let c = calibrate_from_scores(&scores);
        assert_eq!(c.tau, 0.3);
        assert!(c.degenerate);
    }

    /// Exhaustive-sweep oracle: brute-force recount of `tp*neg - fp*pos`
    /// at every candidate threshold (all midpoints plus outside
    /// sentinels), keeping the largest tau among ties.
    fn oracle_best(scores: &[(f32, bool)]) -> (i64, f32) {
        let mut values: Vec<f32> = scores.iter().map(|s| s.0).collect();
        values.sort_by(f32::total_cmp);
        values.dedup();
        let mut candidates = vec![values[0] - 1.0, values[values.len() - 1] + 1.0];
        for w in values.windows(2) {
            candidates.push((w[0] + w[1]) / 2.0);
        }
        let positives = scores.iter().filter(|s| s.1).count() as i64;
        let negatives = scores.len() as i64 - positives;
        let mut best = (i64::MIN, f32::MIN);
        for &tau in &candidates {
            let tp = scores.iter().filter(|s| s.1 && s.0 > tau).count() as i64;
            let fp = scores.iter().filter(|s| !s.1 && s.0 > tau).count() as i64;
            let j = tp * negatives - fp * positives;
            if j > best.0 || (j == best.0 && tau > best.1) {
                best = (j, tau);
            }
        }
        best
    }

    #[test]
    fn matches_exhaustive_sweep_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for round in 0..120 {
            let n = rng.gen_range(2..40);
            let scores: Vec<(f32, bool)> = (0..n)
                .map(|_| {
                    let adv = rng.gen_bool(0.5);
                    // Quantized so ties actually happen.
                    let d = (rng.gen_range(0.0..1.0f32) * 8.0).round() / 8.0 + if adv { 0.1 } else { 0.0 };
                    (d, adv)
                })
                .collect();
            if scores.iter().all(|s| s.1) || scores.iter().all(|s| !s.1) {
                continue;
            }
            let c = calibrate_from_scores(&scores);
            if c.degenerate {
                continue;
            }
            let positives = scores.iter().filter(|s| s.1).count() as i64;
            let negatives = scores.len() as i64 - positives;
            let (oracle_j, oracle_tau) = oracle_best(&scores);
            let got_j = (c.youden_j * (positives * negatives) as f64).round() as i64;
            assert_eq!(
                got_j,
                oracle_j.max(0),
                "round {round}: J mismatch ({} vs oracle {})",
                c.youden_j,
                oracle_j
            );
            if oracle_j > 0 {
                // Same J and the same verdicts as the oracle's tau: both
                // sit in the same gap between adjacent distances.
                let count_above = |tau: f32| scores.iter().filter(|s| s.0 > tau).count();
                assert_eq!(
                    count_above(c.tau),
                    count_above(oracle_tau),
                    "round {round}: tie-break chose a different cut"
                );
            }
        }
    }
}
