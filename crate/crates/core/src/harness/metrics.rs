//! Detection metrics: confusion counts, derived rates, and ROC/AUC.

use serde::{Deserialize, Serialize};

/// Confusion counts and derived rates; adversarial is the positive class.
/// Degenerate denominators take the vacuous value: precision with no
/// predicted positives is 1.0 (and flagged), recall with no positives is
/// 1.0, FPR with no negatives is 0.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub roc_auc: Option<f64>,
    /// Precision had a zero denominator (no predicted positives).
    pub precision_degenerate: bool,
}

pub fn compute_metrics(verdicts: &[bool], labels: &[bool]) -> MetricsReport {
    assert_eq!(verdicts.len(), labels.len(), "verdict/label length mismatch");
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&v, &l) in verdicts.iter().zip(labels) {
        match (v, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = verdicts.len().max(1);
    let precision_degenerate = tp + fp == 0;
    let precision = if precision_degenerate {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let fpr = if fp + tn == 0 { 0.0 } else { fp as f64 / (fp + tn) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MetricsReport {
        tp,
        fp,
        tn,
        fn_,
        accuracy: (tp + tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        fpr,
        roc_auc: None,
        precision_degenerate,
    }
}

impl MetricsReport {
    pub fn with_auc(mut self, scores: &[f32], labels: &[bool]) -> MetricsReport {
        self.roc_auc = Some(roc_auc(scores, labels));
        self
    }
}

/// Area under the ROC curve by the rank statistic (ties contribute 1/2).
pub fn roc_auc(scores: &[f32], labels: &[bool]) -> f64 {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks across tie groups, then sum the positive ranks.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64)
}

/// ROC polyline as `(fpr, tpr)` points from the highest threshold down,
/// advancing over tie groups at once. Starts at (0,0), ends at (1,1).
pub fn roc_points(scores: &[f32], labels: &[bool]) -> Vec<(f64, f64)> {
    let n_pos = labels.iter().filter(|&&l| l).count().max(1);
    let n_neg = (labels.len() - labels.iter().filter(|&&l| l).count()).max(1);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        i = j;
    }
    points
}
