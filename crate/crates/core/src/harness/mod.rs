//! Experiment orchestration and metrics.
//!
//! Builds attack datasets under the evaluation discipline (benign items
//! must classify correctly, adversarial items must actually fool the
//! target model, train/test disjoint at the source-image level), computes
//! detection and recovery metrics, and writes the report files the CLI
//! emits.

mod dataset;
mod experiment;
mod metrics;
mod report;

pub use dataset::{
    build_ae_dataset, next_class, verify_dataset, AeDataset, AeDatasetSpec, AeItem, AttackAttempt,
    AttackKind,
};
pub use experiment::{
    adaptive_study, benign_impact, defense_recovery, detection_run, sweep_recovery,
    transferability_run, weak_preprocessor_run, AdaptiveRow, AdaptiveStudy, BenignImpact,
    DetectionRow, SweepGrid,
};
pub use metrics::{compute_metrics, roc_auc, roc_points, MetricsReport};
pub use report::{
    write_detection_csv, write_epoch_log_csv, write_metrics_json, write_rho_trace_csv,
    write_roc_csv, write_sweep_csv,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::AttackError;
use crate::detector::DetectorError;
use crate::image::ImageError;
use crate::inpaint::InpaintParams;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("experiment: {0}")]
    Experiment(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Everything that determines one experiment run; replaying a manifest
/// reproduces every report byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub seed: u64,
    pub dataset_id: String,
    pub attack: String,
    pub theta: f32,
    pub budget_fraction: f32,
    pub inpaint: InpaintParams,
    pub detector_margin: f32,
    pub detector_epochs: usize,
    pub detector_patience: usize,
    pub output_paths: Vec<String>,
}
