use std::path::PathBuf;

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use l0ward_core::harness::{
    benign_impact, defense_recovery, detection_run, roc_points, sweep_recovery, verify_dataset,
    write_detection_csv, write_metrics_json, write_roc_csv, write_sweep_csv, ExperimentManifest,
    MetricsReport,
};
use l0ward_core::inpaint::Preprocessor;

use super::{load_config, load_detector_file, load_items, load_model, InpaintFlags, RunDir};
use crate::errors::{CliError, Result};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Trained target model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Trained detector file.
    #[arg(long)]
    pub detector: PathBuf,
    /// Main dataset directory (from the attack run the detector was
    /// trained on).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Dataset from a different attack family for the transferability
    /// study (its test split is detected with the main detector).
    #[arg(long)]
    pub transfer_dataset: Option<PathBuf>,
    /// Detector trained with a weak pre-processor (bit-depth reduction)
    /// for the weak-pre-processor study.
    #[arg(long)]
    pub weak_detector: Option<PathBuf>,
    /// Run directory for the reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite an existing run directory.
    #[arg(long)]
    pub force: bool,
    /// JSON config replacing the parameter flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, ClapArgs, Serialize, Deserialize)]
pub struct Params {
    /// Also emit the recovery grid over the standard bounds sweep.
    #[arg(long)]
    pub sweep: bool,
    /// Seed recorded in the manifest (evaluation itself is deterministic).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub inpaint: InpaintFlags,
}

pub fn run(args: Args) -> Result<()> {
    let params: Params = match &args.config {
        Some(path) => load_config(path)?,
        None => args.params,
    };
    let mut run = RunDir::create(&args.out, args.force)?;
    run.snapshot_config(&params)?;

    let model = load_model(&args.model)?;
    let detector = load_detector_file(&args.detector)?;
    let preprocessor = *detector.preprocessor();
    let items = load_items(&args.dataset, "test")?;
    if items.is_empty() {
        return Err(CliError::BadConfig("evaluation dataset is empty".into()));
    }
    verify_dataset(&model, &items)?;
    run.log(&format!(
        "dataset discipline verified on {} test items",
        items.len()
    ));

    let mut outputs: Vec<String> = Vec::new();
    let mut sections: Vec<(String, MetricsReport)> = Vec::new();

    // Detection with the detector's own pre-processor.
    let (rows, detection) = detection_run(&detector, &preprocessor, &items)?;
    write_detection_csv(&run.path("detection.csv"), &rows)?;
    outputs.push("detection.csv".into());
    let scores: Vec<f32> = rows.iter().map(|r| r.distance).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
    write_roc_csv(&run.path("roc.csv"), &roc_points(&scores, &labels))?;
    outputs.push("roc.csv".into());
    run.log(&format!(
        "detection: recall {:.4} fpr {:.4} auc {:?}",
        detection.recall, detection.fpr, detection.roc_auc
    ));
    sections.push(("detection".into(), detection));

    // Rectification and benign impact with the inpainting bounds.
    let ip = params.inpaint.params();
    let recovery = defense_recovery(&model, &ip, &items)?;
    let impact = benign_impact(&model, &ip, &items)?;
    run.log(&format!(
        "recovery {:?}, benign impact {:.4} -> {:.4}",
        recovery, impact.original_accuracy, impact.processed_accuracy
    ));
    run.write_json(
        "recovery.json",
        &serde_json::json!({
            "recovery_accuracy": recovery,
            "benign_original_accuracy": impact.original_accuracy,
            "benign_processed_accuracy": impact.processed_accuracy,
            "benign_delta": impact.delta,
        }),
    )?;
    outputs.push("recovery.json".into());

    if params.sweep {
        let grid = sweep_recovery(&model, &ip, &items)?;
        write_sweep_csv(&run.path("sweep.csv"), &grid)?;
        outputs.push("sweep.csv".into());
    }

    // Transferability: same detector, same threshold, other attack's AEs.
    if let Some(transfer_dir) = &args.transfer_dataset {
        let transfer_items = load_items(transfer_dir, "test")?;
        verify_dataset(&model, &transfer_items)?;
        let (rows, report) = detection_run(&detector, &preprocessor, &transfer_items)?;
        write_detection_csv(&run.path("transfer.csv"), &rows)?;
        outputs.push("transfer.csv".into());
        run.log(&format!(
            "transferability: recall {:.4} fpr {:.4} (threshold reused from training)",
            report.recall, report.fpr
        ));
        sections.push(("transferability".into(), report));
    }

    // Weak pre-processor: a separately trained detector paired with
    // bit-depth reduction, applied to the same test items.
    if let Some(weak_path) = &args.weak_detector {
        let weak = load_detector_file(weak_path)?;
        if !matches!(weak.preprocessor(), Preprocessor::BitDepth { .. }) {
            return Err(CliError::BadConfig(format!(
                "weak detector uses {}, expected a bitdepth pre-processor",
                weak.preprocessor_id()
            )));
        }
        let weak_pp = *weak.preprocessor();
        let (rows, report) = detection_run(&weak, &weak_pp, &items)?;
        write_detection_csv(&run.path("weak.csv"), &rows)?;
        outputs.push("weak.csv".into());
        run.log(&format!(
            "weak pre-processor ({}): recall {:.4} fpr {:.4}",
            weak.preprocessor_id(),
            report.recall,
            report.fpr
        ));
        sections.push(("weak-preprocessor".into(), report));
    }

    let named: Vec<(&str, &MetricsReport)> =
        sections.iter().map(|(n, m)| (n.as_str(), m)).collect();
    write_metrics_json(&run.path("metrics.json"), &named)?;
    outputs.push("metrics.json".into());

    let manifest = ExperimentManifest {
        seed: params.seed,
        dataset_id: args.dataset.display().to_string(),
        attack: "from-dataset".into(),
        theta: 1.0,
        budget_fraction: 0.1,
        inpaint: ip,
        detector_margin: detector.margin(),
        detector_epochs: 0,
        detector_patience: 0,
        output_paths: outputs,
    };
    run.write_json("manifest.json", &manifest)?;
    run.log("evaluation complete");
    Ok(())
}
