use std::path::PathBuf;

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use l0ward_core::harness::{compute_metrics, detection_run, write_detection_csv, AeItem};
use l0ward_core::image::load_pnm;

use super::{load_config, load_detector_file, load_items, RunDir};
use crate::errors::{CliError, Result};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Trained detector file.
    #[arg(long)]
    pub detector: PathBuf,
    /// Dataset directory (from an attack run) to classify.
    #[arg(long, conflicts_with = "input")]
    pub dataset: Option<PathBuf>,
    /// Single image (PGM/PPM) to classify.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Run directory for the verdict CSV.
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
    /// Dataset split to classify.
    #[arg(long, default_value = "test")]
    pub split: String,
}

pub fn run(args: Args) -> Result<()> {
    let params: Params = match &args.config {
        Some(path) => load_config(path)?,
        None => args.params,
    };
    let mut run = RunDir::create(&args.out, args.force)?;
    run.snapshot_config(&params)?;
    let model = load_detector_file(&args.detector)?;
    let preprocessor = *model.preprocessor();

    if let Some(input) = &args.input {
        let image = load_pnm(input)?;
        let det = model.detect(&preprocessor, &image)?;
        run.write_json(
            "verdict.json",
            &serde_json::json!({
                "adversarial": det.adversarial,
                "distance": det.distance,
                "tau": model.tau(),
            }),
        )?;
        run.log(&format!(
            "{}: {} (distance {:.5}, tau {:.5})",
            input.display(),
            if det.adversarial { "adversarial" } else { "benign" },
            det.distance,
            model.tau()
        ));
        return Ok(());
    }

    let dataset = args.dataset.as_ref().ok_or_else(|| {
        CliError::BadConfig("give --dataset <dir> or --input <image>".into())
    })?;
    let items: Vec<AeItem> = load_items(dataset, &params.split)?;
    let (rows, report) = detection_run(&model, &preprocessor, &items)?;
    write_detection_csv(&run.path("verdicts.csv"), &rows)?;

    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
    let verdicts: Vec<bool> = rows.iter().map(|r| r.verdict).collect();
    debug_assert_eq!(compute_metrics(&verdicts, &labels).tp, report.tp);
    run.write_json("metrics.json", &report)?;
    run.log(&format!(
        "{} items: recall {:.4} fpr {:.4} accuracy {:.4}",
        rows.len(),
        report.recall,
        report.fpr,
        report.accuracy
    ));
    Ok(())
}
