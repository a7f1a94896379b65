use std::io::Write;
use std::path::PathBuf;

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use l0ward_core::attack::AttackConfig;
use l0ward_core::harness::{
    adaptive_study, build_ae_dataset, write_rho_trace_csv, AeDatasetSpec, AttackKind,
};
use l0ward_core::image::Image;

use super::{
    load_config, load_split, parse_preprocessor, resolve_data_dir, write_items, InpaintFlags,
    RunDir,
};
use crate::errors::{CliError, Result};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Data directory with IDX files (defaults to $L0WARD_DATA_DIR).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Trained target model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Run directory for the dataset, manifest, and image dumps.
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
    /// Attack mode: jsma, greedy, or adaptive.
    #[arg(long, default_value = "jsma")]
    pub mode: String,
    /// Per-step perturbation added to the chosen pixel.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f32,
    /// Maximum fraction of pixels the attack may modify.
    #[arg(long, default_value_t = 0.1)]
    pub budget: f32,
    /// Benign images in the training pool. The default leaves 2,000
    /// training pairs after the detector's 20% calibration carve.
    #[arg(long, default_value_t = 1250)]
    pub train_benign: usize,
    /// Adversarial examples in the training pool.
    #[arg(long, default_value_t = 1250)]
    pub train_ae: usize,
    /// Benign images in the test pool.
    #[arg(long, default_value_t = 200)]
    pub test_benign: usize,
    /// Adversarial examples in the test pool.
    #[arg(long, default_value_t = 200)]
    pub test_ae: usize,
    /// Master seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Images to attack in adaptive mode.
    #[arg(long, default_value_t = 100)]
    pub adaptive_count: usize,
    /// Restarts per image in adaptive mode.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[command(flatten)]
    pub inpaint: InpaintFlags,
}

pub fn run(args: Args) -> Result<()> {
    let params: Params = match &args.config {
        Some(path) => load_config(path)?,
        None => args.params,
    };
    let data_dir = resolve_data_dir(&args.data_dir)?;
    let model = super::load_model(&args.model)?;
    let mut run = RunDir::create(&args.out, args.force)?;
    run.snapshot_config(&params)?;
    let source = load_split(&data_dir, "test")?;

    match params.mode.as_str() {
        "jsma" | "greedy" => {
            let attack = if params.mode == "jsma" {
                AttackKind::Jsma
            } else {
                AttackKind::Greedy
            };
            let spec = AeDatasetSpec {
                train_benign: params.train_benign,
                train_ae: params.train_ae,
                test_benign: params.test_benign,
                test_ae: params.test_ae,
                attack,
                theta: params.theta,
                budget_fraction: params.budget,
                seed: params.seed,
            };
            let ds = build_ae_dataset(&model, &source, &spec)?;

            let dataset_dir = run.subdir("dataset")?;
            write_items(&dataset_dir, "train", &ds.train)?;
            write_items(&dataset_dir, "test", &ds.test)?;

            let manifest = run.path("manifest.jsonl");
            let mut f = std::fs::File::create(&manifest)
                .map_err(|e| CliError::Internal(format!("{}: {e}", manifest.display())))?;
            for a in &ds.attempts {
                writeln!(f, "{}", serde_json::to_string(a).expect("attempt serializes"))
                    .map_err(|e| CliError::Internal(format!("write manifest: {e}")))?;
            }

            let success_rate = ds.attack_successes as f64 / ds.attack_attempts.max(1) as f64;
            let mean_rho = if ds.attempts.is_empty() {
                0.0
            } else {
                ds.attempts.iter().map(|a| a.rho).sum::<f64>() / ds.attempts.len() as f64
            };
            run.write_json(
                "summary.json",
                &serde_json::json!({
                    "mode": params.mode,
                    "attempts": ds.attack_attempts,
                    "successes": ds.attack_successes,
                    "success_rate": success_rate,
                    "mean_rho": mean_rho,
                    "train_items": ds.train.len(),
                    "test_items": ds.test.len(),
                    "partial": ds.is_partial(),
                }),
            )?;
            run.log(&format!(
                "{}: {}/{} attacks succeeded ({:.1}%), dataset train={} test={}{}",
                params.mode,
                ds.attack_successes,
                ds.attack_attempts,
                100.0 * success_rate,
                ds.train.len(),
                ds.test.len(),
                if ds.is_partial() { " [partial]" } else { "" },
            ));
        }
        "adaptive" => {
            let pp = parse_preprocessor("inpaint", &params.inpaint)?;
            let images: Vec<(Image, u8)> = pick_correct(&model, &source, params.adaptive_count)?;
            let cfg = AttackConfig {
                theta: params.theta,
                budget_fraction: params.budget,
                max_restarts: params.restarts,
                seed: params.seed,
                extreme_alpha: params.inpaint.alpha,
                extreme_beta: params.inpaint.beta,
                ..AttackConfig::default()
            };
            let study = adaptive_study(&model, &pp, &images, &cfg)?;
            write_rho_trace_csv(&run.path("rho_trace.csv"), &study)?;

            let manifest = run.path("manifest.jsonl");
            let mut f = std::fs::File::create(&manifest)
                .map_err(|e| CliError::Internal(format!("{}: {e}", manifest.display())))?;
            for row in &study.rows {
                let rec = serde_json::json!({
                    "index": row.index,
                    "base_success": row.base_success,
                    "evaded": row.evaded,
                    "rho": row.final_rho,
                });
                writeln!(f, "{rec}").map_err(|e| CliError::Internal(format!("write manifest: {e}")))?;
            }
            run.write_json(
                "summary.json",
                &serde_json::json!({
                    "mode": "adaptive",
                    "images": study.images,
                    "base_successes": study.base_successes,
                    "base_success_rate": study.base_successes as f64 / study.images.max(1) as f64,
                    "evaded": study.evaded,
                    "evasion_rate": study.evaded as f64 / study.images.max(1) as f64,
                    "restarts": params.restarts,
                }),
            )?;
            run.log(&format!(
                "adaptive: {}/{} images evaded the defense (base attack: {})",
                study.evaded, study.images, study.base_successes
            ));
        }
        other => {
            return Err(CliError::BadConfig(format!(
                "unknown attack mode {other:?} (expected jsma, greedy, or adaptive)"
            )))
        }
    }
    Ok(())
}

/// First `count` correctly classified images of the split, with labels.
fn pick_correct(
    model: &l0ward_core::nn::Network,
    source: &l0ward_core::image::LabeledDataset,
    count: usize,
) -> Result<Vec<(Image, u8)>> {
    let mut picked = Vec::with_capacity(count);
    for (img, &label) in source.images.iter().zip(&source.labels) {
        if picked.len() >= count {
            break;
        }
        if l0ward_core::attack::predict(model, img)? == label as usize {
            picked.push((img.clone(), label));
        }
    }
    if picked.len() < count {
        return Err(CliError::BadConfig(format!(
            "only {} correctly classified images available, requested {count}",
            picked.len()
        )));
    }
    Ok(picked)
}
