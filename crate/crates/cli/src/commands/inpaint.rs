use std::path::PathBuf;

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use l0ward_core::harness::{sweep_recovery, write_sweep_csv};
use l0ward_core::image::{load_pnm, save_pnm};
use l0ward_core::inpaint::preprocess;

use super::{load_config, load_items, load_model, InpaintFlags, RunDir};
use crate::errors::{CliError, Result};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Single input image (PGM/PPM).
    #[arg(long, conflicts_with = "dataset")]
    pub input: Option<PathBuf>,
    /// Dataset directory (from an attack run) for batch processing.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Dataset split to process in batch/sweep mode.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Target model file; required by --sweep to score recovery.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Emit the recovery-accuracy grid over the standard bounds sweep
    /// instead of processed images.
    #[arg(long)]
    pub sweep: bool,
    /// Run directory for outputs.
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
    let ip = params.inpaint.params();

    if args.sweep {
        let dataset = args.dataset.as_ref().ok_or_else(|| {
            CliError::BadConfig("--sweep needs --dataset with adversarial items".into())
        })?;
        let model_path = args
            .model
            .as_ref()
            .ok_or_else(|| CliError::BadConfig("--sweep needs --model to score recovery".into()))?;
        let model = load_model(model_path)?;
        let items = load_items(dataset, &args.split)?;
        let grid = sweep_recovery(&model, &ip, &items)?;
        write_sweep_csv(&run.path("sweep.csv"), &grid)?;
        run.log("wrote recovery grid to sweep.csv");
        return Ok(());
    }

    if let Some(input) = &args.input {
        let image = load_pnm(input)?;
        let out = preprocess(&image, &ip)?;
        let ext = if image.channels() == 1 { "pgm" } else { "ppm" };
        save_pnm(&out.image, &run.path(&format!("processed.{ext}")))?;
        for c in 0..image.channels() {
            save_pnm(&out.mask.to_image(c), &run.path(&format!("mask_c{c}.pgm")))?;
        }
        run.write_json(
            "summary.json",
            &serde_json::json!({
                "masked_pixels": out.mask.set_count(),
                "fully_masked_channels": out.fully_masked,
            }),
        )?;
        run.log(&format!("processed {} ({} masked values)", input.display(), out.mask.set_count()));
        return Ok(());
    }

    if let Some(dataset) = &args.dataset {
        let items = load_items(dataset, &args.split)?;
        let out_dir = run.subdir("processed")?;
        let mask_dir = run.subdir("masks")?;
        let mut masked_total = 0usize;
        for (i, item) in items.iter().enumerate() {
            let out = preprocess(&item.image, &ip)?;
            let ext = if item.image.channels() == 1 { "pgm" } else { "ppm" };
            save_pnm(&out.image, &out_dir.join(format!("{i:05}.{ext}")))?;
            for c in 0..item.image.channels() {
                save_pnm(&out.mask.to_image(c), &mask_dir.join(format!("{i:05}_c{c}.pgm")))?;
            }
            masked_total += out.mask.set_count();
        }
        run.log(&format!(
            "processed {} images ({} masked values total)",
            items.len(),
            masked_total
        ));
        return Ok(());
    }

    Err(CliError::BadConfig(
        "give --input <image> or --dataset <dir> (optionally with --sweep)".into(),
    ))
}
