use std::io::Write;
use std::path::PathBuf;

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use l0ward_core::detector::{calibrate_threshold, make_pairs, train_siamese, SiameseOptions};
use l0ward_core::harness::AeItem;
use l0ward_core::image::Image;

use super::{load_config, load_items, parse_preprocessor, save_detector_file, InpaintFlags, RunDir};
use crate::errors::{CliError, Result};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Dataset directory from an attack run.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Run directory for the detector and logs.
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
    /// Pairing pre-processor: inpaint, bitdepth-<bits>, or identity.
    #[arg(long, default_value = "inpaint")]
    pub preprocessor: String,
    /// Contrastive margin.
    #[arg(long, default_value_t = 1.0)]
    pub margin: f32,
    /// Epoch budget; 0 derives the desk-scale budget from the pair count.
    #[arg(long, default_value_t = 0)]
    pub epochs: usize,
    /// Early-stopping patience; 0 derives it with the epoch budget.
    #[arg(long, default_value_t = 0)]
    pub patience: usize,
    /// Minimum validation-accuracy improvement that counts.
    #[arg(long, default_value_t = 0.001)]
    pub min_delta: f64,
    /// Fraction of training pairs held out for threshold calibration and
    /// early stopping.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Drop the softmax on the embedding head.
    #[arg(long)]
    pub no_softmax_head: bool,
    /// Master seed.
    #[arg(long, default_value_t = 11)]
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

    let items = load_items(&args.dataset, "train")?;
    if items.is_empty() {
        return Err(CliError::BadConfig("training dataset is empty".into()));
    }
    if !(0.0..1.0).contains(&params.val_fraction) {
        return Err(CliError::BadConfig("val fraction must be in [0,1)".into()));
    }
    let preprocessor = parse_preprocessor(&params.preprocessor, &params.inpaint)?;

    // The tail of the (already shuffled) training items becomes the
    // calibration/early-stopping split; the dataset's test split stays
    // untouched for evaluation.
    let val_len = ((items.len() as f64 * params.val_fraction) as usize).max(1);
    let split = items.len() - val_len;
    let tagged = |slice: &[AeItem]| -> Vec<(Image, bool)> {
        slice.iter().map(|i| (i.image.clone(), i.adversarial)).collect()
    };
    run.log(&format!(
        "building pairs with {} ({} train / {val_len} val)",
        preprocessor.id(),
        split
    ));
    let train_pairs = make_pairs(&tagged(&items[..split]), &preprocessor)?;
    let val_pairs = make_pairs(&tagged(&items[split..]), &preprocessor)?;

    let channels = items[0].image.channels();
    let mut opts = SiameseOptions::desk_scale(channels, train_pairs.len(), params.seed);
    opts.margin = params.margin;
    opts.min_delta = params.min_delta;
    opts.softmax_head = !params.no_softmax_head;
    if params.epochs > 0 {
        opts.epochs = params.epochs;
    }
    if params.patience > 0 {
        opts.patience = params.patience;
    }
    run.log(&format!(
        "training: epochs={} patience={} margin={} softmax_head={}",
        opts.epochs, opts.patience, opts.margin, opts.softmax_head
    ));

    let (model, stats) = train_siamese(&train_pairs, &val_pairs, &preprocessor, &opts)?;

    let log_path = run.path("epochs.csv");
    let mut f = std::fs::File::create(&log_path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", log_path.display())))?;
    writeln!(f, "epoch,train_loss,val_accuracy,val_tau")
        .map_err(|e| CliError::Internal(format!("write epochs.csv: {e}")))?;
    for s in &stats {
        writeln!(
            f,
            "{},{:.6},{:.6},{:.6}",
            s.epoch, s.train_loss, s.val_accuracy, s.val_tau
        )
        .map_err(|e| CliError::Internal(format!("write epochs.csv: {e}")))?;
        run.log(&format!(
            "epoch {}: loss {:.5} val_accuracy {:.4} tau {:.5}",
            s.epoch, s.train_loss, s.val_accuracy, s.val_tau
        ));
    }

    save_detector_file(&model, &run.path("detector.l0pd"))?;
    let cal = calibrate_threshold(model.subnet(), &val_pairs)?;
    run.write_json(
        "summary.json",
        &serde_json::json!({
            "tau": model.tau(),
            "youden_j": cal.youden_j,
            "degenerate_threshold": cal.degenerate,
            "preprocessor": model.preprocessor_id(),
            "epochs_run": stats.len(),
            "best_val_accuracy": stats.iter().map(|s| s.val_accuracy).fold(0.0, f64::max),
        }),
    )?;
    run.log(&format!("detector saved (tau {:.5})", model.tau()));
    Ok(())
}
