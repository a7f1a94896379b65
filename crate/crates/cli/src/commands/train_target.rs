use std::path::PathBuf;

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use l0ward_core::attack::train_target;
use l0ward_core::harness::write_epoch_log_csv;

use super::{load_config, load_split, resolve_data_dir, save_model, RunDir};
use crate::errors::{CliError, Result};

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Data directory with IDX files (defaults to $L0WARD_DATA_DIR).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Run directory for the model and logs.
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
    /// Training images taken from the head of the train split.
    #[arg(long, default_value_t = 10_000)]
    pub train_count: usize,
    /// Held-out images taken right after the training slice.
    #[arg(long, default_value_t = 2_000)]
    pub val_count: usize,
    /// Training epochs.
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    /// Master seed (initialization, shuffling).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

pub fn run(args: Args) -> Result<()> {
    let params: Params = match &args.config {
        Some(path) => load_config(path)?,
        None => args.params,
    };
    let data_dir = resolve_data_dir(&args.data_dir)?;
    let mut run = RunDir::create(&args.out, args.force)?;
    run.snapshot_config(&params)?;

    let full = load_split(&data_dir, "train")?;
    let need = params.train_count + params.val_count;
    if full.len() < need {
        return Err(CliError::BadConfig(format!(
            "train split has {} images, need {need}",
            full.len()
        )));
    }
    let train = full.slice(0..params.train_count);
    let val = full.slice(params.train_count..need);

    run.log(&format!(
        "training on {} images, validating on {}",
        train.len(),
        val.len()
    ));
    let (model, stats) = train_target(&train, &val, params.epochs, params.seed)?;
    for s in &stats {
        run.log(&format!(
            "epoch {}: loss {:.6} val_accuracy {:.4}",
            s.epoch, s.train_loss, s.val_accuracy
        ));
    }
    write_epoch_log_csv(&run.path("accuracy_log.csv"), &stats)?;
    save_model(&model, &run.path("model.l0pk"))?;
    let final_acc = stats.last().map(|s| s.val_accuracy).unwrap_or(0.0);
    run.write_json(
        "summary.json",
        &serde_json::json!({
            "val_accuracy": final_acc,
            "epochs": stats.len(),
            "parameters": model.param_count(),
        }),
    )?;
    run.log(&format!("final val accuracy {final_acc:.4}"));
    Ok(())
}
