use std::path::PathBuf;

use clap::Args as ClapArgs;
use serde::{Deserialize, Serialize};

use l0ward_core::image::{synth, write_idx};
use l0ward_core::mix_seed;

use super::{load_config, RunDir, TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use crate::errors::Result;

#[derive(Debug, ClapArgs)]
pub struct Args {
    /// Output directory for the IDX files.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite an existing output directory.
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
    /// Training images to generate.
    #[arg(long, default_value_t = 12_000)]
    pub train: usize,
    /// Test images to generate.
    #[arg(long, default_value_t = 4_000)]
    pub test: usize,
    /// Master seed for the corpus.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

pub fn run(args: Args) -> Result<()> {
    let params = match &args.config {
        Some(path) => load_config(path)?,
        None => args.params,
    };
    let mut run = RunDir::create(&args.out, args.force)?;
    run.snapshot_config(&params)?;

    let train = synth::generate(params.train, mix_seed(params.seed, 0));
    let test = synth::generate(params.test, mix_seed(params.seed, 1));
    write_idx(&train, &run.path(TRAIN_IMAGES), &run.path(TRAIN_LABELS))?;
    write_idx(&test, &run.path(TEST_IMAGES), &run.path(TEST_LABELS))?;
    std::fs::write(run.path("provenance"), "synthetic\n")
        .map_err(|e| crate::errors::CliError::Internal(format!("write provenance: {e}")))?;
    run.log(&format!(
        "wrote {} train and {} test images to {}",
        params.train,
        params.test,
        args.out.display()
    ));
    Ok(())
}
