//! Single-binary pipeline driver.
//!
//! Every subcommand writes into its own run directory: a config snapshot
//! (`config.json`), a plain-text log, and the command's outputs. Reusing a
//! run directory requires `--force`. All randomness flows from the
//! `--seed` in the effective config, so replaying a run directory's
//! config reproduces its outputs byte for byte.

mod commands;
mod errors;
mod rundir;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "l0ward",
    version,
    about = "Detect and rectify sparse-pixel (L0) adversarial images",
    after_help = "Exit codes: 0 success, 1 internal error, 2 missing input \
                  file, 3 invalid config or arguments, 4 model/data shape \
                  mismatch. Errors are also emitted as a JSON record on \
                  stderr.\n\nThe data directory defaults to $L0WARD_DATA_DIR \
                  when --data-dir is omitted."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic digit corpus in IDX format.
    SynthData(commands::synth_data::Args),
    /// Train the target classifier.
    TrainTarget(commands::train_target::Args),
    /// Generate L0 adversarial examples and a paired dataset.
    Attack(commands::attack::Args),
    /// Run the inpainting pre-processor on images (single, batch, or a
    /// recovery sweep over the bounds grid).
    Inpaint(commands::inpaint::Args),
    /// Train the Siamese detector on an attack dataset.
    TrainDetector(commands::train_detector::Args),
    /// Classify images as benign or adversarial with a trained detector.
    Detect(commands::detect::Args),
    /// Full evaluation: detection, recovery, benign impact, and the
    /// optional transferability / weak-pre-processor studies.
    Evaluate(commands::evaluate::Args),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthData(args) => commands::synth_data::run(args),
        Command::TrainTarget(args) => commands::train_target::run(args),
        Command::Attack(args) => commands::attack::run(args),
        Command::Inpaint(args) => commands::inpaint::run(args),
        Command::TrainDetector(args) => commands::train_detector::run(args),
        Command::Detect(args) => commands::detect::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
    };
    if let Err(err) = result {
        let record = serde_json::json!({
            "error": {
                "code": err.exit_code(),
                "kind": err.kind(),
                "message": err.to_string(),
            }
        });
        eprintln!("{record}");
        std::process::exit(err.exit_code());
    }
}
