pub mod attack;
pub mod detect;
pub mod evaluate;
pub mod inpaint;
pub mod synth_data;
pub mod train_detector;
pub mod train_target;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use l0ward_core::detector::SiameseModel;
use l0ward_core::harness::AeItem;
use l0ward_core::image::{load_idx, load_pnm, save_pnm, LabeledDataset, Provenance};
use l0ward_core::inpaint::{InpaintParams, Preprocessor};
use l0ward_core::nn::Network;

use crate::errors::{open_input, CliError, Result};

/// Standard IDX file names inside a data directory.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

fn require(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    Ok(())
}

pub fn load_split(data_dir: &Path, split: &str) -> Result<LabeledDataset> {
    let (images, labels) = match split {
        "train" => (TRAIN_IMAGES, TRAIN_LABELS),
        "test" => (TEST_IMAGES, TEST_LABELS),
        other => {
            return Err(CliError::BadConfig(format!(
                "split must be 'train' or 'test', got {other:?}"
            )))
        }
    };
    let ip = data_dir.join(images);
    let lp = data_dir.join(labels);
    require(&ip)?;
    require(&lp)?;
    let provenance = match std::fs::read_to_string(data_dir.join("provenance")) {
        Ok(s) if s.trim() == "synthetic" => Provenance::Synthetic,
        Ok(s) if s.trim() == "cifar" => Provenance::Cifar,
        _ => Provenance::Mnist,
    };
    Ok(load_idx(&ip, &lp, provenance)?)
}

pub fn load_model(path: &Path) -> Result<Network> {
    let mut f = open_input(path)?;
    Ok(l0ward_core::nn::load_network(&mut f)?)
}

pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    let mut f = File::create(path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    Ok(l0ward_core::nn::save_network(net, &mut f)?)
}

pub fn load_detector_file(path: &Path) -> Result<SiameseModel> {
    let mut f = open_input(path)?;
    Ok(l0ward_core::detector::load_detector(&mut f)?)
}

pub fn save_detector_file(model: &SiameseModel, path: &Path) -> Result<()> {
    let mut f = File::create(path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    Ok(l0ward_core::detector::save_detector(model, &mut f)?)
}

/// One row of an on-disk dataset listing.
#[derive(Debug, Serialize, Deserialize)]
struct ItemRow {
    path: String,
    adversarial: bool,
    true_label: u8,
    source_index: usize,
}

/// Writes dataset items as PGM/PPM files plus a JSON-lines listing.
/// Pixel values coming from IDX sources sit on the 1/255 grid, so the
/// round trip through PNM is lossless.
pub fn write_items(dir: &Path, split: &str, items: &[AeItem]) -> Result<()> {
    let img_dir = dir.join("img");
    std::fs::create_dir_all(&img_dir)
        .map_err(|e| CliError::Internal(format!("{}: {e}", img_dir.display())))?;
    let listing = dir.join(format!("items_{split}.jsonl"));
    let mut out = BufWriter::new(
        File::create(&listing).map_err(|e| CliError::Internal(format!("{}: {e}", listing.display())))?,
    );
    for (i, item) in items.iter().enumerate() {
        let ext = if item.image.channels() == 1 { "pgm" } else { "ppm" };
        let name = format!("img/{split}_{i:05}.{ext}");
        save_pnm(&item.image, &dir.join(&name))?;
        let row = ItemRow {
            path: name,
            adversarial: item.adversarial,
            true_label: item.true_label,
            source_index: item.source_index,
        };
        writeln!(out, "{}", serde_json::to_string(&row).expect("row serializes"))
            .map_err(|e| CliError::Internal(format!("write listing: {e}")))?;
    }
    Ok(())
}

/// Loads a dataset split written by [`write_items`].
pub fn load_items(dir: &Path, split: &str) -> Result<Vec<AeItem>> {
    let listing = dir.join(format!("items_{split}.jsonl"));
    let f = open_input(&listing)?;
    let mut items = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| CliError::Internal(format!("read listing: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ItemRow = serde_json::from_str(&line)
            .map_err(|e| CliError::BadConfig(format!("{}: {e}", listing.display())))?;
        items.push(AeItem {
            image: load_pnm(&dir.join(&row.path))?,
            adversarial: row.adversarial,
            true_label: row.true_label,
            source_index: row.source_index,
        });
    }
    Ok(items)
}

/// Shared inpainting parameter flags.
#[derive(Debug, Clone, Copy, clap::Args, Serialize, Deserialize)]
pub struct InpaintFlags {
    /// Upper bound for extremely small values.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f32,
    /// Lower bound for extremely large values.
    #[arg(long, default_value_t = 0.8)]
    pub beta: f32,
    /// Bright-pixel cutoff for color images.
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f32,
    /// Structuring-element side: larger connected mask regions are kept
    /// as image content.
    #[arg(long, default_value_t = 3)]
    pub elem: usize,
    /// Neighborhood radius for inpainting weights.
    #[arg(long = "fmm-radius", default_value_t = 3)]
    pub fmm_radius: usize,
}

impl InpaintFlags {
    pub fn params(&self) -> InpaintParams {
        InpaintParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            elem: self.elem,
            fmm_radius: self.fmm_radius,
        }
    }
}

/// Parses a preprocessor spec: `inpaint`, `bitdepth-<bits>`, `identity`.
pub fn parse_preprocessor(kind: &str, inpaint: &InpaintFlags) -> Result<Preprocessor> {
    if kind == "inpaint" {
        return Ok(Preprocessor::Inpaint(inpaint.params()));
    }
    if kind == "identity" {
        return Ok(Preprocessor::Identity);
    }
    if let Some(bits) = kind.strip_prefix("bitdepth-") {
        let bits: u8 = bits
            .parse()
            .map_err(|_| CliError::BadConfig(format!("bad bit depth in {kind:?}")))?;
        return Ok(Preprocessor::BitDepth { bits });
    }
    Err(CliError::BadConfig(format!(
        "unknown preprocessor {kind:?} (expected inpaint, bitdepth-<bits>, or identity)"
    )))
}

pub use crate::rundir::{load_config, resolve_data_dir, RunDir};
