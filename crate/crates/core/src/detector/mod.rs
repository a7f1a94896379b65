//! Siamese comparison network.
//!
//! Two twin subnetworks share one parameter set (structurally: there is a
//! single [`Network`], applied twice). Given an image and its preprocessed
//! version, the Euclidean distance between the twins' embeddings says how
//! much the pre-processor changed the image in feature space; benign
//! images barely move, adversarial ones jump. A threshold calibrated on a
//! validation split turns the distance into a verdict.

mod calibrate;
mod train;

pub use calibrate::{calibrate_from_scores, calibrate_threshold, Calibration};
pub use train::{make_pairs, train_siamese, DetectorEpochStats, Pair, SiameseOptions};

use std::io::{Read, Write};

use thiserror::Error;

use crate::image::{Image, ImageError};
use crate::inpaint::Preprocessor;
use crate::nn::{load_network, save_network, Network, NetworkBuilder, NnError, Tensor};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("detector format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DetectorError>;

/// The twin subnetwork stack: two 3x3/64 conv-ReLU blocks, 2x2 max-pool,
/// dropout 0.3, a 128-unit ReLU dense layer with dropout 0.5, and a
/// 10-unit head. `softmax_head` keeps the softmax on the embedding head;
/// dropping it yields an unnormalized embedding (both are supported, the
/// softmax variant is the default).
pub fn siamese_subnet(
    channels: usize,
    height: usize,
    width: usize,
    softmax_head: bool,
    seed: u64,
) -> Network {
    let flat = 64 * (height / 2) * (width / 2);
    let mut b = NetworkBuilder::new(seed)
        .conv3x3(channels, 64)
        .relu()
        .conv3x3(64, 64)
        .relu()
        .maxpool2x2()
        .dropout(0.3)
        .flatten()
        .dense(flat, 128)
        .relu()
        .dropout(0.5)
        .dense(128, 10);
    if softmax_head {
        b = b.softmax();
    }
    b.build()
}

/// A trained detector: shared subnet, contrastive margin, calibrated
/// decision threshold, and the pre-processor it was trained against.
#[derive(Debug, Clone)]
pub struct SiameseModel {
    subnet: Network,
    margin: f32,
    tau: f32,
    preprocessor: Preprocessor,
}

/// Verdict for one image.
#[derive(Debug, Clone)]
pub struct Detection {
    pub adversarial: bool,
    pub distance: f32,
    /// The preprocessed image, usable for rectified classification when
    /// the verdict is adversarial.
    pub processed: Image,
}

impl SiameseModel {
    pub fn new(subnet: Network, margin: f32, tau: f32, preprocessor: Preprocessor) -> Result<Self> {
        if margin <= 0.0 {
            return Err(DetectorError::InvalidConfig(format!(
                "margin must be positive, got {margin}"
            )));
        }
        Ok(SiameseModel {
            subnet,
            margin,
            tau,
            preprocessor,
        })
    }

    pub fn subnet(&self) -> &Network {
        &self.subnet
    }

    pub fn margin(&self) -> f32 {
        self.margin
    }

    pub fn tau(&self) -> f32 {
        self.tau
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    pub fn preprocessor_id(&self) -> String {
        self.preprocessor.id()
    }

    /// Embedding of one image: inference pass of the shared subnet.
    pub fn embed(&self, image: &Image) -> Result<Tensor> {
        Ok(self.subnet.infer(&image.to_tensor())?)
    }

    /// Euclidean distance between the two images' embeddings.
    pub fn pair_distance(&self, a: &Image, b: &Image) -> Result<f32> {
        let ea = self.embed(a)?;
        let eb = self.embed(b)?;
        Ok(embedding_distance(&ea, &eb))
    }

    /// Preprocesses `image` with `preprocessor` and thresholds the
    /// embedding distance: adversarial iff it exceeds tau.
    pub fn detect(&self, preprocessor: &Preprocessor, image: &Image) -> Result<Detection> {
        let processed = preprocessor.apply(image)?;
        let distance = self.pair_distance(image, &processed)?;
        Ok(Detection {
            adversarial: distance > self.tau,
            distance,
            processed,
        })
    }
}

pub(crate) fn embedding_distance(a: &Tensor, b: &Tensor) -> f32 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f32>()
        .sqrt()
}

const DETECTOR_MAGIC: [u8; 4] = *b"L0PD";
const DETECTOR_VERSION: u32 = 1;

/// Detector file: magic `L0PD`, version, margin, tau, the JSON-encoded
/// pre-processor, then the subnet in the standard model format.
pub fn save_detector(model: &SiameseModel, w: &mut impl Write) -> Result<()> {
    w.write_all(&DETECTOR_MAGIC)?;
    w.write_all(&DETECTOR_VERSION.to_le_bytes())?;
    w.write_all(&model.margin.to_le_bytes())?;
    w.write_all(&model.tau.to_le_bytes())?;
    let pp = serde_json::to_vec(&model.preprocessor)
        .map_err(|e| DetectorError::Format(format!("encode preprocessor: {e}")))?;
    w.write_all(&(pp.len() as u32).to_le_bytes())?;
    w.write_all(&pp)?;
    save_network(&model.subnet, w)?;
    Ok(())
}

pub fn load_detector(r: &mut impl Read) -> Result<SiameseModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| DetectorError::Format("truncated detector file".into()))?;
    if magic != DETECTOR_MAGIC {
        return Err(DetectorError::Format(format!(
            "bad magic {magic:02x?}, expected {DETECTOR_MAGIC:02x?}"
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != DETECTOR_VERSION {
        return Err(DetectorError::Format(format!("unsupported version {version}")));
    }
    r.read_exact(&mut u32buf)?;
    let margin = f32::from_le_bytes(u32buf);
    r.read_exact(&mut u32buf)?;
    let tau = f32::from_le_bytes(u32buf);
    r.read_exact(&mut u32buf)?;
    let pp_len = u32::from_le_bytes(u32buf) as usize;
    let mut pp = vec![0u8; pp_len];
    r.read_exact(&mut pp)?;
    let preprocessor: Preprocessor = serde_json::from_slice(&pp)
        .map_err(|e| DetectorError::Format(format!("decode preprocessor: {e}")))?;
    let subnet = load_network(r)?;
    SiameseModel::new(subnet, margin, tau, preprocessor)
}
