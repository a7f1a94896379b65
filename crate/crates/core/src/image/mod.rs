//! Pixel containers, dataset ingestion, export, and the baseline image
//! transformations used as comparison defenses.

mod dataset;
mod pnm;
mod svd;
pub mod synth;
mod transform;

pub use dataset::{
    load_cifar_bin, load_idx, read_manifest, write_idx, write_manifest, LabeledDataset,
    ManifestEntry, Provenance,
};
pub use pnm::{load_pnm, save_pnm};
pub use transform::{bit_depth_reduce, median_filter, svd_compress};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{path}: bad magic {got:#010x}, expected {expected:#010x}")]
    BadMagic { path: String, got: u32, expected: u32 },
    #[error("{path}: truncated file ({context})")]
    Truncated { path: String, context: String },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ImageError>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> ImageError {
    ImageError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Channel-major floating image. Values are in `[0,1]` once an image has
/// been loaded or normalized; raw construction does not enforce the range
/// so that [`normalize`] has something to do.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    /// `channels` must be 1 (gray) or 3 (RGB); data is channel-major.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Image> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidParam(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(ImageError::InvalidParam(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Image {
        Image::new(channels, height, width, vec![0.0; channels * height * width])
            .expect("valid dims")
    }

    pub fn constant(channels: usize, height: usize, width: usize, value: f32) -> Image {
        Image::new(channels, height, width, vec![value; channels * height * width])
            .expect("valid dims")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixel positions per channel.
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Borrow of one channel plane, row-major.
    pub fn channel(&self, c: usize) -> &[f32] {
        &self.data[c * self.pixels()..(c + 1) * self.pixels()]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.pixels();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Reassembles an image from per-channel planes.
    pub fn from_channels(height: usize, width: usize, planes: &[Vec<f32>]) -> Result<Image> {
        let mut data = Vec::with_capacity(planes.len() * height * width);
        for p in planes {
            if p.len() != height * width {
                return Err(ImageError::InvalidParam("channel plane size mismatch".into()));
            }
            data.extend_from_slice(p);
        }
        Image::new(planes.len(), height, width, data)
    }

    /// Flattened copy as an `nn` tensor shaped `[channels, height, width]`.
    pub fn to_tensor(&self) -> crate::nn::Tensor {
        crate::nn::Tensor::from_vec(&[self.channels, self.height, self.width], self.data.clone())
    }

    pub fn min(&self) -> f32 {
        self.data.iter().cloned().fold(f32::INFINITY, f32::min)
    }

    pub fn max(&self) -> f32 {
        self.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max)
    }
}

/// Min-max normalization to `[0,1]`; a constant image maps to all zeros.
pub fn normalize(raw: &Image) -> Image {
    let lo = raw.min();
    let hi = raw.max();
    let mut out = raw.clone();
    if hi > lo {
        let scale = 1.0 / (hi - lo);
        for v in out.data_mut() {
            *v = (*v - lo) * scale;
        }
    } else {
        for v in out.data_mut() {
            *v = 0.0;
        }
    }
    out
}

/// Number of pixel positions where the two images differ in any channel
/// (per-position counting: a position with several changed channels counts
/// once). Values within `1e-6` are considered equal.
pub fn l0_distance(a: &Image, b: &Image) -> usize {
    assert_eq!(a.channels, b.channels, "image layout mismatch");
    assert_eq!(a.pixels(), b.pixels(), "image layout mismatch");
    let n = a.pixels();
    let mut count = 0;
    for i in 0..n {
        for c in 0..a.channels {
            if (a.data[c * n + i] - b.data[c * n + i]).abs() > 1e-6 {
                count += 1;
                break;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_maps_endpoints() {
        let raw = Image::new(1, 1, 3, vec![2.0, 5.0, 8.0]).unwrap();
        let n = normalize(&raw);
        assert_eq!(n.data()[0], 0.0);
        assert_eq!(n.data()[2], 1.0);
        assert!((n.data()[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn normalize_constant_image_is_zero() {
        let raw = Image::constant(1, 2, 2, 3.7);
        let n = normalize(&raw);
        assert!(n.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_eight_bit_values() {
        // 8-bit raw values 0, 51, 255 stretch to 0.0, 0.2, 1.0.
        let raw = Image::new(1, 1, 3, vec![0.0, 51.0, 255.0]).unwrap();
        let n = normalize(&raw);
        assert!((n.data()[0] - 0.0).abs() < 1e-6);
        assert!((n.data()[1] - 0.2).abs() < 1e-6);
        assert!((n.data()[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn l0_distance_zero_on_equal() {
        let a = Image::constant(3, 4, 4, 0.5);
        assert_eq!(l0_distance(&a, &a.clone()), 0);
    }

    #[test]
    fn l0_distance_counts_positions_not_channels() {
        let a = Image::constant(3, 4, 4, 0.5);
        let mut b = a.clone();
        b.set(0, 2, 1, 0.9);
        b.set(2, 2, 1, 0.1);
        assert_eq!(l0_distance(&a, &b), 1);
    }

    #[test]
    fn image_rejects_bad_channel_count() {
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
    }
}
