//! Extreme-value masking and fast-marching inpainting.
//!
//! Sparse-pixel attacks leave behind isolated pixels with near-saturated
//! channel values. The pre-processor marks every extreme-valued pixel,
//! drops mask regions too large to be attack noise (real image content:
//! dark backgrounds, bright strokes, sky), and reconstructs the rest from
//! their surroundings by fast-marching inpainting.

mod fmm;
mod mask;

pub use fmm::{telea_inpaint, InpaintedPlane};
pub use mask::{build_mask, filter_connected, MaskSet};

use serde::{Deserialize, Serialize};

use crate::image::{bit_depth_reduce, normalize, Image, ImageError, Result};

/// Mask and reconstruction parameters.
///
/// A channel value is *extreme* when it is below `alpha` or above `beta`.
/// For color images, a pixel bright in all three channels (the other two
/// above `gamma`) is treated as natural brightness rather than noise.
/// `elem` is the structuring-element side: connected mask regions whose
/// bounding box exceeds `elem` in either dimension are not inpainted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InpaintParams {
    pub alpha: f32,
    pub beta: f32,
    pub gamma: f32,
    pub elem: usize,
    pub fmm_radius: usize,
}

impl InpaintParams {
    /// Defaults for single-channel images.
    pub fn gray() -> InpaintParams {
        InpaintParams {
            alpha: 0.1,
            beta: 0.8,
            gamma: 0.7,
            elem: 3,
            fmm_radius: 3,
        }
    }

    /// Defaults for color images.
    pub fn color() -> InpaintParams {
        InpaintParams {
            alpha: 0.1,
            beta: 0.7,
            gamma: 0.7,
            elem: 3,
            fmm_radius: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha)
            || !(0.0..=1.0).contains(&self.beta)
            || self.alpha >= self.beta
        {
            return Err(ImageError::InvalidParam(format!(
                "bounds must satisfy 0 <= alpha < beta <= 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) || self.gamma == 0.0 {
            return Err(ImageError::InvalidParam(format!(
                "gamma must be in (0,1], got {}",
                self.gamma
            )));
        }
        if self.elem == 0 {
            return Err(ImageError::InvalidParam("structuring element must be >= 1".into()));
        }
        if self.fmm_radius == 0 {
            return Err(ImageError::InvalidParam("inpainting radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of running the full pre-processor on one image.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub image: Image,
    /// Final per-channel masks (after the connected-region filter); these
    /// are exactly the reconstructed positions.
    pub mask: MaskSet,
    /// Channels that were entirely masked and fell back to a constant fill.
    pub fully_masked: Vec<bool>,
}

/// Full pipeline: normalize, mask extremes, drop oversized regions,
/// inpaint each channel, reassemble.
///
/// Normalization stretches the value range to `[0,1]` only when the input
/// leaves that range (raw data). Inputs already in `[0,1]` pass through
/// untouched: re-stretching per image would distort every benign image
/// whose dynamic range is narrower than the full scale.
///
/// The region-size filter runs separately on the dark-extreme and
/// bright-extreme parts of each channel mask. Imagery with near-black
/// backgrounds (digits, night scenes) masks the whole background as one
/// dark component; a saturated attack pixel dropped into it would
/// 8-connect with that component in a combined mask and be discarded with
/// it. Filtering per polarity keeps such pixels isolated, which is the
/// case the defense exists for.
pub fn preprocess(image: &Image, params: &InpaintParams) -> Result<Preprocessed> {
    params.validate()?;
    let working = if image.min() < 0.0 || image.max() > 1.0 {
        normalize(image)
    } else {
        image.clone()
    };

    let raw_mask = build_mask(&working, params);
    let (h, w) = (working.height(), working.width());
    let mut planes = Vec::with_capacity(working.channels());
    let mut channels = Vec::with_capacity(working.channels());
    let mut fully_masked = Vec::with_capacity(working.channels());
    for c in 0..working.channels() {
        let plane = working.channel(c);
        let raw = raw_mask.channel(c);
        let dark: Vec<bool> = plane
            .iter()
            .zip(raw)
            .map(|(&v, &m)| m && v < params.alpha)
            .collect();
        let bright: Vec<bool> = dark.iter().zip(raw).map(|(&d, &m)| m && !d).collect();
        let dark = filter_connected(&dark, h, w, params.elem);
        let bright = filter_connected(&bright, h, w, params.elem);
        let filtered: Vec<bool> = dark.iter().zip(&bright).map(|(&a, &b)| a || b).collect();
        let out = telea_inpaint(plane, &filtered, h, w, params.fmm_radius);
        planes.push(out.plane);
        fully_masked.push(out.fully_masked);
        channels.push(filtered);
    }
    Ok(Preprocessed {
        image: Image::from_channels(h, w, &planes)?,
        mask: MaskSet::from_channels(h, w, channels),
        fully_masked,
    })
}

/// The pre-processing transforms a detector can be paired with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Preprocessor {
    Inpaint(InpaintParams),
    BitDepth { bits: u8 },
    Identity,
}

impl Preprocessor {
    /// Stable identifier stored in detector files and reports.
    pub fn id(&self) -> String {
        match self {
            Preprocessor::Inpaint(p) => format!(
                "inpaint-a{:.2}-b{:.2}-g{:.2}-e{}-r{}",
                p.alpha, p.beta, p.gamma, p.elem, p.fmm_radius
            ),
            Preprocessor::BitDepth { bits } => format!("bitdepth-{bits}"),
            Preprocessor::Identity => "identity".into(),
        }
    }

    pub fn apply(&self, image: &Image) -> Result<Image> {
        match self {
            Preprocessor::Inpaint(p) => Ok(preprocess(image, p)?.image),
            Preprocessor::BitDepth { bits } => bit_depth_reduce(image, *bits),
            Preprocessor::Identity => Ok(image.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn params_validation() {
        assert!(InpaintParams::gray().validate().is_ok());
        assert!(InpaintParams::color().validate().is_ok());
        let mut p = InpaintParams::gray();
        p.alpha = 0.9; // alpha >= beta
        assert!(p.validate().is_err());
        let mut p = InpaintParams::gray();
        p.gamma = 0.0;
        assert!(p.validate().is_err());
        let mut p = InpaintParams::gray();
        p.elem = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn benign_constant_tone_image_is_unchanged() {
        let img = Image::constant(1, 10, 10, 0.5);
        let out = preprocess(&img, &InpaintParams::gray()).unwrap();
        assert_eq!(out.image, img);
        assert!(out.mask.channel(0).iter().all(|&m| !m));
    }

    #[test]
    fn values_inside_bounds_make_preprocess_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = InpaintParams::gray();
        let data: Vec<f32> = (0..100)
            .map(|_| rng.gen_range(p.alpha + 0.01..p.beta - 0.01))
            .collect();
        let img = Image::new(1, 10, 10, data).unwrap();
        let out = preprocess(&img, &p).unwrap();
        assert_eq!(out.image, img);
    }

    #[test]
    fn scattered_extreme_pixels_are_masked_and_reconstructed() {
        // Mid-tone benign image plus 8 scattered pixels pushed to channel
        // extremes; construction guarantees they cross the bounds.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = InpaintParams::gray();
        let data: Vec<f32> = (0..28 * 28).map(|_| rng.gen_range(0.3..0.6)).collect();
        let benign = Image::new(1, 28, 28, data).unwrap();
        let mut ae = benign.clone();
        let spots = [(3, 4), (3, 20), (9, 9), (12, 25), (17, 2), (20, 15), (24, 24), (26, 7)];
        for (i, &(y, x)) in spots.iter().enumerate() {
            ae.set(0, y, x, if i % 2 == 0 { 1.0 } else { 0.0 });
        }
        let out = preprocess(&ae, &p).unwrap();
        let mut recovered = 0;
        for &(y, x) in &spots {
            if out.mask.get(0, y, x) {
                let v = out.image.get(0, y, x);
                assert!((0.2..=0.7).contains(&v), "reconstructed value {v} not mid-tone");
                recovered += 1;
            }
        }
        assert!(recovered >= 7, "only {recovered} of 8 perturbed pixels masked");
    }

    #[test]
    fn unmasked_pixels_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let data: Vec<f32> = (0..3 * 16 * 16).map(|_| rng.gen_range(0.0..1.0)).collect();
        let img = Image::new(3, 16, 16, data).unwrap();
        let out = preprocess(&img, &InpaintParams::color()).unwrap();
        let n = img.pixels();
        for c in 0..3 {
            for i in 0..n {
                if !out.mask.channel(c)[i] {
                    assert_eq!(out.image.channel(c)[i].to_bits(), img.channel(c)[i].to_bits());
                } else {
                    let v = out.image.channel(c)[i];
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn attack_pixels_in_dark_background_are_reconstructed() {
        // Digit-like image: near-black background, one bright stroke, plus
        // saturated attack pixels scattered in the background. The stroke
        // and the background are large extreme regions (left alone); the
        // attack pixels must be masked and pulled back toward background.
        let mut img = Image::constant(1, 20, 20, 0.02);
        for y in 4..16 {
            for x in 9..12 {
                img.set(0, y, x, 0.95);
            }
        }
        let spots = [(2, 2), (2, 17), (10, 3), (17, 16), (18, 5)];
        let mut ae = img.clone();
        for &(y, x) in &spots {
            ae.set(0, y, x, 1.0);
        }
        let out = preprocess(&ae, &InpaintParams::gray()).unwrap();
        for &(y, x) in &spots {
            assert!(out.mask.get(0, y, x), "attack pixel ({y},{x}) not masked");
            let v = out.image.get(0, y, x);
            assert!(v < 0.2, "attack pixel ({y},{x}) reconstructed to {v}");
        }
        // Stroke interior pixels stay untouched.
        assert_eq!(out.image.get(0, 8, 10), 0.95);
    }

    #[test]
    fn gray_mask_equals_replicated_color_mask_with_gamma_one() {
        // The single-channel rule is the color rule with the bright-pixel
        // clause disabled (gamma = 1 keeps it from ever firing).
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let data: Vec<f32> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let gray = Image::new(1, 8, 8, data.clone()).unwrap();
        let mut color_data = data.clone();
        color_data.extend_from_slice(&data);
        color_data.extend_from_slice(&data);
        let color = Image::new(3, 8, 8, color_data).unwrap();

        let p = InpaintParams::gray();
        let mut p_color = p;
        p_color.gamma = 1.0;
        let mg = build_mask(&gray, &p);
        let mc = build_mask(&color, &p_color);
        for c in 0..3 {
            assert_eq!(mg.channel(0), mc.channel(c));
        }
    }

    #[test]
    fn preprocessor_ids_are_stable() {
        assert_eq!(
            Preprocessor::Inpaint(InpaintParams::gray()).id(),
            "inpaint-a0.10-b0.80-g0.70-e3-r3"
        );
        assert_eq!(Preprocessor::BitDepth { bits: 3 }.id(), "bitdepth-3");
        assert_eq!(Preprocessor::Identity.id(), "identity");
    }
}
