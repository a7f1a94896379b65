//! Baseline input transformations: bit-depth reduction, median filtering,
//! and SVD compression. These are the comparison defenses the inpainting
//! pre-processor is evaluated against.

use super::svd::{jacobi_svd, reconstruct};
use super::{Image, ImageError, Result};

/// Quantizes every value to a `2^bits`-point grid: `round(v*(2^b-1))/(2^b-1)`.
pub fn bit_depth_reduce(image: &Image, bits: u8) -> Result<Image> {
    if !(1..=7).contains(&bits) {
        return Err(ImageError::InvalidParam(format!(
            "bit depth must be in 1..=7, got {bits}"
        )));
    }
    let levels = ((1u32 << bits) - 1) as f32;
    let mut out = image.clone();
    for v in out.data_mut() {
        *v = (*v * levels).round() / levels;
    }
    Ok(out)
}

/// Per-channel k x k median filter with reflected edges.
pub fn median_filter(image: &Image, k: usize) -> Result<Image> {
    if k % 2 == 0 || k == 0 {
        return Err(ImageError::InvalidParam(format!(
            "median window must be odd, got {k}"
        )));
    }
    let (h, w) = (image.height(), image.width());
    let half = (k / 2) as isize;
    let mut planes = Vec::with_capacity(image.channels());
    let mut window = Vec::with_capacity(k * k);
    for c in 0..image.channels() {
        let src = image.channel(c);
        let mut dst = vec![0.0f32; h * w];
        for y in 0..h as isize {
            for x in 0..w as isize {
                window.clear();
                for dy in -half..=half {
                    let yy = reflect(y + dy, h);
                    for dx in -half..=half {
                        let xx = reflect(x + dx, w);
                        window.push(src[yy * w + xx]);
                    }
                }
                let mid = window.len() / 2;
                window.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
                dst[y as usize * w + x as usize] = window[mid];
            }
        }
        planes.push(dst);
    }
    Image::from_channels(h, w, &planes)
}

/// Mirror an out-of-range index back into `[0, n)` (edge pixels repeat).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Per-channel low-rank reconstruction. `loss_ratio` is the fraction of
/// trailing singular values discarded: the leading
/// `ceil((1 - loss_ratio) * min(h, w))` triplets are kept. Output values
/// are clamped to `[0, 1]`.
pub fn svd_compress(image: &Image, loss_ratio: f64) -> Result<Image> {
    if !(0.0..1.0).contains(&loss_ratio) {
        return Err(ImageError::InvalidParam(format!(
            "loss ratio must be in [0,1), got {loss_ratio}"
        )));
    }
    let (h, w) = (image.height(), image.width());
    if h <= 1 && w <= 1 {
        return Ok(image.clone());
    }
    let full = h.min(w);
    let keep = ((1.0 - loss_ratio) * full as f64).ceil() as usize;
    let keep = keep.clamp(1, full);
    let mut planes = Vec::with_capacity(image.channels());
    for c in 0..image.channels() {
        let a: Vec<f64> = image.channel(c).iter().map(|&v| v as f64).collect();
        let (u, s, v) = jacobi_svd(&a, h, w);
        let r = reconstruct(&u, &s, &v, h, w, keep);
        planes.push(r.iter().map(|&v| (v as f32).clamp(0.0, 1.0)).collect());
    }
    Image::from_channels(h, w, &planes)
}
