//! Binary PNM export/import: PGM (P5) for gray images, PPM (P6) for color.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{io_err, Image, ImageError, Result};

/// Writes `image` as P5 (1 channel) or P6 (3 channels) with maxval 255;
/// values are `round(v * 255)` clamped to `[0, 255]`.
pub fn save_pnm(image: &Image, path: &Path) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    let tag = if image.channels() == 1 { "P5" } else { "P6" };
    write!(f, "{tag}\n{} {}\n255\n", image.width(), image.height()).map_err(|e| io_err(path, e))?;
    let n = image.pixels();
    let mut bytes = Vec::with_capacity(n * image.channels());
    // PNM interleaves samples per pixel; our layout is channel-major.
    for i in 0..n {
        for c in 0..image.channels() {
            let v = (image.data()[c * n + i] * 255.0).round().clamp(0.0, 255.0);
            bytes.push(v as u8);
        }
    }
    f.write_all(&bytes).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads a binary P5/P6 file written by [`save_pnm`] (maxval must be 255).
pub fn load_pnm(path: &Path) -> Result<Image> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(f);

    let mut header = Vec::new();
    let mut fields = Vec::new();
    // Header = 4 whitespace-separated tokens (magic, width, height, maxval),
    // with `#` comments allowed; a single whitespace byte then ends it.
    while fields.len() < 4 {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte).map_err(|_| ImageError::Truncated {
            path: path.display().to_string(),
            context: "header".into(),
        })?;
        match byte[0] {
            b'#' => {
                let mut comment = Vec::new();
                r.read_until(b'\n', &mut comment).map_err(|e| io_err(path, e))?;
            }
            b if b.is_ascii_whitespace() => {
                if !header.is_empty() {
                    fields.push(String::from_utf8_lossy(&header).into_owned());
                    header.clear();
                }
            }
            b => header.push(b),
        }
    }

    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => {
            return Err(ImageError::Unsupported(format!(
                "PNM magic {other:?} (only binary P5/P6)"
            )))
        }
    };
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| ImageError::InvalidParam(format!("PNM {what}: {s:?}")))
    };
    let width = parse(&fields[1], "width")?;
    let height = parse(&fields[2], "height")?;
    let maxval = parse(&fields[3], "maxval")?;
    if maxval != 255 {
        return Err(ImageError::Unsupported(format!("PNM maxval {maxval}")));
    }

    let mut bytes = vec![0u8; width * height * channels];
    r.read_exact(&mut bytes).map_err(|_| ImageError::Truncated {
        path: path.display().to_string(),
        context: format!("{width}x{height}x{channels} samples"),
    })?;
    let n = width * height;
    let mut data = vec![0.0f32; n * channels];
    for i in 0..n {
        for c in 0..channels {
            data[c * n + i] = bytes[i * channels + c] as f32 / 255.0;
        }
    }
    Image::new(channels, height, width, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_within_one_over_255() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for channels in [1usize, 3] {
            let data: Vec<f32> = (0..channels * 6 * 5).map(|_| rng.gen_range(0.0..1.0)).collect();
            let img = Image::new(channels, 6, 5, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("img.pnm");
            save_pnm(&img, &path).unwrap();
            let back = load_pnm(&path).unwrap();
            assert_eq!(back.channels(), channels);
            for (a, b) in img.data().iter().zip(back.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0 + 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn gray_uses_p5_color_uses_p6() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.pgm");
        save_pnm(&Image::zeros(1, 2, 2), &p).unwrap();
        assert!(std::fs::read(&p).unwrap().starts_with(b"P5"));
        let p = dir.path().join("c.ppm");
        save_pnm(&Image::zeros(3, 2, 2), &p).unwrap();
        assert!(std::fs::read(&p).unwrap().starts_with(b"P6"));
    }
}
