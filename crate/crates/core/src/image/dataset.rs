//! Dataset ingestion: IDX (big-endian) and CIFAR-10 binary records, plus a
//! JSON-lines manifest for run directories.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, Image, ImageError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Mnist,
    Cifar,
    Synthetic,
}

/// Images with class labels 0..classes.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(images: Vec<Image>, labels: Vec<u8>, provenance: Provenance) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(ImageError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        Ok(LabeledDataset {
            images,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Borrowing view of items `range` as a new dataset (clones images).
    pub fn slice(&self, range: std::ops::Range<usize>) -> LabeledDataset {
        LabeledDataset {
            images: self.images[range.clone()].to_vec(),
            labels: self.labels[range].to_vec(),
            provenance: self.provenance,
        }
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(r: &mut impl Read, path: &Path, context: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| ImageError::Truncated {
        path: path.display().to_string(),
        context: context.to_string(),
    })?;
    Ok(u32::from_be_bytes(buf))
}

/// Loads an IDX image/label file pair (the MNIST container format).
/// Pixel bytes are scaled by 1/255 into `[0,1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path, provenance: Provenance) -> Result<LabeledDataset> {
    let mut ir = BufReader::new(File::open(images_path).map_err(|e| io_err(images_path, e))?);
    let magic = read_u32_be(&mut ir, images_path, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(ImageError::BadMagic {
            path: images_path.display().to_string(),
            got: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = read_u32_be(&mut ir, images_path, "image count")? as usize;
    let rows = read_u32_be(&mut ir, images_path, "rows")? as usize;
    let cols = read_u32_be(&mut ir, images_path, "cols")? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    ir.read_exact(&mut pixels).map_err(|_| ImageError::Truncated {
        path: images_path.display().to_string(),
        context: format!("pixel data for {count} images of {rows}x{cols}"),
    })?;

    let mut lr = BufReader::new(File::open(labels_path).map_err(|e| io_err(labels_path, e))?);
    let magic = read_u32_be(&mut lr, labels_path, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(ImageError::BadMagic {
            path: labels_path.display().to_string(),
            got: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let label_count = read_u32_be(&mut lr, labels_path, "label count")? as usize;
    if label_count != count {
        return Err(ImageError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let mut labels = vec![0u8; label_count];
    lr.read_exact(&mut labels).map_err(|_| ImageError::Truncated {
        path: labels_path.display().to_string(),
        context: format!("{label_count} labels"),
    })?;

    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let raw = &pixels[i * rows * cols..(i + 1) * rows * cols];
        let data: Vec<f32> = raw.iter().map(|&b| b as f32 / 255.0).collect();
        images.push(Image::new(1, rows, cols, data)?);
    }
    LabeledDataset::new(images, labels, provenance)
}

/// Loads one CIFAR-10 binary batch: 3073-byte records of a label byte
/// followed by 32x32 R, G, B planes.
pub fn load_cifar_bin(path: &Path) -> Result<LabeledDataset> {
    const REC: usize = 3073;
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| io_err(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| io_err(path, e))?;
    if bytes.is_empty() || bytes.len() % REC != 0 {
        return Err(ImageError::Truncated {
            path: path.display().to_string(),
            context: format!("{} bytes is not a whole number of 3073-byte records", bytes.len()),
        });
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for rec in bytes.chunks_exact(REC) {
        labels.push(rec[0]);
        let data: Vec<f32> = rec[1..].iter().map(|&b| b as f32 / 255.0).collect();
        images.push(Image::new(3, 32, 32, data)?);
    }
    LabeledDataset::new(images, labels, Provenance::Cifar)
}

/// Writes a gray dataset as an IDX image/label file pair. Values are
/// quantized to bytes with `round(v * 255)`, the inverse of [`load_idx`]'s
/// scaling up to quantization.
pub fn write_idx(ds: &LabeledDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (rows, cols) = match ds.images.first() {
        Some(img) => (img.height(), img.width()),
        None => (0, 0),
    };
    let mut f = File::create(images_path).map_err(|e| io_err(images_path, e))?;
    f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).map_err(|e| io_err(images_path, e))?;
    f.write_all(&(ds.len() as u32).to_be_bytes()).map_err(|e| io_err(images_path, e))?;
    f.write_all(&(rows as u32).to_be_bytes()).map_err(|e| io_err(images_path, e))?;
    f.write_all(&(cols as u32).to_be_bytes()).map_err(|e| io_err(images_path, e))?;
    let mut bytes = Vec::with_capacity(ds.len() * rows * cols);
    for img in &ds.images {
        if img.channels() != 1 || img.height() != rows || img.width() != cols {
            return Err(ImageError::InvalidParam(
                "IDX export requires uniform single-channel images".into(),
            ));
        }
        bytes.extend(img.data().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    f.write_all(&bytes).map_err(|e| io_err(images_path, e))?;

    let mut f = File::create(labels_path).map_err(|e| io_err(labels_path, e))?;
    f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).map_err(|e| io_err(labels_path, e))?;
    f.write_all(&(ds.len() as u32).to_be_bytes()).map_err(|e| io_err(labels_path, e))?;
    f.write_all(&ds.labels).map_err(|e| io_err(labels_path, e))?;
    Ok(())
}

/// One line of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: u8,
    pub split: String,
}

/// Writes a JSON-lines dataset manifest.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    for e in entries {
        let line = serde_json::to_string(e).expect("manifest entries serialize");
        writeln!(f, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| ImageError::InvalidParam(format!("manifest line: {e}")))?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_idx_fixture(dir: &Path, pixels: &[Vec<u8>], labels: &[u8], rows: u32, cols: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("images-idx3-ubyte");
        let lp = dir.join("labels-idx1-ubyte");
        let mut f = File::create(&ip).unwrap();
        f.write_all(&IDX_IMAGES_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(pixels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(&rows.to_be_bytes()).unwrap();
        f.write_all(&cols.to_be_bytes()).unwrap();
        for p in pixels {
            f.write_all(p).unwrap();
        }
        let mut f = File::create(&lp).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
        (ip, lp)
    }

    #[test]
    fn idx_fixture_round_trips_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let img0: Vec<u8> = vec![0, 51, 255, 128];
        let img1: Vec<u8> = vec![10, 20, 30, 40];
        let (ip, lp) = write_idx_fixture(dir.path(), &[img0.clone(), img1.clone()], &[3, 9], 2, 2);
        let ds = load_idx(&ip, &lp, Provenance::Mnist).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![3, 9]);
        for (img, raw) in ds.images.iter().zip([&img0, &img1]) {
            for (v, &b) in img.data().iter().zip(raw.iter()) {
                assert_eq!(*v, b as f32 / 255.0);
            }
        }
    }

    #[test]
    fn empty_idx_file_is_truncated_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("empty");
        File::create(&ip).unwrap();
        let err = load_idx(&ip, &ip, Provenance::Mnist).unwrap_err();
        assert!(matches!(err, ImageError::Truncated { .. }), "{err}");
    }

    #[test]
    fn idx_bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("bad");
        let mut f = File::create(&ip).unwrap();
        f.write_all(&0xdeadbeefu32.to_be_bytes()).unwrap();
        f.write_all(&[0u8; 12]).unwrap();
        let err = load_idx(&ip, &ip, Provenance::Mnist).unwrap_err();
        assert!(matches!(err, ImageError::BadMagic { .. }), "{err}");
    }

    #[test]
    fn idx_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, _) = write_idx_fixture(dir.path(), &[vec![0; 4], vec![0; 4]], &[1, 2], 2, 2);
        // Label file with a different count.
        let lp = dir.path().join("short-labels");
        let mut f = File::create(&lp).unwrap();
        f.write_all(&IDX_LABELS_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&1u32.to_be_bytes()).unwrap();
        f.write_all(&[5u8]).unwrap();
        let err = load_idx(&ip, &lp, Provenance::Mnist).unwrap_err();
        assert!(matches!(err, ImageError::CountMismatch { .. }), "{err}");
    }

    #[test]
    fn cifar_record_label_byte() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        let mut rec = vec![7u8];
        rec.extend(std::iter::repeat(100u8).take(3072));
        std::fs::write(&path, &rec).unwrap();
        let ds = load_cifar_bin(&path).unwrap();
        assert_eq!(ds.labels, vec![7]);
        assert_eq!(ds.images[0].channels(), 3);
        assert!((ds.images[0].get(0, 0, 0) - 100.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn cifar_partial_record_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, vec![0u8; 100]).unwrap();
        assert!(load_cifar_bin(&path).is_err());
    }

    #[test]
    fn write_idx_round_trips_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("imgs");
        let lp = dir.path().join("lbls");
        let ds = crate::image::synth::generate(6, 42);
        write_idx(&ds, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp, Provenance::Synthetic).unwrap();
        assert_eq!(back.labels, ds.labels);
        for (a, b) in back.images.iter().zip(&ds.images) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let entries = vec![
            ManifestEntry { path: "img/0.pgm".into(), label: 4, split: "train".into() },
            ManifestEntry { path: "img/1.pgm".into(), label: 9, split: "test".into() },
        ];
        write_manifest(&path, &entries).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), entries);
    }
}
