//! Fast-marching inpainting of masked pixels (Telea's method).
//!
//! An approximate eikonal distance T from the mask boundary is solved
//! inward with the standard upwind update on the 4-neighborhood. Masked
//! pixels are processed in increasing T; each is filled with a normalized
//! weighted average of the already-known pixels inside the radius, where
//! the weight is the product of a direction factor (alignment with the
//! propagation front), a distance factor, and a level factor (closeness
//! in T). Masked pixels leave the known set up front and re-enter as they
//! are filled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flag {
    Known,
    Band,
    Inside,
}

/// Heap entry ordered by lowest T first, ties broken by lowest row-major
/// index so the marching order is fully deterministic.
struct Entry {
    t: f64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want smallest T first.
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// One reconstructed channel plane.
#[derive(Debug, Clone)]
pub struct InpaintedPlane {
    pub plane: Vec<f32>,
    /// The whole channel was masked; it was filled with the boundary
    /// condition value 0.5 instead of marching from a boundary.
    pub fully_masked: bool,
}

const FAR: f64 = 1e10;

/// Reconstructs `mask`ed pixels of a row-major `height x width` plane.
/// Unmasked pixels are returned bit-identical; filled values are clamped
/// to `[0,1]`.
pub fn telea_inpaint(
    channel: &[f32],
    mask: &[bool],
    height: usize,
    width: usize,
    radius: usize,
) -> InpaintedPlane {
    assert_eq!(channel.len(), height * width);
    assert_eq!(mask.len(), height * width);
    let n = height * width;

    if mask.iter().all(|&m| !m) {
        return InpaintedPlane {
            plane: channel.to_vec(),
            fully_masked: false,
        };
    }
    if mask.iter().all(|&m| m) {
        return InpaintedPlane {
            plane: vec![0.5; n],
            fully_masked: true,
        };
    }

    let mut out: Vec<f32> = channel.to_vec();
    let mut flags: Vec<Flag> = mask
        .iter()
        .map(|&m| if m { Flag::Inside } else { Flag::Known })
        .collect();
    let mut t: Vec<f64> = mask.iter().map(|&m| if m { FAR } else { 0.0 }).collect();

    let neighbors4 = |idx: usize| -> [Option<usize>; 4] {
        let (y, x) = (idx / width, idx % width);
        [
            (y > 0).then(|| idx - width),
            (y + 1 < height).then(|| idx + width),
            (x > 0).then(|| idx - 1),
            (x + 1 < width).then(|| idx + 1),
        ]
    };

    // Narrow band: known pixels adjacent to the mask.
    let mut heap = BinaryHeap::new();
    for idx in 0..n {
        if flags[idx] == Flag::Known
            && neighbors4(idx)
                .iter()
                .flatten()
                .any(|&q| flags[q] == Flag::Inside)
        {
            flags[idx] = Flag::Band;
            heap.push(Entry { t: 0.0, idx });
        }
    }

    // Upwind eikonal update from the best horizontal/vertical usable pair.
    let solve = |t: &[f64], flags: &[Flag], idx: usize| -> f64 {
        let (y, x) = (idx / width, idx % width);
        let usable = |i: usize| flags[i] != Flag::Inside && t[i] < FAR;
        let horiz = [
            (x > 0 && usable(idx - 1)).then(|| t[idx - 1]),
            (x + 1 < width && usable(idx + 1)).then(|| t[idx + 1]),
        ];
        let vert = [
            (y > 0 && usable(idx - width)).then(|| t[idx - width]),
            (y + 1 < height && usable(idx + width)).then(|| t[idx + width]),
        ];
        let mut best = FAR;
        for ta in horiz.iter().flatten() {
            for tb in vert.iter().flatten() {
                let d = (ta - tb).abs();
                let sol = if d < 1.0 {
                    (ta + tb + (2.0 - d * d).sqrt()) / 2.0
                } else {
                    ta.min(*tb) + 1.0
                };
                best = best.min(sol);
            }
        }
        let h = horiz.iter().flatten().cloned().fold(FAR, f64::min);
        let v = vert.iter().flatten().cloned().fold(FAR, f64::min);
        best.min(h + 1.0).min(v + 1.0)
    };

    let r = radius as isize;
    let fill = |out: &[f32], t: &[f64], flags: &[Flag], idx: usize| -> f32 {
        let (y, x) = (idx / width, idx % width);
        // Propagation direction: gradient of T at the pixel being filled.
        let grad = |lo: Option<usize>, hi: Option<usize>| -> f64 {
            let val = |o: Option<usize>| o.filter(|&i| t[i] < FAR).map(|i| t[i]);
            match (val(lo), val(hi)) {
                (Some(a), Some(b)) => (b - a) / 2.0,
                (Some(a), None) => t[idx] - a,
                (None, Some(b)) => b - t[idx],
                (None, None) => 0.0,
            }
        };
        let ny = grad(
            (y > 0).then(|| idx - width),
            (y + 1 < height).then(|| idx + width),
        );
        let nx = grad((x > 0).then(|| idx - 1), (x + 1 < width).then(|| idx + 1));

        let mut acc = 0.0f64;
        let mut wsum = 0.0f64;
        for dy in -r..=r {
            for dx in -r..=r {
                if dy == 0 && dx == 0 {
                    continue;
                }
                let (ky, kx) = (y as isize + dy, x as isize + dx);
                if ky < 0 || kx < 0 || ky >= height as isize || kx >= width as isize {
                    continue;
                }
                let len2 = (dy * dy + dx * dx) as f64;
                if len2 > (r * r) as f64 {
                    continue;
                }
                let k = ky as usize * width + kx as usize;
                if flags[k] == Flag::Inside {
                    continue;
                }
                let len = len2.sqrt();
                let dir = ((dy as f64 * ny + dx as f64 * nx) / len).abs().max(1e-6);
                let dst = 1.0 / len2;
                let lev = 1.0 / (1.0 + (t[k] - t[idx]).abs());
                let w = dir * dst * lev;
                acc += w * out[k] as f64;
                wsum += w;
            }
        }
        if wsum > 0.0 {
            (acc / wsum).clamp(0.0, 1.0) as f32
        } else {
            0.5
        }
    };

    while let Some(Entry { t: pt, idx }) = heap.pop() {
        if flags[idx] == Flag::Known && pt > 0.0 {
            continue; // stale lazy-deletion entry
        }
        if pt > t[idx] {
            continue;
        }
        flags[idx] = Flag::Known;
        for q in neighbors4(idx).into_iter().flatten() {
            if flags[q] == Flag::Known {
                continue;
            }
            let new_t = solve(&t, &flags, q);
            if flags[q] == Flag::Inside {
                t[q] = new_t;
                out[q] = fill(&out, &t, &flags, q);
                flags[q] = Flag::Band;
                heap.push(Entry { t: new_t, idx: q });
            } else if new_t < t[q] {
                t[q] = new_t;
                heap.push(Entry { t: new_t, idx: q });
            }
        }
    }

    InpaintedPlane {
        plane: out,
        fully_masked: false,
    }
}
