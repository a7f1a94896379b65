//! Extreme-value masks and the connected-region size filter.

use super::InpaintParams;
use crate::image::Image;

/// One boolean grid per image channel marking pixels to reconstruct.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    height: usize,
    width: usize,
    channels: Vec<Vec<bool>>,
}

impl MaskSet {
    pub fn from_channels(height: usize, width: usize, channels: Vec<Vec<bool>>) -> MaskSet {
        for c in &channels {
            assert_eq!(c.len(), height * width, "mask plane size mismatch");
        }
        MaskSet {
            height,
            width,
            channels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[bool] {
        &self.channels[c]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> bool {
        self.channels[c][y * self.width + x]
    }

    /// True when any channel masks the position.
    pub fn any_at(&self, y: usize, x: usize) -> bool {
        self.channels.iter().any(|c| c[y * self.width + x])
    }

    pub fn set_count(&self) -> usize {
        self.channels.iter().map(|c| c.iter().filter(|&&b| b).count()).sum()
    }

    /// Renders one channel as a gray image (masked = white) for export.
    pub fn to_image(&self, c: usize) -> Image {
        let data = self.channels[c].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Image::new(1, self.height, self.width, data).expect("valid dims")
    }
}

/// Marks extreme-valued pixels per channel.
///
/// Color: channel X is masked at a pixel when its value is below `alpha`,
/// or above `beta` while at least one of the other two channels is at most
/// `gamma` (a pixel bright in all three channels is natural brightness,
/// not noise). Gray: masked when below `alpha` or above `beta`.
pub fn build_mask(image: &Image, params: &InpaintParams) -> MaskSet {
    let n = image.pixels();
    let mut channels = Vec::with_capacity(image.channels());
    if image.channels() == 1 {
        let plane = image.channel(0);
        channels.push(
            plane
                .iter()
                .map(|&v| v < params.alpha || v > params.beta)
                .collect(),
        );
    } else {
        for c in 0..3 {
            let (o1, o2) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (1, 0),
            };
            let this = image.channel(c);
            let other1 = image.channel(o1);
            let other2 = image.channel(o2);
            let mut mask = vec![false; n];
            for i in 0..n {
                mask[i] = this[i] < params.alpha
                    || (this[i] > params.beta && (other1[i] <= params.gamma || other2[i] <= params.gamma));
            }
            channels.push(mask);
        }
    }
    MaskSet::from_channels(image.height(), image.width(), channels)
}

/// Clears every 8-connected component of set pixels whose bounding box
/// exceeds `elem` in either dimension; components fitting within an
/// `elem x elem` box survive. Union-find labeling.
pub fn filter_connected(mask: &[bool], height: usize, width: usize, elem: usize) -> Vec<bool> {
    assert_eq!(mask.len(), height * width);
    let mut parent: Vec<u32> = (0..mask.len() as u32).collect();

    fn find(parent: &mut [u32], i: u32) -> u32 {
        let mut root = i;
        while parent[root as usize] != root {
            root = parent[root as usize];
        }
        let mut cur = i;
        while parent[cur as usize] != root {
            let next = parent[cur as usize];
            parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            // Union with already-visited neighbors (W, NW, N, NE).
            let link = |j: usize, parent: &mut Vec<u32>| {
                if mask[j] {
                    let a = find(parent, i as u32);
                    let b = find(parent, j as u32);
                    if a != b {
                        parent[a as usize] = b;
                    }
                }
            };
            if x > 0 {
                link(i - 1, &mut parent);
            }
            if y > 0 {
                if x > 0 {
                    link(i - width - 1, &mut parent);
                }
                link(i - width, &mut parent);
                if x + 1 < width {
                    link(i - width + 1, &mut parent);
                }
            }
        }
    }

    // Bounding box per component root.
    use std::collections::HashMap;
    let mut bbox: HashMap<u32, (usize, usize, usize, usize)> = HashMap::new();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            let root = find(&mut parent, i as u32);
            let e = bbox.entry(root).or_insert((y, y, x, x));
            e.0 = e.0.min(y);
            e.1 = e.1.max(y);
            e.2 = e.2.min(x);
            e.3 = e.3.max(x);
        }
    }

    let mut out = mask.to_vec();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            let root = find(&mut parent, i as u32);
            let (y0, y1, x0, x1) = bbox[&root];
            if y1 - y0 + 1 > elem || x1 - x0 + 1 > elem {
                out[i] = false;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_color_pixel_masks_only_blue() {
        // Pixel (0.33, 0.55, 0.96) with alpha 0.1, beta 0.8, gamma 0.7:
        // blue is extreme (0.96 > beta) and red 0.33 <= gamma, so only the
        // blue mask fires.
        let img = Image::new(3, 1, 1, vec![0.33, 0.55, 0.96]).unwrap();
        let p = InpaintParams {
            alpha: 0.1,
            beta: 0.8,
            gamma: 0.7,
            elem: 3,
            fmm_radius: 3,
        };
        let m = build_mask(&img, &p);
        assert!(!m.get(0, 0, 0));
        assert!(!m.get(1, 0, 0));
        assert!(m.get(2, 0, 0));
    }

    #[test]
    fn constant_midtone_image_has_empty_mask() {
        let img = Image::constant(3, 4, 4, 0.5);
        let p = InpaintParams {
            alpha: 0.1,
            beta: 0.8,
            ..InpaintParams::color()
        };
        let m = build_mask(&img, &p);
        assert_eq!(m.set_count(), 0);
    }

    #[test]
    fn random_color_mask_matches_predicate_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = InpaintParams::color();
        for _ in 0..20 {
            let data: Vec<f32> = (0..3 * 64).map(|_| rng.gen_range(0.0..1.0)).collect();
            let img = Image::new(3, 8, 8, data).unwrap();
            let m = build_mask(&img, &p);
            for y in 0..8 {
                for x in 0..8 {
                    let (r, g, b) = (img.get(0, y, x), img.get(1, y, x), img.get(2, y, x));
                    let want_r = r < p.alpha || (r > p.beta && (g <= p.gamma || b <= p.gamma));
                    let want_g = g < p.alpha || (g > p.beta && (r <= p.gamma || b <= p.gamma));
                    let want_b = b < p.alpha || (b > p.beta && (g <= p.gamma || r <= p.gamma));
                    assert_eq!(m.get(0, y, x), want_r);
                    assert_eq!(m.get(1, y, x), want_g);
                    assert_eq!(m.get(2, y, x), want_b);
                }
            }
        }
    }

    #[test]
    fn isolated_pixel_survives_filter() {
        let mut mask = vec![false; 49];
        mask[3 * 7 + 3] = true;
        let out = filter_connected(&mask, 7, 7, 3);
        assert_eq!(out, mask);
    }

    #[test]
    fn solid_block_larger_than_elem_is_cleared() {
        let mut mask = vec![false; 49];
        for y in 1..6 {
            for x in 1..6 {
                mask[y * 7 + x] = true;
            }
        }
        let out = filter_connected(&mask, 7, 7, 3);
        assert!(out.iter().all(|&b| !b));
    }

    /// Flood-fill reference labeling for the oracle check.
    fn flood_fill_filter(mask: &[bool], h: usize, w: usize, elem: usize) -> Vec<bool> {
        let mut seen = vec![false; mask.len()];
        let mut out = mask.to_vec();
        for start in 0..mask.len() {
            if !mask[start] || seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(i) = stack.pop() {
                comp.push(i);
                let (y, x) = (i / w, i % w);
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (ny, nx) = (y as isize + dy, x as isize + dx);
                        if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if mask[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            let ys: Vec<usize> = comp.iter().map(|&i| i / w).collect();
            let xs: Vec<usize> = comp.iter().map(|&i| i % w).collect();
            let bh = ys.iter().max().unwrap() - ys.iter().min().unwrap() + 1;
            let bw = xs.iter().max().unwrap() - xs.iter().min().unwrap() + 1;
            if bh > elem || bw > elem {
                for &i in &comp {
                    out[i] = false;
                }
            }
        }
        out
    }

    #[test]
    fn random_masks_match_flood_fill_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for round in 0..50 {
            let (h, w) = (rng.gen_range(3..14), rng.gen_range(3..14));
            let density = rng.gen_range(0.05..0.5);
            let mask: Vec<bool> = (0..h * w).map(|_| rng.gen::<f32>() < density).collect();
            let elem = rng.gen_range(1..5);
            assert_eq!(
                filter_connected(&mask, h, w, elem),
                flood_fill_filter(&mask, h, w, elem),
                "round {round}: {h}x{w} elem {elem}"
            );
        }
    }

    #[test]
    fn filter_is_idempotent_and_antimonotone_in_elem() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let mask: Vec<bool> = (0..100).map(|_| rng.gen::<f32>() < 0.3).collect();
            let small = filter_connected(&mask, 10, 10, 2);
            assert_eq!(filter_connected(&small, 10, 10, 2), small, "idempotence");
            let large = filter_connected(&mask, 10, 10, 4);
            for i in 0..100 {
                assert!(!small[i] || large[i], "larger elem must keep a superset");
            }
        }
    }
}
