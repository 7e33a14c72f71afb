use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DatasetMode, LabeledDataset, Normalization};
use crate::error::{Error, Result};

/// Default additive noise amplitude (uniform in `[-TILE_NOISE, TILE_NOISE]`).
pub const TILE_NOISE: f64 = 0.1;

pub(crate) const TILE_RESOLUTIONS: [usize; 3] = [4, 8, 16];
const MAX_TILE_CLASSES: usize = 8;

const TILE_NAMES: [&str; MAX_TILE_CLASSES] = [
    "dark", "blue", "green", "cyan", "red", "magenta", "yellow", "white",
];

/// Noise-free RGB signature of subcategory `k`: a corner of the colour cube
/// (bit `c` of `k` sets channel `c` high) plus a brightness ramp that runs
/// horizontally for even `k` and vertically for odd `k`. Values lie in
/// `[-0.95, 0.95]`, laid out `y, x, channel`.
pub fn tile_template(k: usize, resolution: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(resolution * resolution * 3);
    for y in 0..resolution {
        for x in 0..resolution {
            let t = if k % 2 == 0 { x } else { y };
            let ramp = if resolution > 1 {
                2.0 * t as f64 / (resolution - 1) as f64 - 1.0
            } else {
                0.0
            };
            for c in 0..3 {
                let base = if (k >> c) & 1 == 1 { 0.7 } else { -0.7 };
                out.push(base + 0.25 * ramp);
            }
        }
    }
    out
}

pub fn tile_image_dataset(resolution: usize, m: usize, count: usize, seed: u64) -> Result<LabeledDataset> {
    tile_image_dataset_with_noise(resolution, m, count, seed, TILE_NOISE)
}

pub fn tile_image_dataset_with_noise(
    resolution: usize,
    m: usize,
    count: usize,
    seed: u64,
    noise: f64,
) -> Result<LabeledDataset> {
    if !TILE_RESOLUTIONS.contains(&resolution) {
        return Err(Error::invalid(format!(
            "tile resolution must be one of {TILE_RESOLUTIONS:?}, got {resolution}"
        )));
    }
    if !(1..=MAX_TILE_CLASSES).contains(&m) {
        return Err(Error::invalid(format!("tile datasets support 1..=8 subcategories, got {m}")));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid("tile noise must lie in [0, 1]"));
    }
    let templates: Vec<Vec<f64>> = (0..m).map(|k| tile_template(k, resolution)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count * resolution * resolution * 3);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let k = rng.random_range(0..m);
        for &v in &templates[k] {
            let n = if noise > 0.0 {
                rng.random_range(-noise..=noise)
            } else {
                0.0
            };
            samples.push((v + n).clamp(-1.0, 1.0));
        }
        labels.push(k as u32);
    }
    let names = TILE_NAMES[..m].iter().map(|s| s.to_string()).collect();
    let mut ds = LabeledDataset::new(
        "tiles",
        DatasetMode::TileImage { resolution },
        names,
        samples,
        labels,
        Normalization::identity(),
    )?;
    ds.tile_noise = Some(noise);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_range() {
        let ds = tile_image_dataset(8, 5, 2000, 1).unwrap();
        assert_eq!(ds.len(), 2000);
        assert_eq!(ds.samples().len(), 2000 * 8 * 8 * 3);
        assert!(ds.samples().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn unsupported_resolution_rejected() {
        assert!(tile_image_dataset(32, 5, 10, 1).is_err());
        assert!(tile_image_dataset(8, 9, 10, 1).is_err());
    }

    #[test]
    fn same_seed_same_tiles() {
        assert_eq!(
            tile_image_dataset(4, 3, 100, 9).unwrap(),
            tile_image_dataset(4, 3, 100, 9).unwrap()
        );
    }

    #[test]
    fn templates_are_distinct() {
        for a in 0..8 {
            for b in a + 1..8 {
                assert_ne!(tile_template(a, 4), tile_template(b, 4));
            }
        }
    }
}
