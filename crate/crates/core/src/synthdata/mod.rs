//! Label-controlled synthetic datasets and a local image-directory loader.

mod datafile;
mod mixture;
mod ppm;
mod tiles;

pub use datafile::{read_data_file, write_data_file, DataFile};
pub use mixture::{gaussian_mixture_dataset, MixtureSpec};
pub use ppm::{decode_ppm, encode_ppm, load_image_directory, Pixmap};
pub use tiles::{tile_image_dataset, tile_image_dataset_with_noise, tile_template, TILE_NOISE};

use std::fmt;

use crate::error::{Error, Result};
use crate::io::{join_f64, parse_f64_list};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubcategoryLabel {
    pub index: usize,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetMode {
    Vector2d,
    TileImage { resolution: usize },
}

impl DatasetMode {
    pub fn sample_shape(self) -> Vec<usize> {
        match self {
            DatasetMode::Vector2d => vec![2],
            DatasetMode::TileImage { resolution } => vec![resolution, resolution, 3],
        }
    }
}

impl fmt::Display for DatasetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetMode::Vector2d => f.write_str("vector2d"),
            DatasetMode::TileImage { resolution } => write!(f, "tile_image{resolution}"),
        }
    }
}

impl std::str::FromStr for DatasetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "vector2d" {
            return Ok(DatasetMode::Vector2d);
        }
        s.strip_prefix("tile_image")
            .and_then(|r| r.parse().ok())
            .map(|resolution| DatasetMode::TileImage { resolution })
            .ok_or_else(|| Error::invalid(format!("unknown dataset mode {s:?}")))
    }
}

/// Per-feature affine map into the training range: `(x - shift) / scale`.
/// Length-1 vectors broadcast over every feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            shift: vec![0.0],
            scale: vec![1.0],
        }
    }

    /// Per-feature mean and population standard deviation of `samples`
    /// (`features` values per row). Constant features get scale 1.
    pub fn fit(samples: &[f64], features: usize) -> Self {
        let rows = samples.len() / features;
        let mut shift = vec![0.0; features];
        let mut scale = vec![0.0; features];
        for r in samples.chunks_exact(features) {
            for (s, v) in shift.iter_mut().zip(r) {
                *s += v;
            }
        }
        shift.iter_mut().for_each(|s| *s /= rows as f64);
        for r in samples.chunks_exact(features) {
            for ((q, v), m) in scale.iter_mut().zip(r).zip(&shift) {
                *q += (v - m) * (v - m);
            }
        }
        for q in &mut scale {
            let sd = (*q / rows as f64).sqrt();
            *q = if sd > 0.0 { sd } else { 1.0 };
        }
        Self { shift, scale }
    }

    pub fn validate(&self, features: usize) -> Result<()> {
        for (name, v) in [("shift", &self.shift), ("scale", &self.scale)] {
            if v.len() != 1 && v.len() != features {
                return Err(Error::invalid(format!(
                    "normalization {name} has {} entries for {features} features",
                    v.len()
                )));
            }
        }
        if self.scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("normalization scale must be positive"));
        }
        Ok(())
    }

    fn at(v: &[f64], j: usize) -> f64 {
        if v.len() == 1 {
            v[0]
        } else {
            v[j]
        }
    }

    /// Normalizes rows of `features` values in place.
    pub fn normalize(&self, data: &mut [f64], features: usize) {
        for row in data.chunks_exact_mut(features) {
            for (j, x) in row.iter_mut().enumerate() {
                *x = (*x - Self::at(&self.shift, j)) / Self::at(&self.scale, j);
            }
        }
    }

    pub fn denormalize(&self, data: &mut [f64], features: usize) {
        for row in data.chunks_exact_mut(features) {
            for (j, x) in row.iter_mut().enumerate() {
                *x = *x * Self::at(&self.scale, j) + Self::at(&self.shift, j);
            }
        }
    }

    pub(crate) fn to_fields(&self, out: &mut Vec<(String, String)>) {
        out.push(("norm_shift".into(), join_f64(&self.shift)));
        out.push(("norm_scale".into(), join_f64(&self.scale)));
    }

    pub(crate) fn from_strs(shift: &str, scale: &str) -> std::result::Result<Self, String> {
        Ok(Self {
            shift: parse_f64_list(shift)?,
            scale: parse_f64_list(scale)?,
        })
    }
}

/// Samples of one category partitioned into `m` labeled subcategories.
/// Samples are stored in data space; `normalization` maps them into the
/// range the networks are trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub category: String,
    pub mode: DatasetMode,
    pub label_names: Vec<String>,
    samples: Vec<f64>,
    labels: Vec<u32>,
    pub normalization: Normalization,
    /// Generating spec for mixture datasets; the nearest-center oracle needs it.
    pub mixture: Option<MixtureSpec>,
    /// Noise amplitude for tile datasets.
    pub tile_noise: Option<f64>,
}

impl LabeledDataset {
    pub fn new(
        category: impl Into<String>,
        mode: DatasetMode,
        label_names: Vec<String>,
        samples: Vec<f64>,
        labels: Vec<u32>,
        normalization: Normalization,
    ) -> Result<Self> {
        let features = mode.sample_shape().iter().product::<usize>();
        if samples.len() != labels.len() * features {
            return Err(Error::invalid(format!(
                "{} sample values for {} labels of {features} features",
                samples.len(),
                labels.len()
            )));
        }
        if label_names.is_empty() {
            return Err(Error::invalid("dataset needs at least one subcategory"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= label_names.len()) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {} subcategories",
                label_names.len()
            )));
        }
        normalization.validate(features)?;
        Ok(Self {
            category: category.into(),
            mode,
            label_names,
            samples,
            labels,
            normalization,
            mixture: None,
            tile_noise: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subcategories(&self) -> usize {
        self.label_names.len()
    }

    pub fn label(&self, index: usize) -> SubcategoryLabel {
        SubcategoryLabel {
            index,
            name: self.label_names[index].clone(),
        }
    }

    pub fn sample_shape(&self) -> Vec<usize> {
        self.mode.sample_shape()
    }

    pub fn features(&self) -> usize {
        self.sample_shape().iter().product()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let f = self.features();
        &self.samples[i * f..(i + 1) * f]
    }

    /// Indices of the samples labeled `label`, in dataset order.
    pub fn indices_of(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l as usize == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// All samples mapped through the dataset normalization.
    pub fn normalized_samples(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        self.normalization.normalize(&mut s, self.features());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn normalization_round_trips(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..40)
        ) {
            let flat: Vec<f64> = rows.concat();
            let norm = Normalization::fit(&flat, 3);
            let mut x = flat.clone();
            norm.normalize(&mut x, 3);
            norm.denormalize(&mut x, 3);
            for (a, b) in x.iter().zip(&flat) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mode_strings() {
        for m in [DatasetMode::Vector2d, DatasetMode::TileImage { resolution: 8 }] {
            assert_eq!(m.to_string().parse::<DatasetMode>().unwrap(), m);
        }
        assert_eq!(DatasetMode::TileImage { resolution: 4 }.sample_shape(), vec![4, 4, 3]);
    }

    #[test]
    fn out_of_range_label_rejected() {
        let r = LabeledDataset::new(
            "c",
            DatasetMode::Vector2d,
            vec!["a".into(), "b".into()],
            vec![0.0; 4],
            vec![0, 2],
            Normalization::identity(),
        );
        assert!(r.is_err());
    }
}
