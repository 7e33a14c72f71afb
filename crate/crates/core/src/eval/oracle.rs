use crate::error::{Error, Result};
use crate::synthdata::{tile_template, DatasetMode, LabeledDataset, MixtureSpec};

/// Automatic stand-in for a human judge: assigns a sample to the
/// subcategory it most resembles. Deterministic and total; ties go to the
/// lowest index.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleClassifier {
    NearestCenter(MixtureSpec),
    /// Matches per-channel means against each class's colour-cube corner.
    TileDecoder { resolution: usize, m: usize },
}

fn argmin(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (k, s) in scores.enumerate() {
        if s < best_score {
            best = k;
            best_score = s;
        }
    }
    best
}

impl OracleClassifier {
    pub fn for_dataset(dataset: &LabeledDataset) -> Result<Self> {
        match dataset.mode {
            DatasetMode::Vector2d => dataset
                .mixture
                .clone()
                .map(OracleClassifier::NearestCenter)
                .ok_or_else(|| Error::invalid("vector dataset carries no mixture spec")),
            DatasetMode::TileImage { resolution } => Ok(OracleClassifier::TileDecoder {
                resolution,
                m: dataset.subcategories(),
            }),
        }
    }

    pub fn subcategories(&self) -> usize {
        match self {
            OracleClassifier::NearestCenter(spec) => spec.modes(),
            OracleClassifier::TileDecoder { m, .. } => *m,
        }
    }

    pub fn sample_len(&self) -> usize {
        match self {
            OracleClassifier::NearestCenter(_) => 2,
            OracleClassifier::TileDecoder { resolution, .. } => resolution * resolution * 3,
        }
    }

    pub fn classify(&self, sample: &[f64]) -> Result<usize> {
        if sample.len() != self.sample_len() {
            return Err(Error::ShapeMismatch {
                context: "oracle input",
                expected: vec![self.sample_len()],
                actual: vec![sample.len()],
            });
        }
        Ok(match self {
            OracleClassifier::NearestCenter(spec) => argmin(
                spec.centers
                    .iter()
                    .map(|c| (sample[0] - c[0]).powi(2) + (sample[1] - c[1]).powi(2)),
            ),
            OracleClassifier::TileDecoder { resolution, m } => {
                let means = channel_means(sample);
                let signatures = (0..*m).map(|k| channel_means(&tile_template(k, *resolution)));
                argmin(signatures.map(|s| {
                    s.iter().zip(&means).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                }))
            }
        })
    }

    /// Classifies each row of a flat `[rows, sample_len]` buffer.
    pub fn classify_all(&self, samples: &[f64]) -> Result<Vec<usize>> {
        samples
            .chunks(self.sample_len())
            .map(|s| self.classify(s))
            .collect()
    }
}

fn channel_means(pixels: &[f64]) -> [f64; 3] {
    let mut sums = [0.0; 3];
    for px in pixels.chunks_exact(3) {
        for (s, v) in sums.iter_mut().zip(px) {
            *s += v;
        }
    }
    let n = (pixels.len() / 3) as f64;
    sums.map(|s| s / n)
}
