use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetMode, LabeledDataset, Normalization};
use crate::error::{Error, Result};

/// Isotropic 2-D Gaussian mixture with one mode per subcategory.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    pub centers: Vec<[f64; 2]>,
    pub std: f64,
    pub weights: Vec<f64>,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self::pentagon(4.0, 0.3)
    }
}

impl MixtureSpec {
    /// Five equally weighted modes on a regular pentagon.
    pub fn pentagon(radius: f64, std: f64) -> Self {
        Self::regular_polygon(5, radius, std)
    }

    pub fn regular_polygon(m: usize, radius: f64, std: f64) -> Self {
        let centers = (0..m)
            .map(|k| {
                let a = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Self {
            centers,
            std,
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn modes(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::invalid("mixture needs at least one mode"));
        }
        if self.weights.len() != self.centers.len() {
            return Err(Error::invalid("one weight per mixture mode required"));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if !(self.std >= 0.0) || !self.std.is_finite() {
            return Err(Error::invalid("mixture std must be finite and non-negative"));
        }
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                let d = distance(self.centers[i], self.centers[j]);
                if d < 6.0 * self.std || d == 0.0 {
                    return Err(Error::invalid(format!(
                        "modes {i} and {j} are {d:.3} apart, below 6 x std = {:.3}",
                        6.0 * self.std
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Draws `count` labeled points, each from a weight-selected mode.
pub fn gaussian_mixture_dataset(spec: &MixtureSpec, count: usize, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let m = spec.modes();
    if count < m {
        return Err(Error::invalid(format!(
            "count {count} is smaller than the {m} mixture modes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(&spec.weights).map_err(|e| Error::invalid(e.to_string()))?;
    let mut samples = Vec::with_capacity(count * 2);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let k = pick.sample(&mut rng);
        let c = spec.centers[k];
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        samples.push(c[0] + spec.std * nx);
        samples.push(c[1] + spec.std * ny);
        labels.push(k as u32);
    }
    let normalization = Normalization::fit(&samples, 2);
    let names = (0..m).map(|k| format!("mode{k}")).collect();
    let mut ds = LabeledDataset::new(
        "mixture2d",
        DatasetMode::Vector2d,
        names,
        samples,
        labels,
        normalization,
    )?;
    ds.mixture = Some(spec.clone());
    Ok(ds)
}
