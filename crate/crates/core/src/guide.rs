//! Subcategory guidance: encode a few exemplars, summarize them as a
//! per-dimension Gaussian prototype and sample that prototype to drive the
//! frozen generator.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gan::{GanModel, LatentVector};
use crate::inversion::EncoderModel;
use crate::io::structext::Document;
use crate::io::{atomic_write, join_f64, parse_f64_list};
use crate::synthdata::Normalization;
use crate::tensor::Tensor;

pub const DEFAULT_ALPHA: f64 = 2.5;
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;
const PROTOTYPE_SCHEMA: &str = "1";

/// Exemplars of one subcategory, all of one shape, in data space.
#[derive(Clone, Debug, PartialEq)]
pub struct ExemplarBatch {
    sample_shape: Vec<usize>,
    samples: Vec<Vec<f64>>,
    pub label: Option<usize>,
}

impl ExemplarBatch {
    pub fn new(samples: Vec<Vec<f64>>, sample_shape: Vec<usize>, label: Option<usize>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("exemplar batch needs at least one sample"));
        }
        let len: usize = sample_shape.iter().product();
        if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != len) {
            return Err(Error::SampleShape {
                index,
                expected: sample_shape,
                actual: vec![s.len()],
            });
        }
        Ok(Self {
            sample_shape,
            samples,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Copy mapped through `norm` into the generator's space.
    pub fn normalized(&self, norm: &Normalization) -> Self {
        let f: usize = self.sample_shape.iter().product();
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut s = s.clone();
                norm.normalize(&mut s, f);
                s
            })
            .collect();
        Self {
            sample_shape: self.sample_shape.clone(),
            samples,
            label: self.label,
        }
    }
}

/// `N × d` encoded exemplars.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExemplars {
    dim: usize,
    vectors: Vec<f64>,
}

impl EncodedExemplars {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = Tensor::from_rows(rows)?;
        Ok(Self {
            dim: t.features(),
            vectors: t.into_data(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.vectors.iter().skip(j).step_by(self.dim).copied().collect()
    }
}

/// Encodes every exemplar (already in model space). The batched forward is
/// row-independent, so row `i` equals `encode(sample i)` bitwise.
pub fn encode_exemplars(encoder: &EncoderModel, batch: &ExemplarBatch) -> Result<EncodedExemplars> {
    let len = encoder.sample_len();
    if let Some((index, s)) = batch.samples.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(Error::SampleShape {
            index,
            expected: encoder.sample_shape().to_vec(),
            actual: vec![s.len()],
        });
    }
    let x = Tensor::from_rows(&batch.samples)?;
    let out = encoder.encode_batch(&x)?;
    Ok(EncodedExemplars {
        dim: encoder.latent_dim(),
        vectors: out.into_data(),
    })
}

/// Per-dimension mean and spread of a subcategory's encoded exemplars.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeVector {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub alpha: f64,
    pub n_exemplars: usize,
    pub label: Option<usize>,
    /// Lower bound applied to each `sigma_j` when sampling; 0 disables it.
    pub sigma_floor: f64,
}

/// Order-independent sum: values are sorted by total order, then added
/// with Neumaier compensation. Any permutation of the input gives the same
/// bits.
fn stable_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `mu_j` is the mean and `sigma_j` the population standard deviation
/// (divide by `N`) of column `j`.
pub fn build_prototype(encoded: &EncodedExemplars, alpha: f64) -> Result<PrototypeVector> {
    if encoded.is_empty() {
        return Err(Error::invalid("cannot build a prototype from zero exemplars"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let n = encoded.len() as f64;
    let mut mu = Vec::with_capacity(encoded.dim());
    let mut sigma = Vec::with_capacity(encoded.dim());
    for j in 0..encoded.dim() {
        let col = encoded.column(j);
        let m = stable_sum(col.clone()) / n;
        let var = stable_sum(col.iter().map(|v| (v - m) * (v - m)).collect()) / n;
        mu.push(m);
        sigma.push(var.sqrt());
    }
    Ok(PrototypeVector {
        mu,
        sigma,
        alpha,
        n_exemplars: encoded.len(),
        label: None,
        sigma_floor: DEFAULT_SIGMA_FLOOR,
    })
}

impl PrototypeVector {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn with_sigma_floor(mut self, floor: f64) -> Self {
        self.sigma_floor = floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() || self.mu.len() != self.sigma.len() {
            return Err(Error::invalid("prototype mu and sigma must share a positive length"));
        }
        if self.sigma.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::invalid("prototype sigma must be non-negative"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("prototype alpha must be positive"));
        }
        if !(self.sigma_floor >= 0.0) {
            return Err(Error::invalid("sigma floor must be non-negative"));
        }
        Ok(())
    }

    /// Standard deviation actually used for component `j`.
    pub fn sampling_std(&self, j: usize) -> f64 {
        self.alpha * self.sigma[j].max(self.sigma_floor)
    }

    /// `count` vectors with component `j` drawn from
    /// `N(mu_j, (alpha * sigma_j)^2)`, independently per component.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<LatentVector>> {
        self.validate()?;
        if count == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let std: Vec<f64> = (0..self.dim()).map(|j| self.sampling_std(j)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                LatentVector::new(
                    self.mu
                        .iter()
                        .zip(&std)
                        .map(|(m, s)| {
                            let n: f64 = StandardNormal.sample(&mut rng);
                            m + s * n
                        })
                        .collect(),
                )
            })
            .collect())
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document {
            comments: vec!["subcategory prototype vector".into()],
            ..Document::default()
        };
        let s = doc.section_mut("prototype");
        s.set("schema", PROTOTYPE_SCHEMA)
            .set(
                "label",
                self.label.map_or_else(|| "none".to_string(), |l| l.to_string()),
            )
            .set("n_exemplars", self.n_exemplars)
            .set("alpha", format!("{:?}", self.alpha))
            .set("sigma_floor", format!("{:?}", self.sigma_floor))
            .set("dim", self.dim())
            .set("mu", join_f64(&self.mu))
            .set("sigma", join_f64(&self.sigma));
        doc
    }

    pub fn from_document(doc: &Document) -> std::result::Result<Self, String> {
        let get = |k: &str| {
            doc.get("prototype", k)
                .ok_or_else(|| format!("prototype record missing {k:?}"))
        };
        if get("schema")? != PROTOTYPE_SCHEMA {
            return Err("unsupported prototype schema".into());
        }
        let num = |k: &str| -> std::result::Result<f64, String> {
            get(k)?.parse().map_err(|_| format!("bad {k}"))
        };
        let label = match get("label")? {
            "none" => None,
            v => Some(v.parse().map_err(|_| "bad label".to_string())?),
        };
        let p = PrototypeVector {
            mu: parse_f64_list(get("mu")?)?,
            sigma: parse_f64_list(get("sigma")?)?,
            alpha: num("alpha")?,
            n_exemplars: get("n_exemplars")?.parse().map_err(|_| "bad n_exemplars")?,
            label,
            sigma_floor: num("sigma_floor")?,
        };
        let dim: usize = get("dim")?.parse().map_err(|_| "bad dim")?;
        if dim != p.mu.len() {
            return Err("dim does not match mu".into());
        }
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_document().to_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc = Document::parse(&text).map_err(|m| Error::format(path, m))?;
        Self::from_document(&doc).map_err(|m| Error::format(path, m))
    }
}

pub fn sample_prototype(proto: &PrototypeVector, count: usize, seed: u64) -> Result<Vec<LatentVector>> {
    proto.sample(count, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuideOutput {
    /// Generated samples in data space, `[count, sample_len]`.
    pub samples: Tensor,
    pub latents: Vec<LatentVector>,
    pub prototype: PrototypeVector,
    /// Set when the encoder was trained against a different generator.
    pub provenance_warning: Option<String>,
}

/// Full guidance pipeline: normalize and encode the exemplars, build the
/// prototype, sample `count` latents from it and generate. Neither model is
/// written to.
pub fn guide(
    gan: &GanModel,
    encoder: &EncoderModel,
    batch: &ExemplarBatch,
    alpha: f64,
    count: usize,
    seed: u64,
) -> Result<GuideOutput> {
    if count == 0 {
        return Err(Error::invalid("guide count must be at least 1"));
    }
    let provenance_warning = (encoder.provenance != gan.provenance_id()).then(|| {
        format!(
            "encoder was trained against generator {} but this generator is {}",
            encoder.provenance,
            gan.provenance_id()
        )
    });
    let normalized = batch.normalized(&gan.normalization);
    let encoded = encode_exemplars(encoder, &normalized)?;
    let mut prototype = build_prototype(&encoded, alpha)?;
    prototype.label = batch.label;
    let latents = prototype.sample(count, seed)?;
    let samples = generate_from(gan, &latents)?;
    Ok(GuideOutput {
        samples,
        latents,
        prototype,
        provenance_warning,
    })
}

/// Generates from explicit latents and maps the result to data space.
pub fn generate_from(gan: &GanModel, latents: &[LatentVector]) -> Result<Tensor> {
    let rows: Vec<&[f64]> = latents.iter().map(LatentVector::as_slice).collect();
    let z = Tensor::from_rows(&rows)?;
    if z.features() != gan.latent_dim() {
        return Err(Error::ShapeMismatch {
            context: "latent batch",
            expected: vec![gan.latent_dim()],
            actual: vec![z.features()],
        });
    }
    let mut out = gan.generate_batch(&z)?;
    gan.denormalize(out.data_mut());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_give_zero_sigma() {
        let e = EncodedExemplars::from_rows(&vec![vec![0.5, -1.0, 3.0]; 7]).unwrap();
        let p = build_prototype(&e, DEFAULT_ALPHA).unwrap();
        assert_eq!(p.mu, vec![0.5, -1.0, 3.0]);
        assert_eq!(p.sigma, vec![0.0; 3]);
        assert_eq!(p.alpha, 2.5);
        assert_eq!(p.n_exemplars, 7);
    }

    #[test]
    fn two_row_example() {
        let e = EncodedExemplars::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let p = build_prototype(&e, 1.0).unwrap();
        assert_eq!(p.mu, vec![1.0, 1.0]);
        assert_eq!(p.sigma, vec![1.0, 1.0]);
    }

    #[test]
    fn invalid_alpha_rejected() {
        let e = EncodedExemplars::from_rows(&[vec![0.0]]).unwrap();
        assert!(build_prototype(&e, 0.0).is_err());
        assert!(build_prototype(&e, -1.0).is_err());
        assert!(build_prototype(&e, f64::NAN).is_err());
    }

    #[test]
    fn degenerate_prototype_samples_mu() {
        let p = PrototypeVector {
            mu: vec![1.0, -2.0],
            sigma: vec![0.0, 0.0],
            alpha: 2.5,
            n_exemplars: 1,
            label: None,
            sigma_floor: 0.0,
        };
        for z in p.sample(10, 3).unwrap() {
            assert_eq!(z.as_slice(), &[1.0, -2.0]);
        }
        assert!(p.sample(0, 3).is_err());
        assert_eq!(p.sample(5, 1).unwrap(), p.sample(5, 1).unwrap());
    }

    #[test]
    fn floor_keeps_sampling_non_degenerate() {
        let e = EncodedExemplars::from_rows(&[vec![4.0]]).unwrap();
        let p = build_prototype(&e, 2.5).unwrap();
        let z = p.sample(2, 0).unwrap();
        assert_ne!(z[0], z[1]);
        assert!((z[0].as_slice()[0] - 4.0).abs() < 1e-4);
    }

    #[test]
    fn record_round_trip() {
        let p = PrototypeVector {
            mu: vec![0.1, -3.25e-7],
            sigma: vec![1.0 / 3.0, 0.0],
            alpha: 2.5,
            n_exemplars: 64,
            label: Some(2),
            sigma_floor: 1e-6,
        };
        let back = PrototypeVector::from_document(&Document::parse(&p.to_document().to_string()).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn ragged_batch_names_index() {
        let err = ExemplarBatch::new(vec![vec![0.0; 2], vec![0.0; 3]], vec![2], None).unwrap_err();
        assert!(matches!(err, Error::SampleShape { index: 1, .. }));
    }

    #[test]
    fn stable_sum_ignores_order() {
        let a = vec![1e16, 1.0, -1e16, 3.5, 1e-3, -7.25];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(stable_sum(a).to_bits(), stable_sum(b).to_bits());
    }
}
