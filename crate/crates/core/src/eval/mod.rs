//! Automated evaluation: oracle subcategory identification with confusion
//! matrices, the unguided chance baseline, a discriminator-based realism
//! proxy and the exemplar-count sweep.

mod confusion;
mod oracle;

pub use confusion::ConfusionMatrix;
pub use oracle::OracleClassifier;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gan::GanModel;
use crate::guide::{generate_from, guide, ExemplarBatch, DEFAULT_ALPHA};
use crate::inversion::{derive_seed, EncoderModel};
use crate::io::structext::Document;
use crate::io::join_f64;
use crate::synthdata::LabeledDataset;
use crate::tensor::Tensor;

pub const REPORT_SCHEMA: &str = "1";
pub const DEFAULT_PER_CLASS_COUNT: usize = 200;

/// Draws `n` distinct exemplars of subcategory `label` from `dataset`.
pub fn draw_exemplars(dataset: &LabeledDataset, label: usize, n: usize, seed: u64) -> Result<ExemplarBatch> {
    let mut idx = dataset.indices_of(label);
    if n == 0 || idx.len() < n {
        return Err(Error::InsufficientExemplars {
            label,
            available: idx.len(),
            required: n.max(1),
        });
    }
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let samples = idx[..n].iter().map(|&i| dataset.sample(i).to_vec()).collect();
    ExemplarBatch::new(samples, dataset.sample_shape(), Some(label))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentificationConfig {
    pub n_exemplars: usize,
    pub alpha: f64,
    pub per_class_count: usize,
    pub seed: u64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        Self {
            n_exemplars: 64,
            alpha: DEFAULT_ALPHA,
            per_class_count: DEFAULT_PER_CLASS_COUNT,
            seed: 17,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Identification {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// Guided samples in data space, class by class.
    pub samples: Vec<f64>,
    pub requested: Vec<u32>,
    pub provenance_warning: Option<String>,
}

/// For every subcategory: draw exemplars, guide, and let the oracle judge
/// the generated samples.
pub fn subcategory_identification(
    gan: &GanModel,
    encoder: &EncoderModel,
    dataset: &LabeledDataset,
    oracle: &OracleClassifier,
    config: &IdentificationConfig,
) -> Result<Identification> {
    let m = dataset.subcategories();
    if oracle.subcategories() != m {
        return Err(Error::invalid("oracle and dataset disagree on the subcategory count"));
    }
    if config.per_class_count == 0 {
        return Err(Error::invalid("per-class count must be positive"));
    }
    for k in 0..m {
        let available = dataset.indices_of(k).len();
        if available < config.n_exemplars.max(1) {
            return Err(Error::InsufficientExemplars {
                label: k,
                available,
                required: config.n_exemplars.max(1),
            });
        }
    }
    let mut confusion = ConfusionMatrix::new(m);
    let mut samples = Vec::new();
    let mut requested = Vec::new();
    let mut provenance_warning = None;
    for k in 0..m {
        let batch = draw_exemplars(dataset, k, config.n_exemplars, derive_seed(config.seed, 2 * k as u64))?;
        let out = guide(
            gan,
            encoder,
            &batch,
            config.alpha,
            config.per_class_count,
            derive_seed(config.seed, 2 * k as u64 + 1),
        )?;
        for row in out.samples.row_iter() {
            confusion.record(k, oracle.classify(row)?);
        }
        samples.extend_from_slice(out.samples.data());
        requested.extend(std::iter::repeat_n(k as u32, config.per_class_count));
        provenance_warning = provenance_warning.or(out.provenance_warning);
    }
    Ok(Identification {
        accuracy: confusion.accuracy(),
        confusion,
        samples,
        requested,
        provenance_warning,
    })
}

/// Chance baseline: each subcategory "request" is served by plain prior
/// samples, so row `k` measures how often the generator happens to land in
/// `k`.
pub fn unguided_baseline(
    gan: &GanModel,
    oracle: &OracleClassifier,
    per_class_count: usize,
    seed: u64,
) -> Result<(ConfusionMatrix, Vec<f64>)> {
    if per_class_count == 0 {
        return Err(Error::invalid("per-class count must be positive"));
    }
    let m = oracle.subcategories();
    let mut confusion = ConfusionMatrix::new(m);
    let mut samples = Vec::new();
    for k in 0..m {
        let z = gan.sample_prior(per_class_count, derive_seed(seed, k as u64));
        let x = generate_from(gan, &z)?;
        for row in x.row_iter() {
            confusion.record(k, oracle.classify(row)?);
        }
        samples.extend_from_slice(x.data());
    }
    Ok((confusion, samples))
}

/// Mean discriminator score of data-space samples (flat rows of the
/// generator's sample length). A stand-in for human realism ratings, not a
/// quality measure in its own right.
pub fn realism_proxy(gan: &GanModel, samples: &[f64]) -> Result<f64> {
    let len = gan.sample_len();
    if samples.is_empty() {
        return Err(Error::invalid("realism proxy needs at least one sample"));
    }
    if samples.len() % len != 0 {
        return Err(Error::ShapeMismatch {
            context: "realism proxy input",
            expected: vec![len],
            actual: vec![samples.len()],
        });
    }
    let mut x = samples.to_vec();
    gan.normalize(&mut x);
    let rows = x.len() / len;
    let scores = gan.discriminate(&Tensor::new(vec![rows, len], x)?)?;
    Ok(scores.iter().sum::<f64>() / rows as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub proxies: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl SweepRow {
    pub fn accuracy(&self) -> (f64, f64) {
        mean_std(&self.accuracies)
    }

    pub fn proxy(&self) -> (f64, f64) {
        mean_std(&self.proxies)
    }
}

/// Guided accuracy and realism proxy for each exemplar count and seed.
#[allow(clippy::too_many_arguments)]
pub fn n_sweep(
    gan: &GanModel,
    encoder: &EncoderModel,
    dataset: &LabeledDataset,
    oracle: &OracleClassifier,
    n_values: &[usize],
    seeds: &[u64],
    alpha: f64,
    per_class_count: usize,
) -> Result<Vec<SweepRow>> {
    if n_values.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one N and one seed"));
    }
    n_values
        .iter()
        .map(|&n| {
            let mut row = SweepRow {
                n,
                seeds: seeds.to_vec(),
                accuracies: Vec::new(),
                proxies: Vec::new(),
            };
            for &seed in seeds {
                let cfg = IdentificationConfig {
                    n_exemplars: n,
                    alpha,
                    per_class_count,
                    seed,
                };
                let id = subcategory_identification(gan, encoder, dataset, oracle, &cfg)?;
                row.accuracies.push(id.accuracy);
                row.proxies.push(realism_proxy(gan, &id.samples)?);
            }
            Ok(row)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub identification: IdentificationConfig,
    pub unguided_per_class: usize,
    pub sweep_n: Vec<usize>,
    pub sweep_seeds: Vec<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            identification: IdentificationConfig::default(),
            unguided_per_class: DEFAULT_PER_CLASS_COUNT,
            sweep_n: vec![16, 64, 256],
            sweep_seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub label_names: Vec<String>,
    pub identification: Identification,
    pub guided_proxy: f64,
    pub unguided: ConfusionMatrix,
    pub unguided_proxy: f64,
    pub real_proxy: f64,
    pub sweep: Vec<SweepRow>,
    pub generator_checksum: String,
    pub encoder_checksum: String,
}

/// Runs the identification test, the chance baseline, the realism proxies
/// and (when configured) the sweep. Models are only read.
pub fn evaluate(
    gan: &GanModel,
    encoder: &EncoderModel,
    dataset: &LabeledDataset,
    config: &EvalConfig,
) -> Result<EvalReport> {
    let oracle = OracleClassifier::for_dataset(dataset)?;
    let identification = subcategory_identification(gan, encoder, dataset, &oracle, &config.identification)?;
    let guided_proxy = realism_proxy(gan, &identification.samples)?;
    let (unguided, unguided_samples) = unguided_baseline(
        gan,
        &oracle,
        config.unguided_per_class,
        derive_seed(config.identification.seed, u64::MAX),
    )?;
    let unguided_proxy = realism_proxy(gan, &unguided_samples)?;
    let real_rows = dataset.len().min(config.unguided_per_class * dataset.subcategories());
    let real_proxy = realism_proxy(gan, &dataset.samples()[..real_rows * dataset.features()])?;
    let sweep = if config.sweep_n.is_empty() {
        Vec::new()
    } else {
        n_sweep(
            gan,
            encoder,
            dataset,
            &oracle,
            &config.sweep_n,
            &config.sweep_seeds,
            config.identification.alpha,
            config.identification.per_class_count,
        )?
    };
    Ok(EvalReport {
        config: config.clone(),
        label_names: dataset.label_names.clone(),
        identification,
        guided_proxy,
        unguided,
        unguided_proxy,
        real_proxy,
        sweep,
        generator_checksum: gan.checksum(),
        encoder_checksum: encoder.checksum(),
    })
}

fn join_u64(values: &[u64]) -> String {
    values.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

impl EvalReport {
    pub fn to_document(&self) -> Document {
        let mut doc = Document {
            comments: vec!["evaluation report".into()],
            ..Document::default()
        };
        let id = &self.config.identification;
        doc.section_mut("report")
            .set("schema", REPORT_SCHEMA)
            .set("subcategories", self.unguided.size())
            .set("label_names", self.label_names.join(","))
            .set("generator_checksum", &self.generator_checksum)
            .set("encoder_checksum", &self.encoder_checksum);
        doc.section_mut("config")
            .set("n_exemplars", id.n_exemplars)
            .set("alpha", format!("{:?}", id.alpha))
            .set("per_class_count", id.per_class_count)
            .set("seed", id.seed)
            .set("unguided_per_class", self.config.unguided_per_class)
            .set(
                "sweep_n",
                self.config.sweep_n.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            )
            .set("sweep_seeds", join_u64(&self.config.sweep_seeds));
        let s = doc.section_mut("guided");
        s.set("accuracy", format!("{:?}", self.identification.accuracy))
            .set("diagonally_dominant", self.identification.confusion.diagonally_dominant())
            .set("realism_proxy", format!("{:?}", self.guided_proxy));
        for (k, row) in self.identification.confusion.percent().iter().enumerate() {
            s.set(format!("confusion_row{k}"), join_f64(row));
        }
        let s = doc.section_mut("unguided");
        s.set("accuracy", format!("{:?}", self.unguided.accuracy()))
            .set("realism_proxy", format!("{:?}", self.unguided_proxy));
        for (k, row) in self.unguided.percent().iter().enumerate() {
            s.set(format!("confusion_row{k}"), join_f64(row));
        }
        doc.section_mut("real")
            .set("realism_proxy", format!("{:?}", self.real_proxy));
        for row in &self.sweep {
            let (am, asd) = row.accuracy();
            let (pm, psd) = row.proxy();
            doc.section_mut(&format!("sweep.n{}", row.n))
                .set("n", row.n)
                .set("seeds", join_u64(&row.seeds))
                .set("accuracies", join_f64(&row.accuracies))
                .set("realism_proxies", join_f64(&row.proxies))
                .set("accuracy_mean", format!("{am:?}"))
                .set("accuracy_std", format!("{asd:?}"))
                .set("realism_proxy_mean", format!("{pm:?}"))
                .set("realism_proxy_std", format!("{psd:?}"));
        }
        doc
    }

    /// Human-readable summary with aligned confusion tables.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "guided accuracy {:.4} (N={}, alpha={}), realism proxy {:.4}\n",
            self.identification.accuracy,
            self.config.identification.n_exemplars,
            self.config.identification.alpha,
            self.guided_proxy
        );
        out.push_str(&self.identification.confusion.to_table(&self.label_names));
        out.push_str(&format!(
            "unguided accuracy {:.4}, realism proxy {:.4}; real data proxy {:.4}\n",
            self.unguided.accuracy(),
            self.unguided_proxy,
            self.real_proxy
        ));
        out.push_str(&self.unguided.to_table(&self.label_names));
        for row in &self.sweep {
            let (am, asd) = row.accuracy();
            let (pm, psd) = row.proxy();
            out.push_str(&format!(
                "N={:<5} accuracy {am:.4} ± {asd:.4}  realism proxy {pm:.4} ± {psd:.4}\n",
                row.n
            ));
        }
        out
    }
}
