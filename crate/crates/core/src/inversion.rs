//! Encoder that learns the inverse map of a frozen generator from
//! self-generated `(latent, sample)` pairs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gan::{sample_standard_normal, GanModel, LatentVector, TrainFailure};
use crate::nn::{Activation, Adam, AdamConfig, LayerSpec, MlpNetwork};
use crate::tensor::Tensor;

/// Pair generation works in chunks of this many draws, each seeded from
/// the run seed and its chunk index.
pub const PAIR_CHUNK: usize = 1024;

/// Desk-scale default for the number of training pairs.
pub const DEFAULT_PAIRS: usize = 50_000;

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    latent_dim: usize,
    sample_len: usize,
    latents: Vec<f64>,
    samples: Vec<f64>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.latents.len() / self.latent_dim
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn latent(&self, i: usize) -> &[f64] {
        &self.latents[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.sample_len..(i + 1) * self.sample_len]
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn sample_len(&self) -> usize {
        self.sample_len
    }

    /// Pairs `[from, to)` as a new set.
    pub fn slice(&self, from: usize, to: usize) -> PairSet {
        PairSet {
            latent_dim: self.latent_dim,
            sample_len: self.sample_len,
            latents: self.latents[from * self.latent_dim..to * self.latent_dim].to_vec(),
            samples: self.samples[from * self.sample_len..to * self.sample_len].to_vec(),
        }
    }

    fn gather(&self, idx: &[usize]) -> Result<(Tensor, Vec<f64>)> {
        let mut x = Vec::with_capacity(idx.len() * self.sample_len);
        let mut z = Vec::with_capacity(idx.len() * self.latent_dim);
        for &i in idx {
            x.extend_from_slice(self.sample(i));
            z.extend_from_slice(self.latent(i));
        }
        Ok((Tensor::new(vec![idx.len(), self.sample_len], x)?, z))
    }
}

/// Draws `count` latents from the prior and pairs each with its generated
/// sample. The generator is only read.
pub fn make_training_pairs(gan: &GanModel, count: usize, seed: u64) -> Result<PairSet> {
    if count == 0 {
        return Err(Error::invalid("pair count must be at least 1"));
    }
    let d = gan.latent_dim();
    let mut latents = Vec::with_capacity(count * d);
    let mut samples = Vec::with_capacity(count * gan.sample_len());
    for (chunk, start) in (0..count).step_by(PAIR_CHUNK).enumerate() {
        let n = PAIR_CHUNK.min(count - start);
        let z: Vec<f64> = sample_standard_normal(d, n, derive_seed(seed, chunk as u64))
            .into_iter()
            .flat_map(LatentVector::into_inner)
            .collect();
        let x = gan.generate_batch(&Tensor::new(vec![n, d], z.clone())?)?;
        latents.extend(z);
        samples.extend_from_slice(x.data());
    }
    Ok(PairSet {
        latent_dim: d,
        sample_len: gan.sample_len(),
        latents,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncoderArch {
    pub hidden: usize,
    pub depth: usize,
    pub leaky_slope: f64,
}

impl Default for EncoderArch {
    fn default() -> Self {
        Self {
            hidden: 64,
            depth: 2,
            leaky_slope: 0.2,
        }
    }
}

/// Maps a model-space sample to the latent that would have produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderModel {
    network: MlpNetwork,
    latent_dim: usize,
    sample_shape: Vec<usize>,
    /// Provenance id of the generator this encoder inverts.
    pub provenance: String,
}

impl EncoderModel {
    /// Leaky-ReLU trunk shaped like the discriminator's, with a linear
    /// `d`-dimensional head.
    pub fn new(gan: &GanModel, arch: EncoderArch, seed: u64) -> Result<Self> {
        let act = Activation::LeakyRelu(arch.leaky_slope);
        let mut specs = vec![LayerSpec::new(gan.sample_len(), arch.hidden, act)];
        for _ in 1..arch.depth {
            specs.push(LayerSpec::new(arch.hidden, arch.hidden, act));
        }
        specs.push(LayerSpec::new(arch.hidden, gan.latent_dim(), Activation::Identity));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            network: MlpNetwork::new(&specs, &mut rng)?,
            latent_dim: gan.latent_dim(),
            sample_shape: gan.sample_shape(),
            provenance: gan.provenance_id(),
        })
    }

    pub fn from_network(
        network: MlpNetwork,
        sample_shape: Vec<usize>,
        provenance: String,
    ) -> Result<Self> {
        if network.in_dim() != sample_shape.iter().product::<usize>() {
            return Err(Error::invalid("encoder input does not match the sample shape"));
        }
        Ok(Self {
            latent_dim: network.out_dim(),
            network,
            sample_shape,
            provenance,
        })
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.network
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn encode(&self, sample: &Tensor) -> Result<LatentVector> {
        if sample.len() != self.sample_len() {
            return Err(Error::ShapeMismatch {
                context: "encoder input",
                expected: self.sample_shape.clone(),
                actual: sample.shape().to_vec(),
            });
        }
        let x = Tensor::new(vec![1, self.sample_len()], sample.data().to_vec())?;
        Ok(LatentVector::new(self.network.infer(&x)?.into_data()))
    }

    /// Encodes `[rows, sample_len]` into `[rows, d]`.
    pub fn encode_batch(&self, samples: &Tensor) -> Result<Tensor> {
        self.network.infer(samples)
    }

    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for v in self.network.flat_params() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderTrainConfig {
    pub pairs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub validation_fraction: f64,
}

impl Default for EncoderTrainConfig {
    fn default() -> Self {
        Self {
            pairs: DEFAULT_PAIRS,
            epochs: 4,
            batch_size: 64,
            seed: 5,
            learning_rate: 1e-3,
            validation_fraction: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub train_loss: f64,
    pub validation_mse: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EncoderHistory {
    /// Validation latent MSE of the encoder before any update.
    pub baseline_validation_mse: f64,
    pub epochs: Vec<EpochRecord>,
}

/// Mean squared latent error of `encoder` over `pairs`.
pub fn latent_mse(encoder: &EncoderModel, pairs: &PairSet) -> Result<f64> {
    let per_dim = latent_errors(encoder, pairs)?;
    Ok(per_dim.iter().sum::<f64>() / per_dim.len() as f64)
}

/// Per-dimension mean squared latent error over `pairs`.
pub fn latent_errors(encoder: &EncoderModel, pairs: &PairSet) -> Result<Vec<f64>> {
    let d = encoder.latent_dim();
    let mut acc = vec![0.0; d];
    for start in (0..pairs.len()).step_by(PAIR_CHUNK) {
        let idx: Vec<usize> = (start..(start + PAIR_CHUNK).min(pairs.len())).collect();
        let (x, z) = pairs.gather(&idx)?;
        let out = encoder.encode_batch(&x)?;
        for (row_o, row_z) in out.data().chunks_exact(d).zip(z.chunks_exact(d)) {
            for ((a, o), t) in acc.iter_mut().zip(row_o).zip(row_z) {
                *a += (o - t) * (o - t);
            }
        }
    }
    Ok(acc.into_iter().map(|a| a / pairs.len() as f64).collect())
}

/// Fits the encoder by minibatch Adam on mean squared latent error. The last
/// `validation_fraction` of the generated pairs is held out.
pub fn train_encoder(
    encoder: EncoderModel,
    gan: &GanModel,
    config: &EncoderTrainConfig,
) -> std::result::Result<(EncoderModel, EncoderHistory), TrainFailure<EncoderHistory>> {
    let mut history = EncoderHistory::default();
    macro_rules! tryf {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(TrainFailure { error, history }),
            }
        };
    }
    if encoder.latent_dim() != gan.latent_dim() || encoder.sample_len() != gan.sample_len() {
        return Err(TrainFailure {
            error: Error::invalid("encoder shape does not match the generator"),
            history,
        });
    }
    if config.batch_size == 0 || !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(TrainFailure {
            error: Error::invalid("batch size must be positive and validation fraction in [0, 1)"),
            history,
        });
    }
    let pairs = tryf!(make_training_pairs(gan, config.pairs, config.seed));
    let n_val = ((config.pairs as f64 * config.validation_fraction).round() as usize)
        .clamp(1, config.pairs);
    let n_train = config.pairs - n_val;
    let validation = pairs.slice(n_train, config.pairs);
    let train = pairs.slice(0, n_train);
    history.baseline_validation_mse = tryf!(latent_mse(&encoder, &validation));
    if config.epochs == 0 || n_train == 0 {
        return Ok((encoder, history));
    }

    let mut encoder = encoder;
    let d = encoder.latent_dim();
    let mut opt = tryf!(Adam::for_network(
        AdamConfig::default().with_learning_rate(config.learning_rate),
        &encoder.network,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, u64::MAX));
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(config.batch_size) {
            let (x, z) = tryf!(train.gather(idx));
            let (out, tape) = tryf!(encoder.network.forward(&x));
            let scale = 1.0 / (idx.len() * d) as f64;
            let mut loss = 0.0;
            let grad: Vec<f64> = out
                .data()
                .iter()
                .zip(&z)
                .map(|(o, t)| {
                    let e = o - t;
                    loss += e * e;
                    2.0 * e * scale
                })
                .collect();
            loss *= scale;
            if !loss.is_finite() || loss.abs() > crate::gan::DIVERGENCE_LIMIT {
                return Err(TrainFailure {
                    error: Error::Diverged {
                        step,
                        reason: format!("encoder loss = {loss}"),
                    },
                    history,
                });
            }
            let up = tryf!(Tensor::new(out.shape().to_vec(), grad));
            let (g, _) = tryf!(encoder.network.backward(&tape, &up));
            tryf!(opt.step_network(&mut encoder.network, &g));
            total += loss;
            batches += 1;
            step += 1;
        }
        let validation_mse = tryf!(latent_mse(&encoder, &validation));
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / batches as f64,
            validation_mse,
        });
    }
    Ok((encoder, history))
}
