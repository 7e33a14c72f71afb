use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::loss::{sigmoid, softplus, LossVariant};
use super::model::{GanModel, SampleMode};
use super::resample::{downsample, upsample};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Gradients, MlpNetwork};
use crate::synthdata::{DatasetMode, LabeledDataset};
use crate::tensor::Tensor;

/// Losses above this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_steps: usize,
    /// Image mode grows one resolution every this many steps.
    pub steps_per_stage: usize,
    /// Share of each grown stage spent fading the new layers in.
    pub fade_fraction: f64,
    pub seed: u64,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub beta1: f64,
    pub variant: LossVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            total_steps: 20_000,
            steps_per_stage: 2_000,
            fade_fraction: 0.5,
            seed: 11,
            lr_generator: 3e-4,
            lr_discriminator: 1.5e-4,
            beta1: 0.5,
            variant: LossVariant::NonSaturating,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.fade_fraction) {
            return Err(Error::invalid("fade fraction must lie in [0, 1)"));
        }
        if self.steps_per_stage == 0 {
            return Err(Error::invalid("steps per stage must be positive"));
        }
        if !(self.lr_generator > 0.0 && self.lr_discriminator > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::invalid("beta1 must lie in [0, 1)"));
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            beta1: self.beta1,
            ..AdamConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub loss_d: f64,
    pub loss_g: f64,
    pub mean_d_real: f64,
    pub mean_d_fake: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub stage: usize,
    pub fade: f64,
    pub metrics: StepMetrics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrowEvent {
    pub step: usize,
    pub from_resolution: usize,
    pub to_resolution: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub records: Vec<StepRecord>,
    pub grow_events: Vec<GrowEvent>,
}

/// Training stopped early; carries the history up to the failure.
#[derive(Debug)]
pub struct TrainFailure<H> {
    pub error: Error,
    pub history: H,
}

impl<H: fmt::Debug> fmt::Display for TrainFailure<H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl<H: fmt::Debug> std::error::Error for TrainFailure<H> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn apply_updates(
    nets: &mut [MlpNetwork],
    opts: &mut [Adam],
    grads: &[Option<Gradients>],
) -> Result<()> {
    for ((net, opt), g) in nets.iter_mut().zip(opts.iter_mut()).zip(grads) {
        if let Some(g) = g {
            opt.step_network(net, g)?;
        }
    }
    Ok(())
}

/// Owns a model while it trains, with one Adam state per network.
pub struct Trainer {
    model: GanModel,
    config: TrainConfig,
    opt_g: Vec<Adam>,
    opt_d: Vec<Adam>,
    rng: ChaCha8Rng,
    step: usize,
}

impl Trainer {
    pub fn new(model: GanModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut t = Self {
            model,
            config,
            opt_g: Vec::new(),
            opt_d: Vec::new(),
            rng,
            step: 0,
        };
        t.sync_optimizers()?;
        Ok(t)
    }

    fn sync_optimizers(&mut self) -> Result<()> {
        let g_cfg = self.config.adam(self.config.lr_generator);
        let d_cfg = self.config.adam(self.config.lr_discriminator);
        for net in &self.model.generator.networks()[self.opt_g.len()..] {
            self.opt_g.push(Adam::for_network(g_cfg, net)?);
        }
        for net in &self.model.discriminator.networks()[self.opt_d.len()..] {
            self.opt_d.push(Adam::for_network(d_cfg, net)?);
        }
        Ok(())
    }

    pub fn model(&self) -> &GanModel {
        &self.model
    }

    pub fn into_model(self) -> GanModel {
        self.model
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn grow(&mut self) -> Result<()> {
        self.model = self.model.grow()?;
        self.sync_optimizers()
    }

    pub fn set_fade(&mut self, fade: f64) -> Result<()> {
        self.model.set_fade(fade)
    }

    fn latent_batch(&mut self, rows: usize) -> Result<Tensor> {
        let d = self.model.latent_dim();
        let data = (0..rows * d).map(|_| self.rng.sample(StandardNormal)).collect();
        Tensor::new(vec![rows, d], data)
    }

    /// One discriminator update on `real_batch` plus an equally sized fake
    /// batch, then one generator update through the just-updated
    /// discriminator. Reported probabilities come from the discriminator
    /// before its update.
    pub fn train_step(&mut self, real_batch: &Tensor) -> Result<StepMetrics> {
        let (loss_d, mean_d_real, mean_d_fake) = self.discriminator_step(real_batch)?;
        let loss_g = self.generator_step()?;
        self.step += 1;
        Ok(StepMetrics {
            loss_d,
            loss_g,
            mean_d_real,
            mean_d_fake,
        })
    }

    fn check(&self, name: &str, v: f64) -> Result<()> {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                step: self.step,
                reason: format!("{name} = {v}"),
            });
        }
        Ok(())
    }

    /// Discriminator half of a step: returns the loss and the mean scores
    /// of the real and fake halves. Generator parameters are not touched.
    pub fn discriminator_step(&mut self, real_batch: &Tensor) -> Result<(f64, f64, f64)> {
        let b = self.config.batch_size;
        let len = self.model.sample_len();
        if real_batch.rows() != b || real_batch.features() != len {
            return Err(Error::ShapeMismatch {
                context: "real batch",
                expected: vec![b, len],
                actual: real_batch.shape().to_vec(),
            });
        }
        let z = self.latent_batch(b)?;
        let fake = self.model.generate_batch(&z)?;
        let mut both = real_batch.data().to_vec();
        both.extend_from_slice(fake.data());
        let both = Tensor::new(vec![2 * b, len], both)?;
        let step = self.step;
        let (probs, tape) = self
            .model
            .discriminator_forward(&both)
            .map_err(|e| Error::Diverged { step, reason: e.to_string() })?;
        let logits = tape.logits();
        let inv = 1.0 / b as f64;
        let (lr, lf) = logits.split_at(b);
        let loss_d = inv * lr.iter().map(|&l| softplus(-l)).sum::<f64>()
            + inv * lf.iter().map(|&l| softplus(l)).sum::<f64>();
        self.check("loss_D", loss_d)?;
        let mean_d_real = probs.data()[..b].iter().sum::<f64>() * inv;
        let mean_d_fake = probs.data()[b..].iter().sum::<f64>() * inv;
        let up: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(i, &l)| if i < b { (sigmoid(l) - 1.0) * inv } else { sigmoid(l) * inv })
            .collect();
        let (grads, _) = self
            .model
            .discriminator
            .backward_logits(&tape, &Tensor::new(vec![2 * b, 1], up)?, true)?;
        apply_updates(self.model.discriminator.networks_mut(), &mut self.opt_d, &grads)?;
        Ok((loss_d, mean_d_real, mean_d_fake))
    }

    /// Generator half of a step through the current discriminator, which
    /// only supplies input gradients and is not updated.
    pub fn generator_step(&mut self) -> Result<f64> {
        let b = self.config.batch_size;
        let inv = 1.0 / b as f64;
        let z = self.latent_batch(b)?;
        let (fake, g_tape) = self.model.generator_forward(&z)?;
        let step = self.step;
        let (_, d_tape) = self
            .model
            .discriminator_forward(&fake)
            .map_err(|e| Error::Diverged { step, reason: e.to_string() })?;
        let logits = d_tape.logits();
        let (loss_g, up): (f64, Vec<f64>) = match self.config.variant {
            LossVariant::NonSaturating => (
                inv * logits.iter().map(|&l| softplus(-l)).sum::<f64>(),
                logits.iter().map(|&l| (sigmoid(l) - 1.0) * inv).collect(),
            ),
            LossVariant::Minimax => (
                -inv * logits.iter().map(|&l| softplus(l)).sum::<f64>(),
                logits.iter().map(|&l| -sigmoid(l) * inv).collect(),
            ),
        };
        self.check("loss_G", loss_g)?;
        let (_, gx) = self
            .model
            .discriminator
            .backward_logits(&d_tape, &Tensor::new(vec![b, 1], up)?, false)?;
        let (grads, _) = self.model.generator.backward(&g_tape, &gx)?;
        apply_updates(self.model.generator.networks_mut(), &mut self.opt_g, &grads)?;
        Ok(loss_g)
    }
}

/// Real samples of a dataset prepared for every growth stage.
struct StageData {
    per_stage: Vec<Vec<f64>>,
    len: Vec<usize>,
    count: usize,
}

impl StageData {
    fn new(model: &GanModel, dataset: &LabeledDataset) -> Result<Self> {
        let mode = model.mode();
        let compatible = match (mode, dataset.mode) {
            (SampleMode::Vector { dim }, DatasetMode::Vector2d) => dim == 2,
            (SampleMode::Image { max_resolution }, DatasetMode::TileImage { resolution }) => {
                max_resolution == resolution
            }
            _ => false,
        };
        if !compatible {
            return Err(Error::invalid(format!(
                "dataset mode {} does not match model mode {mode:?}",
                dataset.mode
            )));
        }
        let top = mode.max_stage();
        let mut per_stage = vec![Vec::new(); top + 1];
        per_stage[top] = dataset.normalized_samples();
        for s in (0..top).rev() {
            per_stage[s] = downsample(&per_stage[s + 1], mode.resolution(s));
        }
        Ok(Self {
            per_stage,
            len: (0..=top).map(|s| mode.len_at(s)).collect(),
            count: dataset.len(),
        })
    }

    /// Random batch at `stage`; during a fade-in the real images are blended
    /// with their upsampled lower-resolution version the same way the
    /// generator output is.
    fn batch(&self, rng: &mut ChaCha8Rng, rows: usize, mode: SampleMode, stage: usize, fade: f64) -> Result<Tensor> {
        let len = self.len[stage];
        let mut out = Vec::with_capacity(rows * len);
        for _ in 0..rows {
            let i = rng.random_range(0..self.count);
            let x = &self.per_stage[stage][i * len..(i + 1) * len];
            if stage > 0 && fade < 1.0 {
                let low = downsample(x, mode.resolution(stage - 1));
                let up = upsample(&low, mode.resolution(stage - 1));
                out.extend(up.iter().zip(x).map(|(u, v)| (1.0 - fade) * u + fade * v));
            } else {
                out.extend_from_slice(x);
            }
        }
        Tensor::new(vec![rows, len], out)
    }
}

/// Runs the full schedule: a single stage in vector mode; in image mode the
/// model grows every `steps_per_stage` steps until its maximum resolution,
/// fading new layers in over `fade_fraction` of each grown stage.
pub fn train(
    model: GanModel,
    dataset: &LabeledDataset,
    config: &TrainConfig,
) -> std::result::Result<(GanModel, History), TrainFailure<History>> {
    let mut history = History::default();
    let fail = |error: Error, history: History| TrainFailure { error, history };
    if dataset.is_empty() {
        return Err(fail(Error::invalid("dataset is empty"), history));
    }
    let mut model = model;
    model.normalization = dataset.normalization.clone();
    let data = match StageData::new(&model, dataset) {
        Ok(d) => d,
        Err(e) => return Err(fail(e, history)),
    };
    if config.total_steps == 0 {
        if let Err(e) = config.validate() {
            return Err(fail(e, history));
        }
        return Ok((model, history));
    }
    let mut trainer = match Trainer::new(model, config.clone()) {
        Ok(t) => t,
        Err(e) => return Err(fail(e, history)),
    };
    let top = trainer.model().mode().max_stage();
    let fade_len = (config.fade_fraction * config.steps_per_stage as f64).round() as usize;
    for step in 0..config.total_steps {
        let target = (step / config.steps_per_stage).min(top);
        let outcome = (|| -> Result<StepRecord> {
            if target > trainer.model().stage() {
                let from = trainer.model().resolution().unwrap_or(0);
                trainer.grow()?;
                history.grow_events.push(GrowEvent {
                    step,
                    from_resolution: from,
                    to_resolution: trainer.model().resolution().unwrap_or(0),
                });
            }
            let stage = trainer.model().stage();
            if stage > 0 {
                let into = step - stage * config.steps_per_stage;
                let fade = if fade_len == 0 {
                    1.0
                } else {
                    (into as f64 / fade_len as f64).min(1.0)
                };
                trainer.set_fade(fade)?;
            }
            let mode = trainer.model().mode();
            let fade = trainer.model().fade();
            let batch = data.batch(trainer.rng_mut(), config.batch_size, mode, stage, fade)?;
            let metrics = trainer.train_step(&batch)?;
            Ok(StepRecord {
                step,
                stage,
                fade,
                metrics,
            })
        })();
        match outcome {
            Ok(r) => history.records.push(r),
            Err(e) => return Err(fail(e, history)),
        }
    }
    Ok((trainer.into_model(), history))
}
