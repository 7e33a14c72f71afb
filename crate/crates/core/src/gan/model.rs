use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::resample::{downsample, downsample_adjoint, upsample, upsample_adjoint};
use crate::error::{Error, Result};
use crate::nn::{Activation, Gradients, LayerSpec, MlpNetwork, Tape};
use crate::synthdata::Normalization;
use crate::tensor::Tensor;

pub const BASE_RESOLUTION: usize = 4;
pub const IMAGE_CHANNELS: usize = 3;

/// A point in the generator's input space.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `count` independent N(0, I) draws of dimension `dim`.
pub fn sample_standard_normal(dim: usize, count: usize, seed: u64) -> Vec<LatentVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| LatentVector((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()))
        .collect()
}

/// What the generator emits: flat vectors, or RGB images that grow from
/// 4×4 up to `max_resolution`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Vector { dim: usize },
    Image { max_resolution: usize },
}

impl SampleMode {
    pub fn max_stage(self) -> usize {
        match self {
            SampleMode::Vector { .. } => 0,
            SampleMode::Image { max_resolution } => {
                (max_resolution / BASE_RESOLUTION).trailing_zeros() as usize
            }
        }
    }

    pub fn resolution(self, stage: usize) -> usize {
        BASE_RESOLUTION << stage
    }

    pub fn shape_at(self, stage: usize) -> Vec<usize> {
        match self {
            SampleMode::Vector { dim } => vec![dim],
            SampleMode::Image { .. } => {
                let r = self.resolution(stage);
                vec![r, r, IMAGE_CHANNELS]
            }
        }
    }

    pub fn len_at(self, stage: usize) -> usize {
        self.shape_at(stage).iter().product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanArch {
    pub hidden: usize,
    /// Hidden layers in the generator base and discriminator trunk.
    pub depth: usize,
    pub leaky_slope: f64,
    pub pixel_norm: bool,
    pub equalized: bool,
}

impl Default for GanArch {
    fn default() -> Self {
        Self {
            hidden: 64,
            depth: 2,
            leaky_slope: 0.2,
            pixel_norm: true,
            equalized: true,
        }
    }
}

impl GanArch {
    fn lrelu(&self) -> Activation {
        Activation::LeakyRelu(self.leaky_slope)
    }

    fn hidden_layer(&self, in_dim: usize, pixel_norm: bool) -> LayerSpec {
        LayerSpec::new(in_dim, self.hidden, self.lrelu())
            .with_equalized(self.equalized)
            .with_pixel_norm(pixel_norm && self.pixel_norm)
    }

    fn generator_base(&self, latent_dim: usize) -> Vec<LayerSpec> {
        let mut specs = vec![self.hidden_layer(latent_dim, true)];
        for _ in 1..self.depth {
            specs.push(self.hidden_layer(self.hidden, true));
        }
        specs
    }

    fn generator_head(&self, out: usize, act: Activation) -> Vec<LayerSpec> {
        vec![LayerSpec::new(self.hidden, out, act).with_equalized(self.equalized)]
    }

    fn discriminator_trunk(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        for _ in 1..self.depth {
            specs.push(self.hidden_layer(self.hidden, false));
        }
        specs.push(LayerSpec::new(self.hidden, 1, Activation::Sigmoid).with_equalized(self.equalized));
        specs
    }
}

fn scaled(t: &Tensor, s: f64) -> Tensor {
    t.scale(s)
}

fn blend(old: &[f64], new: &[f64], fade: f64) -> Vec<f64> {
    old.iter()
        .zip(new)
        .map(|(o, n)| (1.0 - fade) * o + fade * n)
        .collect()
}

fn add_into(acc: &mut Tensor, other: &Tensor) {
    for (a, b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a += b;
    }
}

fn back(
    net: &MlpNetwork,
    tape: &Tape,
    upstream: &Tensor,
    want_params: bool,
    from_logits: bool,
) -> Result<(Option<Gradients>, Tensor)> {
    match (want_params, from_logits) {
        (true, false) => net.backward(tape, upstream).map(|(g, x)| (Some(g), x)),
        (true, true) => net.backward_preactivation(tape, upstream).map(|(g, x)| (Some(g), x)),
        (false, false) => net.input_grad(tape, upstream).map(|x| (None, x)),
        (false, true) => net.input_grad_preactivation(tape, upstream).map(|x| (None, x)),
    }
}

/// Generator as a list of sequential networks in growth order:
/// `[base, head₀, block₁, head₁, block₂, head₂, …]`. Stage `s` maps the
/// base features through blocks `1..=s` and emits through head `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    nets: Vec<MlpNetwork>,
}

pub struct GeneratorTape {
    base: Tape,
    blocks: Vec<Tape>,
    head_new: Tape,
    head_old: Option<Tape>,
    stage: usize,
    fade: f64,
    old_res: usize,
}

impl Generator {
    pub fn networks(&self) -> &[MlpNetwork] {
        &self.nets
    }

    pub(crate) fn networks_mut(&mut self) -> &mut [MlpNetwork] {
        &mut self.nets
    }

    fn head(&self, stage: usize) -> &MlpNetwork {
        &self.nets[2 * stage + 1]
    }

    fn block(&self, stage: usize) -> &MlpNetwork {
        &self.nets[2 * stage]
    }

    pub fn forward(
        &self,
        mode: SampleMode,
        z: &Tensor,
        stage: usize,
        fade: f64,
    ) -> Result<(Tensor, GeneratorTape)> {
        let rows = z.rows();
        let (mut h, base) = self.nets[0].forward(z)?;
        let mut blocks = Vec::with_capacity(stage);
        let mut before_last = None;
        for s in 1..=stage {
            if s == stage {
                before_last = Some(h.clone());
            }
            let (next, t) = self.block(s).forward(&h)?;
            blocks.push(t);
            h = next;
        }
        let (new, head_new) = self.head(stage).forward(&h)?;
        let old_res = if stage > 0 { mode.resolution(stage - 1) } else { 0 };
        let (out, head_old) = match before_last {
            Some(prev) if fade < 1.0 => {
                let (old, t) = self.head(stage - 1).forward(&prev)?;
                let up = upsample(old.data(), old_res);
                (blend(&up, new.data(), fade), Some(t))
            }
            _ => (new.into_data(), None),
        };
        let out = Tensor::new(vec![rows, mode.len_at(stage)], out)?.check_finite("generate")?;
        Ok((
            out,
            GeneratorTape {
                base,
                blocks,
                head_new,
                head_old,
                stage,
                fade,
                old_res,
            },
        ))
    }

    /// Parameter gradients aligned with [`networks`](Self::networks)
    /// (`None` for networks off the active path) and the latent gradient.
    pub fn backward(
        &self,
        tape: &GeneratorTape,
        upstream: &Tensor,
    ) -> Result<(Vec<Option<Gradients>>, Tensor)> {
        let stage = tape.stage;
        let mut grads: Vec<Option<Gradients>> = vec![None; self.nets.len()];
        let fade = if tape.head_old.is_some() { tape.fade } else { 1.0 };
        let (g, mut gh) = back(self.head(stage), &tape.head_new, &scaled(upstream, fade), true, false)?;
        grads[2 * stage + 1] = g;
        for s in (1..=stage).rev() {
            let (g, mut gin) = back(self.block(s), &tape.blocks[s - 1], &gh, true, false)?;
            grads[2 * s] = g;
            if s == stage {
                if let Some(old_tape) = &tape.head_old {
                    let g_up = scaled(upstream, 1.0 - tape.fade);
                    let g_old = upsample_adjoint(g_up.data(), tape.old_res);
                    let g_old = Tensor::new(vec![upstream.rows(), g_old.len() / upstream.rows()], g_old)?;
                    let (g, gin_old) = back(self.head(s - 1), old_tape, &g_old, true, false)?;
                    grads[2 * s - 1] = g;
                    add_into(&mut gin, &gin_old);
                }
            }
            gh = gin;
        }
        let (g, gz) = back(&self.nets[0], &tape.base, &gh, true, false)?;
        grads[0] = g;
        Ok((grads, gz))
    }
}

/// Discriminator as `[trunk, input₀, block₁, input₁, …]`. Stage `s` reads
/// an image through input `s`, reduces it through blocks `s, s-1, …, 1`
/// and scores it with the trunk, whose last layer is a sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    nets: Vec<MlpNetwork>,
}

pub struct DiscriminatorTape {
    input_new: Tape,
    block_new: Option<Tape>,
    input_old: Option<Tape>,
    blocks: Vec<Tape>,
    trunk: Tape,
    stage: usize,
    fade: f64,
    old_res: usize,
}

impl DiscriminatorTape {
    pub fn logits(&self) -> &[f64] {
        self.trunk.last_preactivation()
    }
}

impl Discriminator {
    pub fn networks(&self) -> &[MlpNetwork] {
        &self.nets
    }

    pub(crate) fn networks_mut(&mut self) -> &mut [MlpNetwork] {
        &mut self.nets
    }

    fn input(&self, stage: usize) -> &MlpNetwork {
        &self.nets[2 * stage + 1]
    }

    fn block(&self, stage: usize) -> &MlpNetwork {
        &self.nets[2 * stage]
    }

    /// Probabilities `D(x)` as a `[rows, 1]` tensor.
    pub fn forward(
        &self,
        mode: SampleMode,
        x: &Tensor,
        stage: usize,
        fade: f64,
    ) -> Result<(Tensor, DiscriminatorTape)> {
        let rows = x.rows();
        let (mut h, input_new) = self.input(stage).forward(x)?;
        let block_new = if stage > 0 {
            let (next, t) = self.block(stage).forward(&h)?;
            h = next;
            Some(t)
        } else {
            None
        };
        let old_res = if stage > 0 { mode.resolution(stage - 1) } else { 0 };
        let input_old = if stage > 0 && fade < 1.0 {
            let down = downsample(x.data(), old_res);
            let down = Tensor::new(vec![rows, mode.len_at(stage - 1)], down)?;
            let (old, t) = self.input(stage - 1).forward(&down)?;
            h = Tensor::new(h.shape().to_vec(), blend(old.data(), h.data(), fade))?;
            Some(t)
        } else {
            None
        };
        let mut blocks = Vec::new();
        for k in (1..stage).rev() {
            let (next, t) = self.block(k).forward(&h)?;
            blocks.push(t);
            h = next;
        }
        let (p, trunk) = self.nets[0].forward(&h)?;
        Ok((
            p,
            DiscriminatorTape {
                input_new,
                block_new,
                input_old,
                blocks,
                trunk,
                stage,
                fade,
                old_res,
            },
        ))
    }

    /// Backpropagates a gradient given on the logits (`[rows, 1]`).
    pub fn backward_logits(
        &self,
        tape: &DiscriminatorTape,
        upstream: &Tensor,
        want_params: bool,
    ) -> Result<(Vec<Option<Gradients>>, Tensor)> {
        let stage = tape.stage;
        let mut grads: Vec<Option<Gradients>> = vec![None; self.nets.len()];
        let (g, mut gh) = back(&self.nets[0], &tape.trunk, upstream, want_params, true)?;
        grads[0] = g;
        for k in 1..stage {
            let t = &tape.blocks[stage - 1 - k];
            let (g, gin) = back(self.block(k), t, &gh, want_params, false)?;
            grads[2 * k] = g;
            gh = gin;
        }
        let mut gx_old = None;
        if let Some(old_tape) = &tape.input_old {
            let (g, gd) = back(self.input(stage - 1), old_tape, &scaled(&gh, 1.0 - tape.fade), want_params, false)?;
            grads[2 * stage - 1] = g;
            gx_old = Some(downsample_adjoint(gd.data(), tape.old_res));
            gh = scaled(&gh, tape.fade);
        }
        if let Some(block_tape) = &tape.block_new {
            let (g, gin) = back(self.block(stage), block_tape, &gh, want_params, false)?;
            grads[2 * stage] = g;
            gh = gin;
        }
        let (g, mut gx) = back(self.input(stage), &tape.input_new, &gh, want_params, false)?;
        grads[2 * stage + 1] = g;
        if let Some(extra) = gx_old {
            for (a, b) in gx.data_mut().iter_mut().zip(extra) {
                *a += b;
            }
        }
        Ok((grads, gx))
    }
}

/// Paired generator and discriminator with their growth state and the data
/// normalization the pair was trained under. The generator works in the
/// normalized space.
#[derive(Clone, Debug, PartialEq)]
pub struct GanModel {
    pub(crate) generator: Generator,
    pub(crate) discriminator: Discriminator,
    latent_dim: usize,
    mode: SampleMode,
    arch: GanArch,
    stage: usize,
    fade: f64,
    seed: u64,
    pub normalization: Normalization,
}

impl GanModel {
    pub fn new_vector(latent_dim: usize, sample_dim: usize, arch: GanArch, seed: u64) -> Result<Self> {
        Self::build(latent_dim, SampleMode::Vector { dim: sample_dim }, arch, seed)
    }

    pub fn new_image(latent_dim: usize, max_resolution: usize, arch: GanArch, seed: u64) -> Result<Self> {
        if max_resolution < BASE_RESOLUTION || !max_resolution.is_power_of_two() {
            return Err(Error::invalid(format!(
                "max resolution must be a power of two >= {BASE_RESOLUTION}, got {max_resolution}"
            )));
        }
        Self::build(latent_dim, SampleMode::Image { max_resolution }, arch, seed)
    }

    fn build(latent_dim: usize, mode: SampleMode, arch: GanArch, seed: u64) -> Result<Self> {
        if latent_dim == 0 || arch.hidden == 0 || arch.depth == 0 {
            return Err(Error::invalid("latent dim, hidden width and depth must be positive"));
        }
        if let SampleMode::Vector { dim: 0 } = mode {
            return Err(Error::invalid("sample dimension must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head_act = Self::head_activation(mode);
        let base = MlpNetwork::new(&arch.generator_base(latent_dim), &mut rng)?;
        let head = MlpNetwork::new(&arch.generator_head(mode.len_at(0), head_act), &mut rng)?;
        let trunk = MlpNetwork::new(&arch.discriminator_trunk(), &mut rng)?;
        let input = MlpNetwork::new(&[arch.hidden_layer(mode.len_at(0), false)], &mut rng)?;
        let features = mode.len_at(mode.max_stage());
        let normalization = Normalization::identity();
        normalization.validate(features)?;
        Ok(Self {
            generator: Generator {
                nets: vec![base, head],
            },
            discriminator: Discriminator {
                nets: vec![trunk, input],
            },
            latent_dim,
            mode,
            arch,
            stage: 0,
            fade: 1.0,
            seed,
            normalization,
        })
    }

    /// Reassembles a model from checkpointed parts.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        generator: Vec<MlpNetwork>,
        discriminator: Vec<MlpNetwork>,
        latent_dim: usize,
        mode: SampleMode,
        arch: GanArch,
        stage: usize,
        fade: f64,
        seed: u64,
        normalization: Normalization,
    ) -> Result<Self> {
        let expected = 2 * stage + 2;
        if generator.len() != expected || discriminator.len() != expected {
            return Err(Error::invalid(format!(
                "stage {stage} needs {expected} generator and discriminator networks"
            )));
        }
        if stage > mode.max_stage() {
            return Err(Error::invalid("stage beyond the mode's maximum resolution"));
        }
        if generator[0].in_dim() != latent_dim {
            return Err(Error::invalid("generator base does not accept the latent dimension"));
        }
        let model = Self {
            generator: Generator { nets: generator },
            discriminator: Discriminator { nets: discriminator },
            latent_dim,
            mode,
            arch,
            stage,
            fade,
            seed,
            normalization,
        };
        // a forward pass validates every shape along the active path
        let z = Tensor::zeros(vec![1, latent_dim]);
        let x = model.generate_batch(&z)?;
        model.discriminate(&x)?;
        Ok(model)
    }

    fn head_activation(mode: SampleMode) -> Activation {
        match mode {
            SampleMode::Vector { .. } => Activation::Identity,
            SampleMode::Image { .. } => Activation::Tanh,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    pub fn arch(&self) -> GanArch {
        self.arch
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Blend weight of the newest layers; 1 outside a fade-in.
    pub fn fade(&self) -> f64 {
        self.fade
    }

    pub fn set_fade(&mut self, fade: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&fade) {
            return Err(Error::invalid(format!("fade weight {fade} outside [0, 1]")));
        }
        self.fade = fade;
        Ok(())
    }

    pub fn resolution(&self) -> Option<usize> {
        match self.mode {
            SampleMode::Vector { .. } => None,
            SampleMode::Image { .. } => Some(self.mode.resolution(self.stage)),
        }
    }

    pub fn sample_shape(&self) -> Vec<usize> {
        self.mode.shape_at(self.stage)
    }

    pub fn sample_len(&self) -> usize {
        self.mode.len_at(self.stage)
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn sample_prior(&self, count: usize, seed: u64) -> Vec<LatentVector> {
        sample_standard_normal(self.latent_dim, count, seed)
    }

    /// `G(z)` for one latent, in the model's normalized space.
    pub fn generate(&self, z: &LatentVector) -> Result<Tensor> {
        if z.dim() != self.latent_dim {
            return Err(Error::ShapeMismatch {
                context: "latent vector",
                expected: vec![self.latent_dim],
                actual: vec![z.dim()],
            });
        }
        let batch = Tensor::new(vec![1, self.latent_dim], z.as_slice().to_vec())?;
        self.generate_batch(&batch)?.reshape(self.sample_shape())
    }

    /// `G(z)` for a `[rows, d]` batch, returned as `[rows, sample_len]`.
    pub fn generate_batch(&self, z: &Tensor) -> Result<Tensor> {
        Ok(self.generator_forward(z)?.0)
    }

    pub fn generator_forward(&self, z: &Tensor) -> Result<(Tensor, GeneratorTape)> {
        if z.features() != self.latent_dim {
            return Err(Error::ShapeMismatch {
                context: "latent batch",
                expected: vec![z.rows(), self.latent_dim],
                actual: z.shape().to_vec(),
            });
        }
        self.generator.forward(self.mode, z, self.stage, self.fade)
    }

    /// `D(x)` for each row of `x` (`[rows, sample_len]`, normalized space).
    pub fn discriminate(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.discriminator_forward(x)?.0.into_data())
    }

    pub fn discriminator_forward(&self, x: &Tensor) -> Result<(Tensor, DiscriminatorTape)> {
        if x.features() != self.sample_len() {
            return Err(Error::ShapeMismatch {
                context: "discriminator input",
                expected: vec![x.rows(), self.sample_len()],
                actual: x.shape().to_vec(),
            });
        }
        self.discriminator.forward(self.mode, x, self.stage, self.fade)
    }

    /// Adds the layers for the next resolution with fade weight 0. Existing
    /// parameters are carried over untouched and stay trainable.
    pub fn grow(&self) -> Result<GanModel> {
        let SampleMode::Image { max_resolution } = self.mode else {
            return Err(Error::invalid("grow is only defined for image mode"));
        };
        if self.stage >= self.mode.max_stage() {
            return Err(Error::invalid(format!(
                "already at the maximum resolution {max_resolution}"
            )));
        }
        let next = self.stage + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(next as u64)));
        let a = &self.arch;
        let g_block = MlpNetwork::new(&[a.hidden_layer(a.hidden, true)], &mut rng)?;
        let g_head = MlpNetwork::new(
            &a.generator_head(self.mode.len_at(next), Self::head_activation(self.mode)),
            &mut rng,
        )?;
        let d_block = MlpNetwork::new(&[a.hidden_layer(a.hidden, false)], &mut rng)?;
        let d_input = MlpNetwork::new(&[a.hidden_layer(self.mode.len_at(next), false)], &mut rng)?;
        let mut grown = self.clone();
        grown.generator.nets.extend([g_block, g_head]);
        grown.discriminator.nets.extend([d_block, d_input]);
        grown.stage = next;
        grown.fade = 0.0;
        Ok(grown)
    }

    pub fn generator_params(&self) -> Vec<f64> {
        self.generator.nets.iter().flat_map(|n| n.flat_params()).collect()
    }

    pub fn discriminator_params(&self) -> Vec<f64> {
        self.discriminator.nets.iter().flat_map(|n| n.flat_params()).collect()
    }

    /// SHA-256 over every parameter (generator then discriminator).
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in self.generator_params().iter().chain(&self.discriminator_params()) {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Identifier of the generator: a digest of its layer specs, growth
    /// state and parameters.
    pub fn provenance_id(&self) -> String {
        let mut h = Sha256::new();
        for net in &self.generator.nets {
            for s in net.specs() {
                h.update(s.to_string().as_bytes());
            }
        }
        h.update(self.stage.to_le_bytes());
        h.update(self.fade.to_le_bytes());
        for v in self.generator_params() {
            h.update(v.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Maps data-space samples (rows of `sample_len`) into model space.
    pub fn normalize(&self, data: &mut [f64]) {
        self.normalization.normalize(data, self.sample_len());
    }

    pub fn denormalize(&self, data: &mut [f64]) {
        self.normalization.denormalize(data, self.sample_len());
    }
}
