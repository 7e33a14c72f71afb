#![allow(dead_code)]

//! Independent oracles shared by the integration suites.

use guidegan::nn::{Activation, LayerSpec, MlpNetwork};
use guidegan::Tensor;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sequential net with mixed activations and at most 1,000 parameters.
pub fn random_net(rng: &mut ChaCha8Rng) -> MlpNetwork {
    loop {
        let depth = rng.random_range(1..=4);
        let mut dims = vec![rng.random_range(1..=8)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..=12));
        }
        let acts = [
            Activation::LeakyRelu(0.2),
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Identity,
        ];
        let specs: Vec<LayerSpec> = dims
            .windows(2)
            .map(|w| {
                LayerSpec::new(w[0], w[1], *acts.choose(rng).unwrap())
                    .with_equalized(rng.random_bool(0.5))
                    .with_pixel_norm(w[1] > 1 && rng.random_bool(0.3))
            })
            .collect();
        let net = MlpNetwork::new(&specs, rng).unwrap();
        if net.param_count() <= 1000 {
            return net;
        }
    }
}

fn leaky_signs(net: &MlpNetwork, x: &Tensor) -> Vec<bool> {
    let (_, tape) = net.forward(x).unwrap();
    net.layers()
        .iter()
        .zip(tape.preactivations())
        .filter(|(l, _)| matches!(l.activation(), Activation::LeakyRelu(_)))
        .flat_map(|(_, pre)| pre.iter().map(|&z| z >= 0.0))
        .collect()
}

fn weighted_sum(net: &MlpNetwork, x: &Tensor, w: &[f64]) -> f64 {
    let out = net.infer(x).unwrap();
    out.data().iter().zip(w).map(|(a, b)| a * b).sum()
}

pub struct FdReport {
    pub probes: usize,
    pub skipped_kinks: usize,
    pub worst_relative_error: f64,
}

/// Compares analytic parameter and input gradients of `Σ w ⊙ net(x)` against
/// central finite differences with step `h` at `probes` random coordinates.
/// Probes whose ±h perturbation flips a leaky-ReLU branch are skipped, since
/// the difference quotient is not a derivative there.
pub fn finite_difference_check(
    net: &MlpNetwork,
    rng: &mut ChaCha8Rng,
    probes: usize,
    h: f64,
) -> FdReport {
    let rows = rng.random_range(1..=3);
    let x = Tensor::new(
        vec![rows, net.in_dim()],
        (0..rows * net.in_dim()).map(|_| rng.random_range(-1.5..1.5)).collect(),
    )
    .unwrap();
    let w: Vec<f64> = (0..rows * net.out_dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let (_, tape) = net.forward(&x).unwrap();
    let up = Tensor::new(vec![rows, net.out_dim()], w.clone()).unwrap();
    let (grads, gx) = net.backward(&tape, &up).unwrap();
    let analytic_params = grads.flat();
    let params = net.flat_params();
    let specs = net.specs();
    let base_signs = leaky_signs(net, &x);

    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..probes {
        let on_input = rng.random_bool(0.2);
        let (numeric, analytic, plus_signs, minus_signs) = if on_input {
            let i = rng.random_range(0..x.len());
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            (
                (weighted_sum(net, &xp, &w) - weighted_sum(net, &xm, &w)) / (2.0 * h),
                gx.data()[i],
                leaky_signs(net, &xp),
                leaky_signs(net, &xm),
            )
        } else {
            let i = rng.random_range(0..params.len());
            let mut pp = params.clone();
            pp[i] += h;
            let mut pm = params.clone();
            pm[i] -= h;
            let np = MlpNetwork::from_specs_and_params(&specs, &pp).unwrap();
            let nm = MlpNetwork::from_specs_and_params(&specs, &pm).unwrap();
            (
                (weighted_sum(&np, &x, &w) - weighted_sum(&nm, &x, &w)) / (2.0 * h),
                analytic_params[i],
                leaky_signs(&np, &x),
                leaky_signs(&nm, &x),
            )
        };
        if plus_signs != base_signs || minus_signs != base_signs {
            skipped += 1;
            continue;
        }
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    FdReport {
        probes,
        skipped_kinks: skipped,
        worst_relative_error: worst,
    }
}

/// Straight-line re-evaluation of a network from its raw parts, sharing no
/// code with `MlpNetwork::forward`.
pub fn reference_forward(net: &MlpNetwork, x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    for (layer, spec) in net.layers().iter().zip(net.specs()) {
        let scale = if spec.equalized {
            (2.0 / spec.in_dim as f64).sqrt()
        } else {
            1.0
        };
        let mut next = Vec::with_capacity(spec.out_dim);
        for o in 0..spec.out_dim {
            let mut z = layer.bias()[o];
            let mut acc = 0.0;
            for i in 0..spec.in_dim {
                acc += layer.weights()[o * spec.in_dim + i] * v[i];
            }
            z += scale * acc;
            next.push(match spec.activation {
                Activation::LeakyRelu(s) => {
                    if z >= 0.0 {
                        z
                    } else {
                        s * z
                    }
                }
                Activation::Tanh => z.tanh(),
                Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                Activation::Identity => z,
            });
        }
        if spec.pixel_norm {
            let ms = next.iter().map(|a| a * a).sum::<f64>() / next.len() as f64;
            let s = (ms + 1e-8).sqrt();
            next.iter_mut().for_each(|a| *a /= s);
        }
        v = next;
    }
    v
}

/// Two-pass mean and population standard deviation, column by column.
pub fn brute_mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mu = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for j in 0..d {
        let mut s = 0.0;
        for r in rows {
            s += r[j];
        }
        mu[j] = s / n;
        let mut q = 0.0;
        for r in rows {
            q += (r[j] - mu[j]) * (r[j] - mu[j]);
        }
        sd[j] = (q / n).sqrt();
    }
    (mu, sd)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Seeds and sizes of the 5-mode mixture testbed shared by the pipeline
/// and acceptance suites.
pub mod testbed {
    use guidegan::gan::{train, GanArch, GanModel, TrainConfig};
    use guidegan::inversion::{train_encoder, EncoderArch, EncoderHistory, EncoderModel, EncoderTrainConfig};
    use guidegan::synthdata::{gaussian_mixture_dataset, LabeledDataset, MixtureSpec};

    pub const DATA_SEED: u64 = 3;
    pub const DATA_COUNT: usize = 10_000;
    pub const LATENT_DIM: usize = 8;
    pub const GAN_SEED: u64 = 11;
    pub const GAN_STEPS: usize = 20_000;
    pub const ENCODER_SEED: u64 = 5;
    pub const ENCODER_PAIRS: usize = 50_000;

    pub struct Testbed {
        pub spec: MixtureSpec,
        pub data: LabeledDataset,
        pub gan: GanModel,
        pub encoder: EncoderModel,
        pub encoder_history: EncoderHistory,
    }

    pub fn build() -> Testbed {
        let spec = MixtureSpec::default();
        let data = gaussian_mixture_dataset(&spec, DATA_COUNT, DATA_SEED).unwrap();
        let config = TrainConfig {
            total_steps: GAN_STEPS,
            seed: GAN_SEED,
            ..TrainConfig::default()
        };
        let gan = GanModel::new_vector(LATENT_DIM, 2, GanArch::default(), GAN_SEED).unwrap();
        let (gan, _) = train(gan, &data, &config).unwrap();
        let encoder = EncoderModel::new(&gan, EncoderArch::default(), ENCODER_SEED).unwrap();
        let config = EncoderTrainConfig {
            pairs: ENCODER_PAIRS,
            epochs: 4,
            seed: ENCODER_SEED,
            ..EncoderTrainConfig::default()
        };
        let (encoder, encoder_history) = train_encoder(encoder, &gan, &config).unwrap();
        Testbed {
            spec,
            data,
            gan,
            encoder,
            encoder_history,
        }
    }
}

/// Index of the nearest center, lowest index on ties.
pub fn nearest_center(centers: &[[f64; 2]], x: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..centers.len() {
        let d = |c: [f64; 2]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        if d(centers[k]) < d(centers[best]) {
            best = k;
        }
    }
    best
}

/// Shannon entropy (nats) of a histogram.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// Nearest-neighbour upsampling of `y, x, c` images, written out longhand.
pub fn upsample_oracle(img: &[f64], res: usize) -> Vec<f64> {
    let mut out = vec![0.0; 4 * res * res * 3];
    for y in 0..2 * res {
        for x in 0..2 * res {
            for c in 0..3 {
                out[(y * 2 * res + x) * 3 + c] = img[((y / 2) * res + x / 2) * 3 + c];
            }
        }
    }
    out
}
