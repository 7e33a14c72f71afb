use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::activation::rms_inverse;
use super::{Activation, DenseLayer, LayerGrad, PIXEL_NORM_EPSILON};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

fn next_uid() -> u64 {
    NEXT_UID.fetch_add(1, Ordering::Relaxed)
}

/// Construction recipe for one layer; also the textual layer spec stored in
/// checkpoint headers (`in>out:act[:eq][:pn]`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub equalized: bool,
    pub pixel_norm: bool,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            equalized: true,
            pixel_norm: false,
        }
    }

    pub fn with_pixel_norm(mut self, on: bool) -> Self {
        self.pixel_norm = on;
        self
    }

    pub fn with_equalized(mut self, on: bool) -> Self {
        self.equalized = on;
        self
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}:{}", self.in_dim, self.out_dim, self.activation)?;
        if self.equalized {
            f.write_str(":eq")?;
        }
        if self.pixel_norm {
            f.write_str(":pn")?;
        }
        Ok(())
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed layer spec {s:?}"));
        let mut parts = s.split(':');
        let dims = parts.next().ok_or_else(bad)?;
        let (i, o) = dims.split_once('>').ok_or_else(bad)?;
        let in_dim = i.parse().map_err(|_| bad())?;
        let out_dim = o.parse().map_err(|_| bad())?;
        let activation = parts.next().ok_or_else(bad)?.parse()?;
        let mut spec = LayerSpec::new(in_dim, out_dim, activation).with_equalized(false);
        for flag in parts {
            match flag {
                "eq" => spec.equalized = true,
                "pn" => spec.pixel_norm = true,
                _ => return Err(bad()),
            }
        }
        Ok(spec)
    }
}

/// Sequential stack of dense layers with optional pixelwise feature
/// normalization after each layer's activation.
#[derive(Debug)]
pub struct MlpNetwork {
    layers: Vec<DenseLayer>,
    pixel_norm: Vec<bool>,
    uid: u64,
    generation: u64,
}

impl Clone for MlpNetwork {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            pixel_norm: self.pixel_norm.clone(),
            uid: next_uid(),
            generation: 0,
        }
    }
}

impl PartialEq for MlpNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.pixel_norm == other.pixel_norm
    }
}

/// Activation record of one [`MlpNetwork::forward`] call.
#[derive(Clone, Debug)]
pub struct Tape {
    uid: u64,
    generation: u64,
    out_shape: Vec<usize>,
    /// `inputs[k]` feeds layer `k`; the final entry is the network output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("tape holds at least the input")
    }

    /// Pre-activation values of every layer, in layer order.
    pub fn preactivations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    /// Pre-activation values of the last layer.
    pub fn last_preactivation(&self) -> &[f64] {
        self.pre.last().expect("network has at least one layer")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Parameter gradients in the order `W0, b0, W1, b1, …`.
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

impl MlpNetwork {
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        for s in specs {
            layers.push(DenseLayer::init(
                s.in_dim,
                s.out_dim,
                s.activation,
                s.equalized,
                rng,
            )?);
        }
        Self::from_layers(layers, specs.iter().map(|s| s.pixel_norm).collect())
    }

    pub fn from_layers(layers: Vec<DenseLayer>, pixel_norm: Vec<bool>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        if pixel_norm.len() != layers.len() {
            return Err(Error::invalid("one pixel-norm flag per layer required"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::invalid(format!(
                    "layer {k} outputs {} features but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            pixel_norm,
            uid: next_uid(),
            generation: 0,
        })
    }

    /// Rebuilds a network from specs and a flat parameter vector.
    pub fn from_specs_and_params(specs: &[LayerSpec], params: &[f64]) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut offset = 0;
        for s in specs {
            let nw = s.in_dim * s.out_dim;
            let need = offset + nw + s.out_dim;
            if need > params.len() {
                return Err(Error::invalid("parameter vector too short for layer specs"));
            }
            let w = params[offset..offset + nw].to_vec();
            let b = params[offset + nw..need].to_vec();
            offset = need;
            layers.push(DenseLayer::from_parts(
                s.in_dim,
                s.out_dim,
                w,
                b,
                s.activation,
                s.equalized,
            )?);
        }
        if offset != params.len() {
            return Err(Error::invalid(format!(
                "parameter vector has {} values, layer specs need {offset}",
                params.len()
            )));
        }
        Self::from_layers(layers, specs.iter().map(|s| s.pixel_norm).collect())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .zip(&self.pixel_norm)
            .map(|(l, &pn)| LayerSpec {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                activation: l.activation(),
                equalized: l.equalized(),
                pixel_norm: pn,
            })
            .collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect()
    }

    /// All parameters in `W0, b0, W1, b1, …` order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Mutable parameter slices in `W0, b0, …` order. Invalidates tapes.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn set_equalized(&mut self, on: bool) {
        self.generation += 1;
        for l in &mut self.layers {
            l.set_equalized(on);
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<Vec<usize>> {
        if input.features() != self.in_dim() {
            let mut expected = input.shape().to_vec();
            *expected.last_mut().expect("non-empty") = self.in_dim();
            return Err(Error::ShapeMismatch {
                context: "network input",
                expected,
                actual: input.shape().to_vec(),
            });
        }
        let mut out_shape = input.shape().to_vec();
        *out_shape.last_mut().expect("non-empty") = self.out_dim();
        Ok(out_shape)
    }

    fn run(&self, input: &[f64], mut record: Option<&mut Tape>) -> Vec<f64> {
        let mut x = input.to_vec();
        let mut pre = Vec::new();
        for (layer, &pn) in self.layers.iter().zip(&self.pixel_norm) {
            layer.preactivate(&x, &mut pre);
            let act = layer.activation();
            let a: Vec<f64> = pre.iter().map(|&z| act.apply(z)).collect();
            let y = if pn {
                let mut y = a.clone();
                for row in y.chunks_exact_mut(layer.out_dim()) {
                    let inv = rms_inverse(row, PIXEL_NORM_EPSILON);
                    row.iter_mut().for_each(|v| *v *= inv);
                }
                y
            } else {
                a.clone()
            };
            if let Some(t) = record.as_deref_mut() {
                t.inputs.push(std::mem::replace(&mut x, y));
                t.pre.push(pre.clone());
                t.act.push(a);
            } else {
                x = y;
            }
        }
        if let Some(t) = record {
            t.inputs.push(x.clone());
        }
        x
    }

    /// Forward pass over a batch (every leading axis is batch).
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Tape)> {
        let out_shape = self.check_input(input)?;
        let mut tape = Tape {
            uid: self.uid,
            generation: self.generation,
            out_shape: out_shape.clone(),
            inputs: Vec::with_capacity(self.layers.len() + 1),
            pre: Vec::with_capacity(self.layers.len()),
            act: Vec::with_capacity(self.layers.len()),
        };
        let out = self.run(input.data(), Some(&mut tape));
        let out = Tensor::new(out_shape, out)?.check_finite("forward")?;
        Ok((out, tape))
    }

    /// Same arithmetic as [`forward`](Self::forward) without recording a tape.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.check_input(input)?;
        let out = self.run(input.data(), None);
        Tensor::new(out_shape, out)?.check_finite("forward")
    }

    fn check_tape(&self, tape: &Tape, upstream: &Tensor) -> Result<()> {
        if tape.uid != self.uid {
            return Err(Error::StaleTape("recorded by a different network"));
        }
        if tape.generation != self.generation {
            return Err(Error::StaleTape("parameters changed since forward"));
        }
        if upstream.shape() != tape.out_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                context: "backward upstream",
                expected: tape.out_shape.clone(),
                actual: upstream.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn backprop(
        &self,
        tape: &Tape,
        upstream: &[f64],
        from_preactivation: bool,
        want_params: bool,
    ) -> (Option<Gradients>, Vec<f64>) {
        let mut grads: Option<Vec<LayerGrad>> =
            want_params.then(|| self.layers.iter().map(DenseLayer::zero_grad).collect());
        let mut g = upstream.to_vec();
        let last = self.layers.len() - 1;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let width = layer.out_dim();
            if !(from_preactivation && k == last) {
                if self.pixel_norm[k] {
                    // d(a / s)/da = I/s - a aᵀ / (n s³)
                    for (gr, a) in g.chunks_exact_mut(width).zip(tape.act[k].chunks_exact(width)) {
                        let inv = rms_inverse(a, PIXEL_NORM_EPSILON);
                        let ga: f64 = gr.iter().zip(a).map(|(x, y)| x * y).sum();
                        let c = ga * inv * inv * inv / width as f64;
                        for (v, &ai) in gr.iter_mut().zip(a) {
                            *v = *v * inv - c * ai;
                        }
                    }
                }
                let act = layer.activation();
                for ((v, &z), &y) in g.iter_mut().zip(&tape.pre[k]).zip(&tape.act[k]) {
                    *v *= act.derivative(z, y);
                }
            }
            let pg = grads.as_mut().map(|gs| &mut gs[k]);
            g = layer
                .backprop(&tape.inputs[k], &g, pg, true)
                .expect("input gradient requested");
        }
        (grads.map(|layers| Gradients { layers }), g)
    }

    fn input_tensor(&self, tape: &Tape, g: Vec<f64>) -> Result<Tensor> {
        let mut shape = tape.out_shape.clone();
        *shape.last_mut().expect("non-empty") = self.in_dim();
        Tensor::new(shape, g)?.check_finite("backward")
    }

    /// Gradients of a scalar whose derivative with respect to the network
    /// output is `upstream`.
    pub fn backward(&self, tape: &Tape, upstream: &Tensor) -> Result<(Gradients, Tensor)> {
        self.check_tape(tape, upstream)?;
        let (g, gx) = self.backprop(tape, upstream.data(), false, true);
        Ok((g.expect("requested"), self.input_tensor(tape, gx)?))
    }

    /// Like [`backward`](Self::backward) but `upstream` is taken with respect
    /// to the last layer's pre-activation (e.g. discriminator logits).
    pub fn backward_preactivation(
        &self,
        tape: &Tape,
        upstream: &Tensor,
    ) -> Result<(Gradients, Tensor)> {
        self.check_tape(tape, upstream)?;
        let (g, gx) = self.backprop(tape, upstream.data(), true, true);
        Ok((g.expect("requested"), self.input_tensor(tape, gx)?))
    }

    /// Input gradient only.
    pub fn input_grad(&self, tape: &Tape, upstream: &Tensor) -> Result<Tensor> {
        self.check_tape(tape, upstream)?;
        let (_, gx) = self.backprop(tape, upstream.data(), false, false);
        self.input_tensor(tape, gx)
    }

    /// Input gradient only, with `upstream` on the last pre-activation.
    pub fn input_grad_preactivation(&self, tape: &Tape, upstream: &Tensor) -> Result<Tensor> {
        self.check_tape(tape, upstream)?;
        let (_, gx) = self.backprop(tape, upstream.data(), true, false);
        self.input_tensor(tape, gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_net(n: usize) -> MlpNetwork {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        let layer =
            DenseLayer::from_parts(n, n, w, vec![0.0; n], Activation::Identity, false).unwrap();
        MlpNetwork::from_layers(vec![layer], vec![false]).unwrap()
    }

    #[test]
    fn identity_forward_and_backward() {
        let net = identity_net(3);
        let v = Tensor::vector(vec![0.5, -2.0, 7.0]).unwrap();
        let (out, tape) = net.forward(&v).unwrap();
        assert_eq!(out, v);
        let g = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        let (_, gx) = net.backward(&tape, &g).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn wrong_input_length_is_shape_error() {
        let net = identity_net(3);
        let err = net.forward(&Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap_err();
        match err {
            Error::ShapeMismatch { expected, actual, .. } => {
                assert_eq!(expected, vec![3]);
                assert_eq!(actual, vec![2]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = MlpNetwork::new(
            &[
                LayerSpec::new(3, 5, Activation::LeakyRelu(0.2)).with_pixel_norm(true),
                LayerSpec::new(5, 2, Activation::Tanh),
            ],
            &mut rng,
        )
        .unwrap();
        let x = Tensor::new(vec![4, 3], (0..12).map(|i| i as f64 * 0.1 - 0.5).collect()).unwrap();
        let (_, tape) = net.forward(&x).unwrap();
        let (g, gx) = net.backward(&tape, &Tensor::zeros(vec![4, 2])).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
        assert!(gx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_and_foreign_tapes_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = [LayerSpec::new(2, 2, Activation::Tanh)];
        let mut a = MlpNetwork::new(&spec, &mut rng).unwrap();
        let b = a.clone();
        let x = Tensor::vector(vec![0.1, 0.2]).unwrap();
        let (_, tape) = a.forward(&x).unwrap();
        let up = Tensor::vector(vec![1.0, 1.0]).unwrap();
        assert!(matches!(b.backward(&tape, &up), Err(Error::StaleTape(_))));
        a.param_slices_mut()[0][0] += 1.0;
        assert!(matches!(a.backward(&tape, &up), Err(Error::StaleTape(_))));
    }

    #[test]
    fn layer_spec_text_round_trip() {
        let s = LayerSpec::new(8, 64, Activation::LeakyRelu(0.2)).with_pixel_norm(true);
        assert_eq!(s.to_string(), "8>64:lrelu0.2:eq:pn");
        assert_eq!(s.to_string().parse::<LayerSpec>().unwrap(), s);
        let s = LayerSpec::new(4, 1, Activation::Sigmoid).with_equalized(false);
        assert_eq!(s.to_string().parse::<LayerSpec>().unwrap(), s);
        assert!("4-1:tanh".parse::<LayerSpec>().is_err());
    }

    #[test]
    fn incompatible_layers_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = MlpNetwork::new(
            &[
                LayerSpec::new(2, 3, Activation::Tanh),
                LayerSpec::new(4, 1, Activation::Tanh),
            ],
            &mut rng,
        );
        assert!(err.is_err());
    }
}
