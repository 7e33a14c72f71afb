use rand::Rng;
use rand_distr::StandardNormal;

use super::Activation;
use crate::error::{Error, Result};

/// Fully connected layer `y = act(scale · W x + b)`.
///
/// `weights` is stored row-major as `out_dim × in_dim`. When equalized
/// learning is on, `scale = sqrt(2 / in_dim)` is applied at use time so the
/// stored weights stay unit-variance.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    activation: Activation,
    equalized: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    /// Gaussian N(0, 1) weights and zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        equalized: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::from_parts(in_dim, out_dim, weights, vec![0.0; out_dim], activation, equalized)
    }

    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
        equalized: bool,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid(format!(
                "dense layer dimensions must be positive, got {in_dim}->{out_dim}"
            )));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::ShapeMismatch {
                context: "dense layer weights",
                expected: vec![out_dim, in_dim],
                actual: vec![weights.len()],
            });
        }
        if bias.len() != out_dim {
            return Err(Error::ShapeMismatch {
                context: "dense layer bias",
                expected: vec![out_dim],
                actual: vec![bias.len()],
            });
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation: activation.validate()?,
            equalized,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn equalized(&self) -> bool {
        self.equalized
    }

    pub fn set_equalized(&mut self, on: bool) {
        self.equalized = on;
    }

    pub fn equalized_scale(&self) -> f64 {
        if self.equalized {
            (2.0 / self.in_dim as f64).sqrt()
        } else {
            1.0
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Pre-activations for a batch laid out as `rows × in_dim`.
    pub(crate) fn preactivate(&self, input: &[f64], out: &mut Vec<f64>) {
        let scale = self.equalized_scale();
        out.clear();
        out.reserve(input.len() / self.in_dim * self.out_dim);
        for x in input.chunks_exact(self.in_dim) {
            for (w, b) in self.weights.chunks_exact(self.in_dim).zip(&self.bias) {
                out.push(scale * dot(w, x) + b);
            }
        }
    }

    pub(crate) fn zero_grad(&self) -> LayerGrad {
        LayerGrad {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    /// Accumulates parameter gradients from `grad_pre` (`rows × out_dim`)
    /// and, when asked, returns the gradient on `input`.
    pub(crate) fn backprop(
        &self,
        input: &[f64],
        grad_pre: &[f64],
        param_grad: Option<&mut LayerGrad>,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let scale = self.equalized_scale();
        if let Some(pg) = param_grad {
            for (x, g) in input
                .chunks_exact(self.in_dim)
                .zip(grad_pre.chunks_exact(self.out_dim))
            {
                for ((dw, db), &go) in pg
                    .weights
                    .chunks_exact_mut(self.in_dim)
                    .zip(pg.bias.iter_mut())
                    .zip(g)
                {
                    *db += go;
                    let s = scale * go;
                    for (d, &xi) in dw.iter_mut().zip(x) {
                        *d += s * xi;
                    }
                }
            }
        }
        if !want_input_grad {
            return None;
        }
        let rows = grad_pre.len() / self.out_dim;
        let mut gx = vec![0.0; rows * self.in_dim];
        for (gxr, g) in gx
            .chunks_exact_mut(self.in_dim)
            .zip(grad_pre.chunks_exact(self.out_dim))
        {
            for (w, &go) in self.weights.chunks_exact(self.in_dim).zip(g) {
                let s = scale * go;
                for (d, &wi) in gxr.iter_mut().zip(w) {
                    *d += s * wi;
                }
            }
        }
        Some(gx)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equalized_scale_follows_fan_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = DenseLayer::init(8, 3, Activation::Identity, true, &mut rng).unwrap();
        assert!((l.equalized_scale() - 0.5).abs() < 1e-15);
        let l = DenseLayer::init(8, 3, Activation::Identity, false, &mut rng).unwrap();
        assert_eq!(l.equalized_scale(), 1.0);
        assert!(l.bias().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_dims_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(DenseLayer::init(0, 3, Activation::Identity, true, &mut rng).is_err());
        assert!(DenseLayer::init(3, 0, Activation::Identity, true, &mut rng).is_err());
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
