use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const PIXEL_NORM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Identity,
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn validate(self) -> Result<Self> {
        match self {
            Activation::LeakyRelu(s) if !(0.0..1.0).contains(&s) => Err(Error::invalid(format!(
                "leaky_relu slope must lie in [0, 1), got {s}"
            ))),
            a => Ok(a),
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => leaky_relu(x, s),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation `x`, given the
    /// already computed output `y`. The leaky ReLU takes slope 1 at 0.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) => {
                if x >= 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(s) => write!(f, "lrelu{s}"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Sigmoid => f.write_str("sigmoid"),
            Activation::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            _ => {
                let slope = s
                    .strip_prefix("lrelu")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown activation {s:?}")))?;
                Activation::LeakyRelu(slope).validate()
            }
        }
    }
}

/// Divides a feature vector by its root-mean-square:
/// `b_j = a_j / sqrt(mean(a²) + epsilon)`.
pub fn pixelwise_feature_norm(a: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::invalid("pixelwise_feature_norm of an empty vector"));
    }
    if epsilon <= 0.0 {
        return Err(Error::invalid("pixelwise_feature_norm epsilon must be positive"));
    }
    let inv = rms_inverse(a, epsilon);
    Ok(a.iter().map(|v| v * inv).collect())
}

pub(crate) fn rms_inverse(a: &[f64], epsilon: f64) -> f64 {
    let ms = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
    1.0 / (ms + epsilon).sqrt()
}
