//! The two-player value function and the losses each player descends.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossVariant {
    /// Generator descends `E[log(1 - D(G(z)))]`.
    Minimax,
    /// Generator descends `-E[log D(G(z))]`.
    #[default]
    NonSaturating,
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossVariant::Minimax => "minimax",
            LossVariant::NonSaturating => "non_saturating",
        })
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimax" => Ok(LossVariant::Minimax),
            "non_saturating" => Ok(LossVariant::NonSaturating),
            _ => Err(Error::invalid(format!("unknown loss variant {s:?}"))),
        }
    }
}

fn check_probabilities(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    if let Some(bad) = p.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::invalid(format!(
            "{name} contains {bad}, probabilities must lie in (0, 1)"
        )));
    }
    Ok(())
}

fn mean(it: impl Iterator<Item = f64>, n: usize) -> f64 {
    it.sum::<f64>() / n as f64
}

/// `mean(log D(x)) + mean(log(1 - D(G(z))))`.
pub fn gan_value(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    check_probabilities("d_real", d_real)?;
    check_probabilities("d_fake", d_fake)?;
    Ok(mean(d_real.iter().map(|p| p.ln()), d_real.len())
        + mean(d_fake.iter().map(|p| (-p).ln_1p()), d_fake.len()))
}

pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    Ok(-gan_value(d_real, d_fake)?)
}

pub fn generator_loss(d_fake: &[f64], variant: LossVariant) -> Result<f64> {
    check_probabilities("d_fake", d_fake)?;
    let n = d_fake.len();
    Ok(match variant {
        LossVariant::Minimax => mean(d_fake.iter().map(|p| (-p).ln_1p()), n),
        LossVariant::NonSaturating => -mean(d_fake.iter().map(|p| p.ln()), n),
    })
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    crate::nn::Activation::Sigmoid.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn value_examples() {
        assert!((gan_value(&[0.5], &[0.5]).unwrap() + 2.0 * LN2).abs() < 1e-12);
        let v = gan_value(&[0.9], &[0.1]).unwrap();
        assert!((v - 2.0 * 0.9f64.ln()).abs() < 1e-12);
        assert!((v + 0.210721).abs() < 1e-6);
        let eps = 1e-12;
        assert!(gan_value(&[1.0 - eps], &[eps]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn losses() {
        assert!((discriminator_loss(&[0.5], &[0.5]).unwrap() - 1.386294).abs() < 1e-6);
        assert!((generator_loss(&[0.5], LossVariant::NonSaturating).unwrap() - LN2).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let l = generator_loss(&[p], LossVariant::Minimax).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn probabilities_outside_open_interval_rejected() {
        assert!(gan_value(&[1.0], &[0.5]).is_err());
        assert!(gan_value(&[0.5], &[0.0]).is_err());
        assert!(gan_value(&[], &[0.5]).is_err());
        assert!(generator_loss(&[f64::NAN], LossVariant::Minimax).is_err());
    }

    #[test]
    fn softplus_matches_log_sigmoid() {
        for x in [-30.0, -2.0, 0.0, 1.5, 40.0] {
            assert!((softplus(-x) + sigmoid(x).ln()).abs() < 1e-12);
        }
    }
}
