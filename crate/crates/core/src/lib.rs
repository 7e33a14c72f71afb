//! Guide a pre-trained, non-conditional GAN toward a chosen subcategory.
//!
//! The pipeline trains a small GAN, fits an encoder that inverts the frozen
//! generator, encodes a handful of exemplars, summarizes them as a
//! per-dimension Gaussian prototype and samples that prototype to drive the
//! generator.

pub mod cli;
pub mod error;
pub mod eval;
pub mod gan;
pub mod guide;
pub mod inversion;
pub mod io;
pub mod nn;
pub mod plot;
pub mod synthdata;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
