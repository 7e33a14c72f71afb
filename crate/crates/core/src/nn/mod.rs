//! Dense-network engine: layers, activations, analytic backprop and Adam.

mod activation;
mod layer;
mod network;
mod optim;

pub use activation::{leaky_relu, pixelwise_feature_norm, Activation, PIXEL_NORM_EPSILON};
pub use layer::{DenseLayer, LayerGrad};
pub use network::{Gradients, LayerSpec, MlpNetwork, Tape};
pub use optim::{Adam, AdamConfig};
