//! Non-conditional GAN: generator/discriminator pair, the value function,
//! alternating training and progressive growing for image mode.

mod loss;
mod model;
mod resample;
mod train;

pub use loss::{discriminator_loss, gan_value, generator_loss, LossVariant};
pub use model::{
    sample_standard_normal, Discriminator, DiscriminatorTape, GanArch, GanModel, Generator,
    GeneratorTape, LatentVector, SampleMode, BASE_RESOLUTION, IMAGE_CHANNELS,
};
pub use resample::{downsample, upsample};
pub use train::{
    train, GrowEvent, History, StepMetrics, StepRecord, TrainConfig, TrainFailure, Trainer,
    DIVERGENCE_LIMIT,
};
