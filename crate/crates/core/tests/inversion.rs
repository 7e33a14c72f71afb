mod common;

use guidegan::gan::{train, GanArch, GanModel, LatentVector, TrainConfig};
use guidegan::inversion::{
    latent_mse, make_training_pairs, train_encoder, EncoderArch, EncoderModel, EncoderTrainConfig,
};
use guidegan::io::checkpoint::{load_encoder, save_encoder};
use guidegan::synthdata::{gaussian_mixture_dataset, MixtureSpec};
use guidegan::Tensor;

fn small_gan() -> GanModel {
    let data = gaussian_mixture_dataset(&MixtureSpec::default(), 2000, 1).unwrap();
    let gan = GanModel::new_vector(4, 2, GanArch { hidden: 32, ..GanArch::default() }, 2).unwrap();
    let config = TrainConfig {
        total_steps: 300,
        ..TrainConfig::default()
    };
    train(gan, &data, &config).unwrap().0
}

fn small_config(seed: u64) -> EncoderTrainConfig {
    EncoderTrainConfig {
        pairs: 6000,
        epochs: 3,
        seed,
        ..EncoderTrainConfig::default()
    }
}

#[test]
fn training_reduces_validation_error() {
    let gan = small_gan();
    let enc = EncoderModel::new(&gan, EncoderArch::default(), 3).unwrap();
    let (enc, history) = train_encoder(enc, &gan, &small_config(4)).unwrap();
    assert_eq!(history.epochs.len(), 3);
    let last = history.epochs.last().unwrap();
    assert!(
        last.validation_mse < history.baseline_validation_mse,
        "{} vs baseline {}",
        last.validation_mse,
        history.baseline_validation_mse
    );
    assert!(history.epochs.iter().all(|e| e.train_loss.is_finite()));
    let held_out = make_training_pairs(&gan, 500, 99).unwrap();
    assert!(latent_mse(&enc, &held_out).unwrap() < history.baseline_validation_mse);
}

#[test]
fn encoder_training_is_deterministic() {
    let gan = small_gan();
    let run = || {
        let enc = EncoderModel::new(&gan, EncoderArch::default(), 3).unwrap();
        let config = EncoderTrainConfig {
            pairs: 1000,
            epochs: 2,
            ..small_config(8)
        };
        train_encoder(enc, &gan, &config).unwrap()
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a.checksum(), b.checksum());
    assert_eq!(ha, hb);
}

#[test]
fn training_leaves_generator_untouched() {
    let gan = small_gan();
    let before = gan.checksum();
    let enc = EncoderModel::new(&gan, EncoderArch::default(), 3).unwrap();
    let config = EncoderTrainConfig {
        pairs: 500,
        epochs: 1,
        ..small_config(1)
    };
    train_encoder(enc, &gan, &config).unwrap();
    assert_eq!(gan.checksum(), before);
}

#[test]
fn encoding_is_pure() {
    let gan = small_gan();
    let enc = EncoderModel::new(&gan, EncoderArch::default(), 3).unwrap();
    let x = Tensor::vector(vec![0.4, -1.2]).unwrap();
    let sum = enc.checksum();
    let a = enc.encode(&x).unwrap();
    let b = enc.encode(&x).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dim(), 4);
    assert_eq!(enc.checksum(), sum);
}

#[test]
fn pairs_come_from_the_generator() {
    let gan = small_gan();
    let pairs = make_training_pairs(&gan, 40, 6).unwrap();
    for i in 0..pairs.len() {
        let x = gan.generate(&LatentVector::new(pairs.latent(i).to_vec())).unwrap();
        assert_eq!(x.data(), pairs.sample(i));
    }
    assert_ne!(pairs, make_training_pairs(&gan, 40, 7).unwrap());
}

#[test]
fn checkpoint_round_trip_preserves_encodings() {
    let gan = small_gan();
    let enc = EncoderModel::new(&gan, EncoderArch::default(), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.ckpt");
    save_encoder(&enc, &path).unwrap();
    let back = load_encoder(&path).unwrap();
    assert_eq!(back.checksum(), enc.checksum());
    assert_eq!(back.provenance, gan.provenance_id());
    let x = Tensor::vector(vec![2.0, 3.0]).unwrap();
    assert_eq!(back.encode(&x).unwrap(), enc.encode(&x).unwrap());
}
