mod common;

use guidegan::eval::OracleClassifier;
use guidegan::synthdata::{
    decode_ppm, encode_ppm, gaussian_mixture_dataset, load_image_directory, read_data_file, tile_image_dataset,
    tile_template, write_data_file, DataFile, LabeledDataset, MixtureSpec, Pixmap,
};
use proptest::prelude::*;

fn oracle_agreement(ds: &LabeledDataset) -> f64 {
    let oracle = OracleClassifier::for_dataset(ds).unwrap();
    let pred = oracle.classify_all(ds.samples()).unwrap();
    let hits = pred.iter().zip(ds.labels()).filter(|(p, &l)| **p == l as usize).count();
    hits as f64 / ds.len() as f64
}

#[test]
fn mixture_labels_are_decodable() {
    let ds = gaussian_mixture_dataset(&MixtureSpec::default(), 10_000, 3).unwrap();
    assert!(oracle_agreement(&ds) >= 0.99);
    let spec = ds.mixture.as_ref().unwrap();
    let hits = (0..ds.len())
        .filter(|&i| common::nearest_center(&spec.centers, ds.sample(i)) == ds.labels()[i] as usize)
        .count();
    assert!(hits as f64 / ds.len() as f64 >= 0.99);
}

#[test]
fn mixture_modes_are_balanced() {
    let ds = gaussian_mixture_dataset(&MixtureSpec::default(), 10_000, 4).unwrap();
    for k in 0..5 {
        let share = ds.indices_of(k).len() as f64 / 10_000.0;
        assert!((share - 0.2).abs() < 0.02, "mode {k}: {share}");
    }
}

#[test]
fn tile_labels_are_decodable() {
    for res in [4, 8, 16] {
        let ds = tile_image_dataset(res, 4, 2000, 9).unwrap();
        assert!(oracle_agreement(&ds) >= 0.99, "resolution {res}");
        assert!(ds.samples().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn tile_templates_are_distinct() {
    let t: Vec<Vec<f64>> = (0..8).map(|k| tile_template(k, 8)).collect();
    for a in 0..8 {
        for b in a + 1..8 {
            assert_ne!(t[a], t[b]);
        }
    }
}

#[test]
fn generation_is_seeded() {
    let spec = MixtureSpec::default();
    assert_eq!(
        gaussian_mixture_dataset(&spec, 500, 1).unwrap(),
        gaussian_mixture_dataset(&spec, 500, 1).unwrap()
    );
    assert_ne!(
        gaussian_mixture_dataset(&spec, 500, 1).unwrap(),
        gaussian_mixture_dataset(&spec, 500, 2).unwrap()
    );
}

#[test]
fn invalid_requests_rejected() {
    assert!(tile_image_dataset(5, 4, 100, 0).is_err());
    assert!(tile_image_dataset(8, 9, 100, 0).is_err());
    assert!(gaussian_mixture_dataset(&MixtureSpec::default(), 3, 0).is_err());
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for ds in [
        gaussian_mixture_dataset(&MixtureSpec::default(), 300, 5).unwrap(),
        tile_image_dataset(8, 3, 50, 5).unwrap(),
    ] {
        let path = dir.path().join("d.ggdata");
        ds.save(&path).unwrap();
        assert_eq!(LabeledDataset::load(&path).unwrap(), ds);
        let bytes = std::fs::read(&path).unwrap();
        ds.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }
}

#[test]
fn truncated_data_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.ggdata");
    gaussian_mixture_dataset(&MixtureSpec::default(), 50, 5).unwrap().save(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_data_file(&path), Err(guidegan::Error::Format { .. })));
}

#[test]
fn unlabeled_file_is_not_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ggdata");
    let ds = gaussian_mixture_dataset(&MixtureSpec::default(), 50, 5).unwrap();
    let mut file = DataFile::from(&ds);
    file.labels = None;
    write_data_file(&path, &file).unwrap();
    assert_eq!(read_data_file(&path).unwrap().labels, None);
    assert!(LabeledDataset::load(&path).is_err());
}

#[test]
fn image_directory_loads_sorted_and_scaled() {
    let dir = tempfile::tempdir().unwrap();
    for (name, v) in [("b.ppm", 255u8), ("a.ppm", 0u8)] {
        let mut p = Pixmap::new(4, 4);
        p.rgb.iter_mut().for_each(|x| *x = v);
        std::fs::write(dir.path().join(name), encode_ppm(&p)).unwrap();
    }
    std::fs::write(dir.path().join(".hidden"), b"junk").unwrap();
    let batch = load_image_directory(dir.path(), 8).unwrap();
    assert_eq!(batch.len(), 2);
    assert_eq!(batch.sample_shape(), &[8, 8, 3]);
    assert!(batch.sample(0).iter().all(|&v| v == -1.0));
    assert!(batch.sample(1).iter().all(|&v| v == 1.0));
}

#[test]
fn empty_image_directory_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_image_directory(dir.path(), 8).is_err());
}

proptest! {
    #[test]
    fn ppm_round_trips(w in 1usize..20, h in 1usize..20, seed in any::<u8>()) {
        let mut p = Pixmap::new(w, h);
        for (i, b) in p.rgb.iter_mut().enumerate() {
            *b = (i as u8).wrapping_mul(31).wrapping_add(seed);
        }
        prop_assert_eq!(decode_ppm(&encode_ppm(&p)).unwrap(), p);
    }
}
