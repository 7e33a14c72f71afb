mod common;

use common::{finite_difference_check, random_net, reference_forward, seeded};
use guidegan::nn::{pixelwise_feature_norm, Activation, LayerSpec, MlpNetwork};
use guidegan::Tensor;
use proptest::prelude::*;

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = seeded(2024);
    for _ in 0..100 {
        let net = random_net(&mut rng);
        let report = finite_difference_check(&net, &mut rng, 100, 1e-5);
        assert!(
            report.worst_relative_error < 1e-4,
            "relative error {} on net {:?}",
            report.worst_relative_error,
            net.specs()
        );
        assert!(report.skipped_kinks < report.probes / 2);
    }
}

#[test]
fn forward_matches_straight_line_reevaluation() {
    let mut rng = seeded(5);
    let net = MlpNetwork::new(
        &[
            LayerSpec::new(4, 6, Activation::LeakyRelu(0.2)).with_pixel_norm(true),
            LayerSpec::new(6, 3, Activation::Tanh),
        ],
        &mut rng,
    )
    .unwrap();
    let ones = vec![1.0; 4];
    let out = net.infer(&Tensor::vector(ones.clone()).unwrap()).unwrap();
    let expect = reference_forward(&net, &ones);
    for (a, b) in out.data().iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn forward_is_bitwise_pure() {
    let mut rng = seeded(9);
    let net = random_net(&mut rng);
    let x = Tensor::new(vec![5, net.in_dim()], vec![0.3; 5 * net.in_dim()]).unwrap();
    let a = net.forward(&x).unwrap().0;
    let b = net.forward(&x).unwrap().0;
    let c = net.infer(&x).unwrap();
    assert_eq!(
        a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(a, c);
}

#[test]
fn equalized_flag_scales_identity_layers_exactly() {
    let mut rng = seeded(3);
    let in_dim = 8;
    let mut net = MlpNetwork::new(
        &[LayerSpec::new(in_dim, 3, Activation::Identity).with_equalized(true)],
        &mut rng,
    )
    .unwrap();
    let x = Tensor::vector((0..in_dim).map(|i| i as f64 - 3.5).collect()).unwrap();
    let on = net.infer(&x).unwrap();
    net.set_equalized(false);
    let off = net.infer(&x).unwrap();
    let scale = (2.0 / in_dim as f64).sqrt();
    // bias is zero at init, so output is linear in the weight scale
    for (a, b) in on.data().iter().zip(off.data()) {
        assert!((a - b * scale).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

proptest! {
    #[test]
    fn pixel_norm_output_has_unit_rms(v in prop::collection::vec(-100.0f64..100.0, 1..64)) {
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        prop_assume!(rms >= 1e-3);
        let out = pixelwise_feature_norm(&v, 1e-8).unwrap();
        let out_rms = (out.iter().map(|x| x * x).sum::<f64>() / out.len() as f64).sqrt();
        prop_assert!(out_rms <= 1.0 + 1e-12);
        prop_assert!(out_rms >= 1.0 - 1e-3);
    }
}
