mod common;

use common::{entropy, nearest_center, testbed};
use guidegan::eval::draw_exemplars;
use guidegan::guide::{generate_from, guide};

#[test]
fn guidance_concentrates_on_the_requested_mode() {
    let tb = testbed::build();
    let centers = &tb.spec.centers;
    let unguided = generate_from(&tb.gan, &tb.gan.sample_prior(1000, 1)).unwrap();
    let mut counts = vec![0usize; 5];
    for row in unguided.row_iter() {
        counts[nearest_center(centers, row)] += 1;
    }
    let unguided_entropy = entropy(&counts);
    assert!(counts.iter().all(|&c| c >= 50), "unguided coverage {counts:?}");

    for k in 0..5 {
        let batch = draw_exemplars(&tb.data, k, 64, 100 + k as u64).unwrap();
        let out = guide(&tb.gan, &tb.encoder, &batch, 2.5, 500, k as u64).unwrap();
        let mut counts = vec![0usize; 5];
        for row in out.samples.row_iter() {
            counts[nearest_center(centers, row)] += 1;
        }
        assert!(counts[k] >= 400, "mode {k}: {counts:?}");
        assert!(entropy(&counts) < unguided_entropy, "mode {k}: {counts:?}");
        let proto_dims_finite = out.prototype.mu.iter().chain(&out.prototype.sigma).all(|v| v.is_finite());
        assert!(proto_dims_finite);
    }
}
