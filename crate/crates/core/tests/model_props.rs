use pixbis_core::autodiff::{Graph, Tensor, PROB_CLAMP};
use pixbis_core::model::{
    binary_bce, combined_loss, frame_score, pixelwise_bce, ForwardOptions, Mode, Model, ModelConfig,
};
use proptest::prelude::*;

fn tiny(h: usize, w: usize, stem: usize, k: usize, layers: (usize, usize)) -> ModelConfig {
    ModelConfig {
        input_size: (h, w),
        stem_channels: stem,
        growth_rate: k,
        block_layers: layers,
        ..ModelConfig::desk()
    }
}

fn input(n: usize, h: usize, w: usize, seed: u64) -> Tensor<f32> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * 3 * h * w).map(|_| rng.random::<f32>()).collect();
    Tensor::new(&[n, 3, h, w], data).unwrap()
}

#[test]
fn reference_shapes() {
    let full = ModelConfig::full();
    assert_eq!(full.backbone_channels(), 384);
    assert_eq!(full.map_size(), (14, 14));
    let desk = ModelConfig::desk();
    assert_eq!(desk.backbone_channels(), 64);
    assert_eq!(desk.map_size(), (4, 4));

    let model = Model::<f32>::new(desk, 1).unwrap();
    let pass = model
        .forward_with(&input(2, 64, 64, 0), ForwardOptions { mode: Mode::Eval, ablate: None })
        .unwrap();
    assert_eq!(pass.graph.value(pass.map).shape(), &[2, 1, 4, 4]);
    assert_eq!(pass.graph.value(pass.binary).shape(), &[2, 1]);
    assert_eq!(pass.graph.value(pass.features).shape(), &[2, 64, 4, 4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shape_law(hm in 1usize..4, wm in 1usize..4, stem in 1usize..6, k in 1usize..4, l1 in 1usize..3, l2 in 1usize..3) {
        let cfg = tiny(16 * hm, 16 * wm, stem, k, (l1, l2));
        let b1 = stem + l1 * k;
        let t1 = b1 / 2;
        let b2 = t1 + l2 * k;
        prop_assume!(t1 > 0 && b2 / 2 > 0);
        let model = Model::<f32>::new(cfg, 0).unwrap();
        let pass = model
            .forward_with(&input(1, 16 * hm, 16 * wm, 1), ForwardOptions { mode: Mode::Train, ablate: None })
            .unwrap();
        prop_assert_eq!(pass.graph.value(pass.features).shape(), &[1, b2 / 2, hm, wm]);
        prop_assert_eq!(pass.graph.value(pass.map).shape(), &[1, 1, hm, wm]);
        for (b, inputs) in pass.dense_inputs.iter().enumerate() {
            let base = if b == 0 { stem } else { t1 };
            for (j, &v) in inputs.iter().enumerate() {
                prop_assert_eq!(pass.graph.value(v).shape()[1], base + j * k);
            }
        }
        let outs = [pass.graph.value(pass.map).data(), pass.graph.value(pass.binary).data()];
        prop_assert!(outs.iter().all(|o| o.iter().all(|&p| p > 0.0 && p < 1.0)));
    }

    #[test]
    fn frame_score_ignores_pixel_order(mut map in prop::collection::vec(0.0f64..=1.0, 1..64), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let s = frame_score(&map);
        let lo = map.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s >= lo - 1e-12 && s <= hi + 1e-12);
        map.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((frame_score(&map) - s).abs() <= 1e-12);
    }

    #[test]
    fn half_lambda_is_the_mean(lp in 0.0f64..20.0, lb in 0.0f64..20.0) {
        let c = combined_loss(lp, lb, 0.5).unwrap();
        let mean = (lp + lb) / 2.0;
        prop_assert!((c - mean).abs() <= f64::EPSILON * mean.abs());
        prop_assert_eq!(combined_loss(lp, lb, 1.0).unwrap(), lp);
        prop_assert_eq!(combined_loss(lp, lb, 0.0).unwrap(), lb);
        let (a, b) = (lp as f32, lb as f32);
        let cf = combined_loss(a, b, 0.5).unwrap();
        prop_assert!((cf - (a + b) / 2.0).abs() <= f32::EPSILON * ((a + b) / 2.0));
        prop_assert_eq!(combined_loss(a, b, 1.0).unwrap(), a);
        prop_assert_eq!(combined_loss(a, b, 0.0).unwrap(), b);
    }
}

#[test]
fn matching_predictions_have_zero_loss() {
    for y in [0.0f64, 1.0] {
        assert!(pixelwise_bce(&[y; 16], y) <= 1e-6);
        assert!(binary_bce(y, y) <= 1e-6);
        assert!(pixelwise_bce(&[y as f32; 16], y as f32) <= 1e-6);
        assert!(binary_bce(y as f32, y as f32) <= 1e-6);
    }
    assert!(PROB_CLAMP <= 1e-6);
    // graph losses agree with the scalar helpers
    let mut g = Graph::<f64>::new();
    let map = g.leaf(Tensor::new(&[1, 1, 1, 2], vec![0.5, 0.25]).unwrap());
    let l = g.pixelwise_bce(map, &[0.0]).unwrap();
    let expected = (2f64.ln() + (4.0f64 / 3.0).ln()) / 2.0;
    assert!((g.value(l).data()[0] - expected).abs() < 1e-12);
    assert!((expected - 0.490415).abs() < 1e-6);
    assert!(combined_loss(0.2, 0.4, 1.5).is_err());
}

/// Zeroing dense layer j changes the input of every later layer of its block
/// and of nothing earlier.
#[test]
fn dense_connectivity() {
    let cfg = tiny(32, 32, 4, 3, (4, 3));
    let model = Model::<f64>::new(cfg, 5).unwrap();
    let x = {
        let f = input(1, 32, 32, 2);
        Tensor::new(f.shape(), f.data().iter().map(|&v| f64::from(v)).collect()).unwrap()
    };
    let plain = model.forward_with(&x, ForwardOptions { mode: Mode::Eval, ablate: None }).unwrap();
    for (block, layers) in [(0usize, 4usize), (1, 3)] {
        for j in 0..layers {
            let ablated = model
                .forward_with(&x, ForwardOptions { mode: Mode::Eval, ablate: Some((block, j)) })
                .unwrap();
            for later in 0..layers {
                let a = plain.graph.value(plain.dense_inputs[block][later]).data();
                let b = ablated.graph.value(ablated.dense_inputs[block][later]).data();
                if later <= j {
                    assert_eq!(a, b, "block {block} layer {later} changed by ablating {j}");
                } else {
                    assert_ne!(a, b, "block {block} layer {later} unaffected by ablating {j}");
                }
            }
        }
    }
}

#[test]
fn same_seed_same_parameters_and_eval_is_deterministic() {
    let a = Model::<f32>::new(ModelConfig::desk(), 9).unwrap();
    let b = Model::<f32>::new(ModelConfig::desk(), 9).unwrap();
    assert_eq!(a.named_arrays(), b.named_arrays());
    let x = input(2, 64, 64, 4);
    assert_eq!(a.score(&x).unwrap(), a.score(&x).unwrap());
    let c = Model::<f32>::new(ModelConfig::desk(), 10).unwrap();
    assert_ne!(a.named_arrays(), c.named_arrays());
}
