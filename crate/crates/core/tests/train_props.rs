use pixbis_core::autodiff::Tensor;
use pixbis_core::data::{Image, Label};
use pixbis_core::model::Param;
use pixbis_core::train::{augment, balance_classes, stream_rng, AdamConfig, AdamState, AugmentConfig, Concern};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balanced_sets_have_equal_classes(flags in prop::collection::vec(any::<bool>(), 2..300), seed in any::<u64>(), epoch in 0usize..50) {
        let labels: Vec<Label> = flags.iter().map(|&b| if b { Label::Bonafide } else { Label::Attack }).collect();
        let nb = flags.iter().filter(|&&b| b).count();
        let na = flags.len() - nb;
        let mut rng = stream_rng(seed, Concern::Balance, epoch);
        let result = balance_classes(&labels, &mut rng);
        if nb == 0 || na == 0 {
            prop_assert!(result.is_err());
        } else {
            let idx = result.unwrap();
            prop_assert_eq!(idx.len(), 2 * nb.min(na));
            let b = idx.iter().filter(|&&i| labels[i] == Label::Bonafide).count();
            prop_assert_eq!(b, nb.min(na));
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            let mut again = stream_rng(seed, Concern::Balance, epoch);
            prop_assert_eq!(balance_classes(&labels, &mut again).unwrap(), idx);
        }
    }

    #[test]
    fn augmentation_stays_in_range(values in prop::collection::vec(0.0f32..=1.0, 3 * 16), jitter in 0.0f64..=0.5, seed in any::<u64>()) {
        let img = Image::from_planar(4, 4, values).unwrap();
        let cfg = AugmentConfig { flip_prob: 0.5, jitter };
        let out = augment(&img, cfg, &mut stream_rng(seed, Concern::Augment, 0));
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let again = augment(&img, cfg, &mut stream_rng(seed, Concern::Augment, 0));
        prop_assert_eq!(out, again);
    }

    #[test]
    fn adam_invariants(init in prop::collection::vec(-2.0f64..2.0, 1..8), grads in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 8), 1..6)) {
        let n = init.len();
        let mut params = vec![Param { name: "w".into(), tensor: Tensor::new(&[n], init.clone()).unwrap() }];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        for (step, g) in grads.iter().enumerate() {
            state.step(&mut params, &[Some(g[..n].to_vec())]).unwrap();
            prop_assert_eq!(state.t, step as u64 + 1);
            prop_assert_eq!(state.m[0].shape(), params[0].tensor.shape());
            prop_assert_eq!(state.v[0].shape(), params[0].tensor.shape());
            prop_assert!(state.v[0].data().iter().all(|&v| v >= 0.0));
        }

        let cfg = AdamConfig { weight_decay: 0.0, ..AdamConfig::default() };
        let mut params = vec![Param { name: "w".into(), tensor: Tensor::new(&[n], init.clone()).unwrap() }];
        let mut state = AdamState::new(cfg, &params);
        for _ in 0..3 {
            state.step(&mut params, &[Some(vec![0.0; n])]).unwrap();
        }
        prop_assert_eq!(params[0].tensor.data(), &init[..]);
    }
}
