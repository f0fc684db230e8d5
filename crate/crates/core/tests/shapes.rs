use pixbis_core::autodiff::{Graph, PoolKind, Tensor};
use proptest::prelude::*;

/// Number of window placements that fit, counted one by one.
fn placements(extent: usize, k: usize, stride: usize, pad: usize) -> usize {
    let mut n = 0;
    let mut start = 0;
    while start + k <= extent + 2 * pad {
        n += 1;
        start += stride;
    }
    n
}

fn ramp(shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conv_output_extent(h in 1usize..12, w in 1usize..12, k in 1usize..5, stride in 1usize..4, pad in 0usize..3) {
        prop_assume!(h + 2 * pad >= k && w + 2 * pad >= k);
        let mut g = Graph::new();
        let x = g.leaf(ramp(&[1, 2, h, w]));
        let wt = g.leaf(ramp(&[3, 2, k, k]));
        let y = g.conv2d(x, wt, None, stride, pad).unwrap();
        prop_assert_eq!(
            g.value(y).shape(),
            &[1, 3, placements(h, k, stride, pad), placements(w, k, stride, pad)]
        );
    }

    #[test]
    fn pool_output_extent(h in 1usize..12, w in 1usize..12, k in 1usize..4, stride in 1usize..4, pad in 0usize..3, max in any::<bool>()) {
        prop_assume!(pad < k && h + 2 * pad >= k && w + 2 * pad >= k);
        let kind = if max { PoolKind::Max } else { PoolKind::Avg };
        let mut g = Graph::new();
        let x = g.leaf(ramp(&[2, 1, h, w]));
        let y = g.pool2d(x, kind, k, stride, pad).unwrap();
        prop_assert_eq!(
            g.value(y).shape(),
            &[2, 1, placements(h, k, stride, pad), placements(w, k, stride, pad)]
        );
    }

    #[test]
    fn concat_then_slice_is_identity(n in 1usize..3, h in 1usize..4, w in 1usize..4, chans in prop::collection::vec(1usize..4, 1..5)) {
        let mut g = Graph::new();
        let parts: Vec<Tensor<f64>> = chans
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let len = n * c * h * w;
                Tensor::new(&[n, c, h, w], (0..len).map(|j| (i * 1000 + j) as f64).collect()).unwrap()
            })
            .collect();
        let vars: Vec<_> = parts.iter().map(|t| g.leaf(t.clone())).collect();
        let out = g.concat_channels(&vars).unwrap();
        let total: usize = chans.iter().sum();
        prop_assert_eq!(g.value(out).shape(), &[n, total, h, w]);
        let data = g.value(out).data();
        let hw = h * w;
        let mut offset = 0;
        for (t, &c) in parts.iter().zip(&chans) {
            for s in 0..n {
                let got = &data[(s * total + offset) * hw..(s * total + offset + c) * hw];
                prop_assert_eq!(got, &t.data()[s * c * hw..(s + 1) * c * hw]);
            }
            offset += c;
        }
    }

    #[test]
    fn activation_ranges(values in prop::collection::vec(-60.0f64..60.0, 1..40)) {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(&[values.len()], values.clone()).unwrap());
        let s = g.sigmoid(x);
        let r = g.relu(x);
        prop_assert!(g.value(s).data().iter().all(|&p| p > 0.0 && p < 1.0));
        prop_assert!(g.value(r).data().iter().all(|&v| v >= 0.0));
        let mut g32 = Graph::<f32>::new();
        let x32 = g32.leaf(Tensor::new(&[values.len()], values.iter().map(|&v| v as f32).collect()).unwrap());
        let s32 = g32.sigmoid(x32);
        prop_assert!(g32.value(s32).data().iter().all(|&p| p > 0.0 && p < 1.0));
    }
}
