//! Finite-difference checks of every differentiable primitive and of the
//! assembled network, in double precision.

use pixbis_core::autodiff::{grad_check, relative_error, GradCheck, Graph, PoolKind, Tensor, Var};
use pixbis_core::model::{ForwardOptions, Mode, Model, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: usize = 20;
const TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

fn check<F>(name: &str, op: F, inputs: &[Tensor<f64>], seed: u64)
where
    F: Fn(&mut Graph<f64>, &[Var]) -> pixbis_core::error::Result<Var>,
{
    let cfg = GradCheck {
        seed,
        ..GradCheck::default()
    };
    let report = grad_check(op, inputs, &cfg).unwrap();
    assert!(report.checked > 0);
    assert!(
        report.max_rel_error <= TOL,
        "{name} case {seed}: {:?}",
        report
    );
}

#[test]
fn conv2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..CASES as u64 {
        let (n, c, f) = (rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..4));
        let k = rng.random_range(1..4);
        let stride = rng.random_range(1..3);
        let padding = rng.random_range(0..k);
        let h = rng.random_range(k..7);
        let w = rng.random_range(k..7);
        let with_bias = rng.random_bool(0.5);
        let mut inputs = vec![
            rand_tensor(&mut rng, &[n, c, h, w], -1.0, 1.0),
            rand_tensor(&mut rng, &[f, c, k, k], -1.0, 1.0),
        ];
        if with_bias {
            inputs.push(rand_tensor(&mut rng, &[f], -1.0, 1.0));
        }
        check(
            "conv2d",
            |g, v| g.conv2d(v[0], v[1], v.get(2).copied(), stride, padding),
            &inputs,
            case,
        );
    }
}

#[test]
fn batchnorm_train() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..CASES as u64 {
        let (n, c) = (rng.random_range(1..4), rng.random_range(1..4));
        let (h, w) = (rng.random_range(2..5), rng.random_range(2..5));
        let inputs = [
            rand_tensor(&mut rng, &[n, c, h, w], -2.0, 2.0),
            rand_tensor(&mut rng, &[c], 0.5, 1.5),
            rand_tensor(&mut rng, &[c], -0.5, 0.5),
        ];
        check(
            "batchnorm train",
            |g, v| Ok(g.batchnorm2d_train(v[0], v[1], v[2], 1e-5)?.0),
            &inputs,
            case,
        );
    }
}

#[test]
fn batchnorm_eval() {
    use pixbis_core::autodiff::RunningStats;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..CASES as u64 {
        let (n, c) = (rng.random_range(1..3), rng.random_range(1..4));
        let (h, w) = (rng.random_range(1..5), rng.random_range(1..5));
        let mut stats = RunningStats::<f64>::new(c);
        for ch in 0..c {
            stats.mean[ch] = rng.random_range(-1.0..1.0);
            stats.var[ch] = rng.random_range(0.2..2.0);
        }
        let inputs = [
            rand_tensor(&mut rng, &[n, c, h, w], -2.0, 2.0),
            rand_tensor(&mut rng, &[c], 0.5, 1.5),
            rand_tensor(&mut rng, &[c], -0.5, 0.5),
        ];
        check(
            "batchnorm eval",
            |g, v| g.batchnorm2d_eval(v[0], v[1], v[2], &stats, 1e-5),
            &inputs,
            case,
        );
    }
}

#[test]
fn pooling() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..CASES as u64 {
        let kind = if case % 2 == 0 { PoolKind::Max } else { PoolKind::Avg };
        let k = rng.random_range(1..4);
        let stride = rng.random_range(1..3);
        let padding = rng.random_range(0..k);
        let (h, w) = (rng.random_range(k..8), rng.random_range(k..8));
        let c = rng.random_range(1..3);
        let x = rand_tensor(&mut rng, &[1, c, h, w], -1.0, 1.0);
        check("pool2d", |g, v| g.pool2d(v[0], kind, k, stride, padding), &[x], case);
    }
}

#[test]
fn activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..CASES as u64 {
        let shape = [rng.random_range(1..4), rng.random_range(1..6)];
        // relu is checked away from its kink
        let mut x = rand_tensor(&mut rng, &shape, -3.0, 3.0);
        for v in x.data_mut() {
            if v.abs() < 1e-3 {
                *v = 0.5;
            }
        }
        check("relu", |g, v| Ok(g.relu(v[0])), &[x.clone()], case);
        check("sigmoid", |g, v| Ok(g.sigmoid(v[0])), &[x], case);
    }
}

#[test]
fn concat() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..CASES as u64 {
        let (n, h, w) = (rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..4));
        let parts = rng.random_range(1..4);
        let inputs: Vec<_> = (0..parts)
            .map(|_| {
                let c = rng.random_range(1..4);
                rand_tensor(&mut rng, &[n, c, h, w], -1.0, 1.0)
            })
            .collect();
        check("concat", |g, v| g.concat_channels(v), &inputs, case);
    }
}

#[test]
fn affine() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..CASES as u64 {
        let (n, d) = (rng.random_range(1..6), rng.random_range(1..12));
        let inputs = [
            rand_tensor(&mut rng, &[n, d], -1.0, 1.0),
            rand_tensor(&mut rng, &[d, 1], -1.0, 1.0),
            rand_tensor(&mut rng, &[1], -1.0, 1.0),
        ];
        check("affine", |g, v| g.affine(v[0], v[1], v[2]), &inputs, case);
    }
}

#[test]
fn losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..CASES as u64 {
        let n = rng.random_range(1..5);
        let (h, w) = (rng.random_range(1..4), rng.random_range(1..4));
        let labels: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect();
        let map = rand_tensor(&mut rng, &[n, 1, h, w], 0.05, 0.95);
        let pred = rand_tensor(&mut rng, &[n, 1], 0.05, 0.95);
        let lambda: f64 = rng.random_range(0.0..=1.0);
        check("pixel bce", |g, v| g.pixelwise_bce(v[0], &labels), &[map.clone()], case);
        check("binary bce", |g, v| g.binary_bce(v[0], &labels), &[pred.clone()], case);
        check(
            "combined",
            |g, v| {
                let p = g.pixelwise_bce(v[0], &labels)?;
                let b = g.binary_bce(v[1], &labels)?;
                g.combined_loss(p, b, lambda)
            },
            &[map, pred],
            case,
        );
    }
}

fn model_loss(model: &Model<f64>, x: &Tensor<f64>, labels: &[f64]) -> (f64, Vec<usize>) {
    let opts = ForwardOptions {
        mode: Mode::Train,
        ablate: None,
    };
    let mut pass = model.forward_with(x, opts).unwrap();
    let loss = pass.losses(labels, 0.5).unwrap();
    (pass.scalar(loss.combined), pass.graph.branch_pattern())
}

/// Central differences are only meaningful when both probes stay on the
/// smooth piece of the base point; coordinates whose probes cross a relu or
/// max-pool switch are counted and skipped. Gradients below the roundoff
/// resolution of the difference quotient (parameters cancelled by a later
/// normalization) are compared in absolute terms against that resolution.
#[test]
fn full_model() {
    let mut model = Model::<f64>::new(ModelConfig::desk(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = rand_tensor(&mut rng, &[1, 3, 64, 64], 0.0, 1.0);
    let labels = [1.0];

    let opts = ForwardOptions {
        mode: Mode::Train,
        ablate: None,
    };
    let mut pass = model.forward_with(&x, opts).unwrap();
    let base = pass.graph.branch_pattern();
    let loss = pass.losses(&labels, 0.5).unwrap();
    let resolution = 8.0 * f64::EPSILON * pass.scalar(loss.combined).abs().max(1.0) / 1e-5;
    pass.backward(loss.combined).unwrap();
    let grads = pass.take_param_grads();

    let step = 1e-5;
    let (mut checked, mut crossed) = (0, 0);
    let mut worst = (0.0f64, String::new());
    for i in 0..model.params().len() {
        let numel = model.params()[i].tensor.numel();
        let analytic = grads[i].clone().expect("every parameter is reached");
        for _ in 0..10 {
            let j = rng.random_range(0..numel);
            let orig = model.params()[i].tensor.data()[j];
            model.params_mut()[i].tensor.data_mut()[j] = orig + step;
            let (plus, bp) = model_loss(&model, &x, &labels);
            model.params_mut()[i].tensor.data_mut()[j] = orig - step;
            let (minus, bm) = model_loss(&model, &x, &labels);
            model.params_mut()[i].tensor.data_mut()[j] = orig;
            if bp != base || bm != base {
                crossed += 1;
                continue;
            }
            checked += 1;
            let numeric = (plus - minus) / (2.0 * step);
            if analytic[j].abs() <= resolution && numeric.abs() <= resolution {
                continue;
            }
            let err = relative_error(analytic[j], numeric);
            if err > worst.0 {
                worst = (err, format!("{}[{j}]", model.params()[i].name));
            }
        }
    }
    let total = checked + crossed;
    assert!(checked * 10 >= total * 9, "{crossed} of {total} probes crossed a switch");
    assert!(worst.0 <= 1e-4, "worst {worst:?}");
}

