//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many coordinates per input (sampled with `seed`).
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub input: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<Mismatch>,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of `op` against central differences.
///
/// Non-scalar outputs are reduced with a fixed random projection so every
/// output element contributes to the checked scalar.
pub fn grad_check<F>(op: F, inputs: &[Tensor<f64>], cfg: &GradCheck) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut projection: Option<Vec<f64>> = None;

    let mut graph = Graph::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| graph.leaf(t.clone().with_grad()))
        .collect();
    let out = op(&mut graph, &vars)?;
    let numel = graph.value(out).numel();
    if numel > 1 {
        projection = Some(
            (0..numel)
                .map(|_| {
                    let m: f64 = rng.random_range(0.5..1.5);
                    if rng.random_bool(0.5) {
                        m
                    } else {
                        -m
                    }
                })
                .collect(),
        );
    }
    let loss = project(&mut graph, out, projection.as_deref())?;
    graph.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| {
            graph
                .grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.numel()])
        })
        .collect();

    let evaluate = |perturbed: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vs: Vec<Var> = perturbed.iter().map(|t| g.leaf(t.clone())).collect();
        let out = op(&mut g, &vs)?;
        let loss = project(&mut g, out, projection.as_deref())?;
        Ok(g.value(loss).data()[0])
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        tolerance: cfg.tolerance,
    };
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let coords: Vec<usize> = match cfg.max_coords {
            Some(k) if k < input.numel() => sample(&mut rng, input.numel(), k).into_vec(),
            _ => (0..input.numel()).collect(),
        };
        for j in coords {
            let original = input.data()[j];
            work[i].data_mut()[j] = original + cfg.step;
            let plus = evaluate(&work)?;
            work[i].data_mut()[j] = original - cfg.step;
            let minus = evaluate(&work)?;
            work[i].data_mut()[j] = original;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let err = relative_error(analytic[i][j], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some(Mismatch {
                    input: i,
                    coord: j,
                    analytic: analytic[i][j],
                    numeric,
                });
            }
        }
    }
    Ok(report)
}

fn project(graph: &mut Graph<f64>, out: Var, weights: Option<&[f64]>) -> Result<Var> {
    match weights {
        None => Ok(out),
        Some(w) => {
            let shape = graph.value(out).shape().to_vec();
            let wv = graph.constant(Tensor::new(&shape, w.to_vec())?);
            let prod = graph.mul(out, wv)?;
            Ok(graph.sum(prod))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_op_has_zero_error() {
        let x = Tensor::from_f64(&[3], &[0.3, -1.0, 2.0]).unwrap();
        let report = grad_check(|_, v| Ok(v[0]), &[x], &GradCheck::default()).unwrap();
        assert_eq!(report.checked, 3);
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert!(report.passed());
    }

    #[test]
    fn sigmoid_at_zero_slope_is_quarter() {
        let x = Tensor::from_f64(&[1], &[0.0]).unwrap();
        let report = grad_check(|g, v| Ok(g.sigmoid(v[0])), &[x], &GradCheck::default()).unwrap();
        let worst = report.worst.unwrap();
        assert!((worst.analytic - 0.25).abs() < 1e-15);
        assert!((worst.numeric - 0.25).abs() < 1e-9);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // relu at a kink: one-sided derivative 1 vs central difference 0.5
        let x = Tensor::from_f64(&[1], &[0.0]).unwrap();
        let report = grad_check(|g, v| Ok(g.relu(v[0])), &[x], &GradCheck::default()).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 0.5) - 0.5).abs() < 1e-15);
    }
}
