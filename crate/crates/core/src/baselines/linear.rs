use crate::autodiff::sigmoid;
use crate::data::manifest::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConfig {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 500,
            lr: 0.5,
        }
    }
}

/// L2-regularized logistic regression on standardized features. The output
/// is the bonafide probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Full-batch gradient descent from zero on
/// `mean logistic loss + l2 · ‖w‖²`. Dimensions with zero variance get a
/// standard deviation of 1.
pub fn linear_train(features: &[Vec<f64>], labels: &[Label], cfg: LinearConfig) -> Result<LinearModel> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} feature vectors for {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !labels.contains(&Label::Bonafide) || !labels.contains(&Label::Attack) {
        return Err(Error::InvalidArgument("logistic regression needs both classes".into()));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::Shape("feature vectors differ in dimension".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for f in features {
        mean.iter_mut().zip(f).for_each(|(m, v)| *m += v / n);
    }
    let mut std = vec![0.0; d];
    for f in features {
        std.iter_mut().zip(f).zip(&mean).for_each(|((s, v), m)| *s += (v - m).powi(2) / n);
    }
    std.iter_mut().for_each(|s| {
        *s = s.sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    });
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|l| l.target()).collect();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..cfg.epochs {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (xi, yi) in x.iter().zip(&y) {
            let z = b + xi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let r = sigmoid(z) - yi;
            gb += r;
            gw.iter_mut().zip(xi).for_each(|(g, a)| *g += r * a);
        }
        for (wj, gj) in w.iter_mut().zip(&gw) {
            *wj -= cfg.lr * (gj / n + 2.0 * cfg.l2 * *wj);
        }
        b -= cfg.lr * gb / n;
    }
    Ok(LinearModel {
        weights: w,
        bias: b,
        mean,
        std,
    })
}

impl LinearModel {
    pub fn response(&self, feature: &[f64]) -> Result<f64> {
        if feature.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "feature has {} dimensions, model expects {}",
                feature.len(),
                self.weights.len()
            )));
        }
        Ok(self.bias
            + feature
                .iter()
                .zip(&self.mean)
                .zip(&self.std)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| (v - m) / s * w)
                .sum::<f64>())
    }
}

/// Bonafide probability of one frame.
pub fn linear_score(model: &LinearModel, feature: &[f64]) -> Result<f64> {
    Ok(sigmoid(model.response(feature)?))
}
