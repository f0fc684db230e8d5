//! Handcrafted-feature baselines: uniform LBP histograms and a reduced image
//! quality feature set, each scored by logistic regression.

pub mod iqm;
pub mod lbp;
pub mod linear;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

pub use iqm::{iqm_features, IQM_DIM};
pub use lbp::{uniform_lbp_histogram, LBP_BINS};
pub use linear::{linear_score, linear_train, LinearConfig, LinearModel};

use crate::data::manifest::Sample;
use crate::data::{read_ppm, select_video_frames, Image, ProtocolSplits};
use crate::error::{Error, Result};
use crate::metrics::FrameRecord;

/// Single-channel image in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Gray {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_plane(width: usize, height: usize, plane: &[f32]) -> Self {
        Self {
            width,
            height,
            data: plane.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixel with coordinates clamped into the image.
    pub fn clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }
}

/// Rec. 601 luma: `0.299 R + 0.587 G + 0.114 B`.
pub fn to_grayscale(image: &Image) -> Gray {
    let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
    let data = (0..r.len())
        .map(|i| 0.299 * r[i] as f64 + 0.587 * g[i] as f64 + 0.114 * b[i] as f64)
        .collect();
    Gray {
        width: image.width(),
        height: image.height(),
        data,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Lbp,
    Iqm,
}

impl FeatureKind {
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Lbp => LBP_BINS,
            FeatureKind::Iqm => IQM_DIM,
        }
    }

    pub fn extract(self, image: &Image) -> Result<Vec<f64>> {
        match self {
            FeatureKind::Lbp => uniform_lbp_histogram(&to_grayscale(image)),
            FeatureKind::Iqm => Ok(iqm_features(image)),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Lbp => "lbp",
            FeatureKind::Iqm => "iqm",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lbp" => Ok(FeatureKind::Lbp),
            "iqm" => Ok(FeatureKind::Iqm),
            _ => Err(Error::InvalidArgument(format!("unknown baseline {s:?} (expected lbp or iqm)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub kind: FeatureKind,
    pub linear: LinearConfig,
    pub frames_per_video: usize,
}

/// Features of a set of frames, in sample order.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub samples: Vec<Sample>,
    pub features: Vec<Vec<f64>>,
}

pub fn extract_features(samples: &[Sample], kind: FeatureKind) -> Result<FeatureSet> {
    let mut features = Vec::with_capacity(samples.len());
    for s in samples {
        features.push(kind.extract(&read_ppm(&s.path)?)?);
    }
    Ok(FeatureSet {
        samples: samples.to_vec(),
        features,
    })
}

/// CSV dump `video_id,frame_index,f0..f{D-1}`.
pub fn write_features(set: &FeatureSet, path: &Path) -> Result<()> {
    let d = set.features.first().map_or(0, Vec::len);
    let mut text = String::from("video_id,frame_index");
    for k in 0..d {
        text.push_str(&format!(",f{k}"));
    }
    text.push('\n');
    for (s, f) in set.samples.iter().zip(&set.features) {
        text.push_str(&format!("{},{}", s.video_id, s.frame_index));
        for v in f {
            text.push_str(&format!(",{v:?}"));
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub model: LinearModel,
    pub dev: Vec<FrameRecord>,
    pub eval: Vec<FrameRecord>,
    pub train_features: FeatureSet,
}

/// Fits on the train split and scores every dev and eval frame.
pub fn run_baseline(splits: &ProtocolSplits, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    let pick = |s: &[Sample]| select_video_frames(s, cfg.frames_per_video);
    let train = extract_features(&pick(&splits.train), cfg.kind)?;
    let labels: Vec<_> = train.samples.iter().map(|s| s.label).collect();
    let model = linear_train(&train.features, &labels, cfg.linear)?;
    let score = |samples: &[Sample]| -> Result<Vec<FrameRecord>> {
        let set = extract_features(&pick(samples), cfg.kind)?;
        set.samples
            .iter()
            .zip(&set.features)
            .map(|(s, f)| {
                Ok(FrameRecord {
                    video_id: s.video_id.clone(),
                    frame_index: s.frame_index,
                    label: s.label,
                    pai: s.pai,
                    score: linear_score(&model, f)? as f32 as f64,
                })
            })
            .collect()
    };
    let dev = score(&splits.dev)?;
    let eval = score(&splits.eval)?;
    Ok(BaselineOutput {
        model,
        dev,
        eval,
        train_features: train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale() {
        let px = |rgb: [f32; 3]| to_grayscale(&Image::from_fn(1, 1, |_, _| rgb)).data[0];
        assert!((px([1.0, 1.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!((px([1.0, 0.0, 0.0]) - 0.299).abs() < 1e-12);
        assert!((px([0.25, 0.25, 0.25]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn kinds() {
        let img = Image::from_fn(6, 6, |x, y| [(x * y) as f32 / 25.0, 0.5, 0.1]);
        for k in [FeatureKind::Lbp, FeatureKind::Iqm] {
            assert_eq!(k.extract(&img).unwrap().len(), k.dim());
            assert_eq!(k.to_string().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("svm".parse::<FeatureKind>().is_err());
    }
}
