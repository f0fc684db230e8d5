//! Browser bindings for the demo page in `www/`.
//!
//! Three operations: render a synthetic sample with one attack artifact,
//! show its LBP code image and histogram, and sweep a threshold over a pair
//! of score lists.

use pixbis_core::baselines::iqm::{iqm_features, IQM_NAMES};
use pixbis_core::baselines::lbp::{lbp_codes, uniform_lbp_histogram, uniform_lookup, LBP_BINS};
use pixbis_core::baselines::to_grayscale;
use pixbis_core::data::{apply_attack_artifact, artifact_rng, render_face, Image, Label, Pai};
use pixbis_core::metrics::{eer_threshold, far_frr, roc_points, ScoreRecord};
use wasm_bindgen::prelude::*;

fn js(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

fn rgba(img: &Image) -> Vec<u8> {
    img.to_rgb8()
        .chunks(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect()
}

/// A rendered face, optionally passed through one attack artifact.
#[wasm_bindgen]
pub struct Sample {
    image: Image,
}

/// Renders subject `subject`, frame `frame` at `size`×`size`. `pai` is one of
/// the PAI names (`none` for bonafide).
pub fn render(pai: &str, strength: f64, subject: u32, frame: u32, seed: u32, size: u32) -> Result<Image, String> {
    let pai: Pai = pai.parse()?;
    if !(8..=256).contains(&size) {
        return Err(format!("size {size} outside 8..=256"));
    }
    let (subject, frame, seed) = (u64::from(subject), u64::from(frame), u64::from(seed));
    let capture = if pai == Pai::None { 0 } else { 1000 };
    let face = render_face(size as usize, subject, capture, frame, seed);
    if pai == Pai::None {
        return Ok(face);
    }
    let mut rng = artifact_rng(seed, subject, 0);
    apply_attack_artifact(&face, pai, strength, &mut rng).map_err(|e| e.to_string())
}

#[wasm_bindgen]
impl Sample {
    #[wasm_bindgen(constructor)]
    pub fn new(pai: &str, strength: f64, subject: u32, frame: u32, seed: u32, size: u32) -> Result<Sample, JsError> {
        render(pai, strength, subject, frame, seed, size).map(|image| Sample { image }).map_err(js)
    }

    pub fn size(&self) -> u32 {
        self.image.width() as u32
    }

    /// Pixels as RGBA bytes for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        rgba(&self.image)
    }

    /// Image-quality features, in the order of `iqm_names`.
    pub fn iqm(&self) -> Vec<f64> {
        iqm_features(&self.image)
    }

    /// LBP codes of the interior pixels drawn as gray levels, uniform
    /// patterns spread over the range and the rest black.
    pub fn lbp_rgba(&self) -> Result<Vec<u8>, JsError> {
        let codes = lbp_codes(&to_grayscale(&self.image)).map_err(js)?;
        let table = uniform_lookup();
        let scale = 255.0 / (LBP_BINS - 2) as f64;
        Ok(codes
            .iter()
            .flat_map(|&c| {
                let bin = table[c as usize] as usize;
                let v = if bin == LBP_BINS - 1 { 0 } else { (bin as f64 * scale).round() as u8 };
                [v, v, v, 255]
            })
            .collect())
    }

    /// Normalized uniform-LBP histogram; the last bin holds non-uniform codes.
    pub fn lbp_histogram(&self) -> Result<Vec<f64>, JsError> {
        uniform_lbp_histogram(&to_grayscale(&self.image)).map_err(js)
    }
}

#[wasm_bindgen]
pub fn iqm_names() -> Vec<String> {
    IQM_NAMES.iter().map(|s| s.to_string()).collect()
}

#[wasm_bindgen]
pub fn pai_names() -> Vec<String> {
    std::iter::once(Pai::None).chain(Pai::ATTACKS).map(|p| p.to_string()).collect()
}

/// Bonafide and attack scores with higher meaning more bonafide.
#[wasm_bindgen]
pub struct RocExplorer {
    records: Vec<ScoreRecord>,
}

pub fn score_records(bonafide: &[f64], attack: &[f64]) -> Result<Vec<ScoreRecord>, String> {
    if bonafide.is_empty() || attack.is_empty() {
        return Err("need at least one score of each class".into());
    }
    if bonafide.iter().chain(attack).any(|s| !s.is_finite()) {
        return Err("scores must be finite".into());
    }
    let label = |l: Label, pai: Pai, prefix: &str, s: &[f64]| -> Vec<ScoreRecord> {
        s.iter()
            .enumerate()
            .map(|(i, &score)| ScoreRecord { video_id: format!("{prefix}{i}"), label: l, pai, score })
            .collect()
    };
    let mut out = label(Label::Bonafide, Pai::None, "b", bonafide);
    out.extend(label(Label::Attack, Pai::ATTACKS[0], "a", attack));
    Ok(out)
}

#[wasm_bindgen]
impl RocExplorer {
    #[wasm_bindgen(constructor)]
    pub fn new(bonafide: &[f64], attack: &[f64]) -> Result<RocExplorer, JsError> {
        score_records(bonafide, attack).map(|records| RocExplorer { records }).map_err(js)
    }

    /// Flattened `(threshold, far, frr)` triples in threshold order.
    pub fn roc(&self) -> Result<Vec<f64>, JsError> {
        let pts = roc_points(&self.records).map_err(js)?;
        Ok(pts.iter().flat_map(|p| [p.threshold, p.far, p.frr]).collect())
    }

    /// `[threshold, eer]`.
    pub fn eer(&self) -> Result<Vec<f64>, JsError> {
        let (t, e) = eer_threshold(&self.records).map_err(js)?;
        Ok(vec![t, e])
    }

    /// `[far, frr, hter]` at `threshold`.
    pub fn at(&self, threshold: f64) -> Result<Vec<f64>, JsError> {
        let (far, frr) = far_frr(&self.records, threshold).map_err(js)?;
        Ok(vec![far, frr, (far + frr) / 2.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonafide_and_attack_share_nothing_but_size() {
        let face = render("none", 1.0, 2, 0, 7, 48).unwrap();
        for pai in Pai::ATTACKS {
            let att = render(pai.as_str(), 1.0, 2, 0, 7, 48).unwrap();
            assert_eq!(att.width(), 48);
            assert!(att.mean_abs_diff(&face) > 0.0);
        }
        assert!(render("mask", 1.0, 0, 0, 0, 32).is_err());
        assert!(render("none", 1.0, 0, 0, 0, 4).is_err());
    }

    #[test]
    fn rgba_is_opaque_and_sized() {
        let s = Sample { image: render("replay_moire", 0.5, 1, 1, 3, 16).unwrap() };
        let px = s.rgba();
        assert_eq!(px.len(), 16 * 16 * 4);
        assert!(px.chunks(4).all(|p| p[3] == 255));
        assert_eq!(s.iqm().len(), iqm_names().len());
    }

    #[test]
    fn explorer_records() {
        assert!(score_records(&[], &[0.1]).is_err());
        assert!(score_records(&[f64::NAN], &[0.1]).is_err());
        let r = score_records(&[0.9, 0.8], &[0.1]).unwrap();
        let (t, eer) = eer_threshold(&r).unwrap();
        assert_eq!(eer, 0.0);
        assert!(t > 0.1 && t <= 0.8);
        assert_eq!(pai_names().len(), 5);
    }
}
