//! ISO/IEC 30107-3 error rates, EER thresholding, ROC sweeps and score files.
//!
//! Scores are oriented so that higher means more bonafide, and a
//! presentation is accepted as bonafide when `score >= threshold`.

mod io;
mod report;

use std::collections::HashMap;

pub use io::{read_frame_scores, read_scores, write_frame_scores, write_roc, write_scores};
pub use report::{evaluate, MetricsReport};

use crate::data::manifest::{Label, Pai};
use crate::error::{Error, Result};

/// Video-level (or frame-level when `frame_index` is set) score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub video_id: String,
    pub label: Label,
    pub pai: Pai,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub video_id: String,
    pub frame_index: usize,
    pub label: Label,
    pub pai: Pai,
    pub score: f64,
}

/// Which side of the threshold counts as bonafide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    HigherIsBonafide,
    LowerIsBonafide,
}

impl Polarity {
    fn orient(self, s: f64) -> f64 {
        match self {
            Polarity::HigherIsBonafide => s,
            Polarity::LowerIsBonafide => -s,
        }
    }
}

/// Mean frame score per video, in order of first appearance, rounded to
/// single precision.
pub fn aggregate_video_scores(frames: &[FrameRecord]) -> Result<Vec<ScoreRecord>> {
    let mut order: Vec<&str> = Vec::new();
    let mut acc: HashMap<&str, (Label, Pai, Vec<f64>)> = HashMap::new();
    for f in frames {
        if !f.score.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite score for {}:{}",
                f.video_id, f.frame_index
            )));
        }
        match acc.get_mut(f.video_id.as_str()) {
            Some((label, pai, scores)) => {
                if *label != f.label || *pai != f.pai {
                    return Err(Error::InvalidArgument(format!(
                        "video {} mixes {label}/{pai} and {}/{} frames",
                        f.video_id, f.label, f.pai
                    )));
                }
                scores.push(f.score);
            }
            None => {
                order.push(&f.video_id);
                acc.insert(&f.video_id, (f.label, f.pai, vec![f.score]));
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (label, pai, mut scores) = acc.remove(id).expect("inserted above");
            // summation order must not depend on frame order
            scores.sort_by(f64::total_cmp);
            // stored at single precision so score files round-trip exactly
            let score = (scores.iter().sum::<f64>() / scores.len() as f64) as f32 as f64;
            ScoreRecord {
                video_id: id.to_string(),
                label,
                pai,
                score,
            }
        })
        .collect())
}

fn split_classes(records: &[ScoreRecord], polarity: Polarity) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut bona = Vec::new();
    let mut attack = Vec::new();
    for r in records {
        if !r.score.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite score for {}", r.video_id)));
        }
        let s = polarity.orient(r.score);
        match r.label {
            Label::Bonafide => bona.push(s),
            Label::Attack => attack.push(s),
        }
    }
    if bona.is_empty() || attack.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "error rates need both classes, got {} bonafide and {} attack records",
            bona.len(),
            attack.len()
        )));
    }
    Ok((bona, attack))
}

fn rate(scores: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    scores.iter().filter(|&&s| pred(s)).count() as f64 / scores.len() as f64
}

/// (FAR, FRR) at `tau`: attacks accepted, bonafide rejected.
pub fn far_frr(records: &[ScoreRecord], tau: f64) -> Result<(f64, f64)> {
    far_frr_oriented(records, tau, Polarity::default())
}

pub fn far_frr_oriented(records: &[ScoreRecord], tau: f64, polarity: Polarity) -> Result<(f64, f64)> {
    let (bona, attack) = split_classes(records, polarity)?;
    let t = polarity.orient(tau);
    Ok((rate(&attack, |s| s >= t), rate(&bona, |s| s < t)))
}

pub fn hter(records: &[ScoreRecord], tau: f64) -> Result<f64> {
    let (far, frr) = far_frr(records, tau)?;
    Ok(mean2(far, frr))
}

/// Mean of two rates.
pub fn mean2(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}

/// Per-PAI APCER (canonical PAI order, only PAIs present), the worst of them,
/// BPCER and ACER at `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoRates {
    pub apcer_per_pai: Vec<(Pai, f64)>,
    pub apcer: f64,
    pub bpcer: f64,
    pub acer: f64,
}

pub fn apcer_bpcer_acer(records: &[ScoreRecord], tau: f64) -> Result<IsoRates> {
    apcer_bpcer_acer_oriented(records, tau, Polarity::default())
}

pub fn apcer_bpcer_acer_oriented(records: &[ScoreRecord], tau: f64, polarity: Polarity) -> Result<IsoRates> {
    let (bona, _) = split_classes(records, polarity)?;
    let t = polarity.orient(tau);
    let mut apcer_per_pai = Vec::new();
    for pai in Pai::ATTACKS {
        let s: Vec<f64> = records
            .iter()
            .filter(|r| r.label == Label::Attack && r.pai == pai)
            .map(|r| polarity.orient(r.score))
            .collect();
        if !s.is_empty() {
            apcer_per_pai.push((pai, rate(&s, |x| x >= t)));
        }
    }
    if apcer_per_pai.is_empty() {
        return Err(Error::InvalidArgument("attack records carry no PAI".into()));
    }
    let apcer = apcer_per_pai.iter().map(|p| p.1).fold(0.0, f64::max);
    let bpcer = rate(&bona, |s| s < t);
    Ok(IsoRates {
        apcer,
        bpcer,
        acer: mean2(apcer, bpcer),
        apcer_per_pai,
    })
}

/// Candidate thresholds in oriented space: one between each pair of
/// consecutive distinct scores, plus one below the minimum and one above the
/// maximum. Ascending.
fn candidates(sorted: &[f64]) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    let lo = distinct[0];
    let hi = *distinct.last().expect("nonempty");
    let mut out = Vec::with_capacity(distinct.len() + 1);
    out.push(lo - lo.abs().max(1.0));
    for w in distinct.windows(2) {
        let mut mid = (w[0] + w[1]) / 2.0;
        if !mid.is_finite() {
            mid = w[0] / 2.0 + w[1] / 2.0;
        }
        out.push(if mid > w[0] { mid } else { w[1] });
    }
    out.push(hi + hi.abs().max(1.0));
    out
}

/// One ROC point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Sweeps every candidate threshold, sorted by threshold in score space.
pub fn roc_points(records: &[ScoreRecord]) -> Result<Vec<RocPoint>> {
    roc_points_oriented(records, Polarity::default())
}

pub fn roc_points_oriented(records: &[ScoreRecord], polarity: Polarity) -> Result<Vec<RocPoint>> {
    let (mut bona, mut attack) = split_classes(records, polarity)?;
    bona.sort_by(f64::total_cmp);
    attack.sort_by(f64::total_cmp);
    let mut all: Vec<f64> = bona.iter().chain(&attack).copied().collect();
    all.sort_by(f64::total_cmp);
    let (nb, na) = (bona.len() as f64, attack.len() as f64);
    let mut points: Vec<RocPoint> = candidates(&all)
        .into_iter()
        .map(|t| {
            let rejected_bona = bona.partition_point(|&s| s < t);
            let rejected_attack = attack.partition_point(|&s| s < t);
            RocPoint {
                threshold: polarity.orient(t),
                far: (attack.len() - rejected_attack) as f64 / na,
                frr: rejected_bona as f64 / nb,
            }
        })
        .collect();
    if polarity == Polarity::LowerIsBonafide {
        points.reverse();
    }
    Ok(points)
}

/// EER operating point of a development set: the candidate minimizing
/// |FAR − FRR|, ties broken by the smaller mean and then the lower oriented
/// threshold. Returns `(threshold, eer)` with `eer = (FAR + FRR) / 2`.
pub fn eer_threshold(records: &[ScoreRecord]) -> Result<(f64, f64)> {
    eer_threshold_oriented(records, Polarity::default())
}

pub fn eer_threshold_oriented(records: &[ScoreRecord], polarity: Polarity) -> Result<(f64, f64)> {
    let mut points = roc_points_oriented(records, polarity)?;
    if polarity == Polarity::LowerIsBonafide {
        points.reverse();
    }
    let mut best: Option<(f64, f64, RocPoint)> = None;
    for p in points {
        let gap = (p.far - p.frr).abs();
        let m = mean2(p.far, p.frr);
        let better = match best {
            None => true,
            Some((g, bm, _)) => gap < g || (gap == g && m < bm),
        };
        if better {
            best = Some((gap, m, p));
        }
    }
    let (_, eer, p) = best.expect("at least two candidates");
    Ok((p.threshold, eer))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(id: &str, pai: Pai, score: f64) -> ScoreRecord {
        ScoreRecord {
            video_id: id.into(),
            label: pai.label(),
            pai,
            score,
        }
    }

    fn separable() -> Vec<ScoreRecord> {
        vec![
            rec("b1", Pai::None, 0.9),
            rec("b2", Pai::None, 0.8),
            rec("a1", Pai::PrintHalftone, 0.1),
            rec("a2", Pai::ReplayMoire, 0.2),
        ]
    }

    fn frame(id: &str, k: usize, score: f64) -> FrameRecord {
        FrameRecord {
            video_id: id.into(),
            frame_index: k,
            label: Label::Bonafide,
            pai: Pai::None,
            score,
        }
    }

    #[test]
    fn aggregation() {
        let f = vec![frame("v", 0, 0.2), frame("v", 1, 0.4), frame("v", 2, 0.6), frame("w", 0, 0.3)];
        let v = aggregate_video_scores(&f).unwrap();
        assert_eq!(v[0].score, 0.4f32 as f64);
        assert_eq!(v[1].score, 0.3f32 as f64);
        let mut rev = f.clone();
        rev.reverse();
        let r = aggregate_video_scores(&rev).unwrap();
        assert_eq!(r[1].score, v[0].score);
        let mut bad = f;
        bad[1].label = Label::Attack;
        bad[1].pai = Pai::ReplayMoire;
        assert!(aggregate_video_scores(&bad).is_err());
    }

    #[test]
    fn far_frr_cases() {
        let r = separable();
        assert_eq!(far_frr(&r, 0.5).unwrap(), (0.0, 0.0));
        assert_eq!(far_frr(&r, 0.1).unwrap(), (1.0, 0.0));
        assert_eq!(far_frr(&r, 0.9 + 1e-9).unwrap(), (0.0, 1.0));
        assert!(far_frr(&r[..2], 0.5).is_err());
    }

    #[test]
    fn iso_rates() {
        let r = apcer_bpcer_acer(&separable(), 0.5).unwrap();
        assert_eq!((r.apcer, r.bpcer, r.acer), (0.0, 0.0, 0.0));
        let mut recs = vec![rec("b", Pai::None, 1.0)];
        for i in 0..50 {
            recs.push(rec(&format!("p{i}"), Pai::PrintHalftone, if i == 0 { 1.0 } else { 0.0 }));
        }
        for i in 0..20 {
            recs.push(rec(&format!("r{i}"), Pai::ReplayMoire, if i == 0 { 1.0 } else { 0.0 }));
        }
        let r = apcer_bpcer_acer(&recs, 0.5).unwrap();
        assert_eq!(r.apcer_per_pai, vec![(Pai::PrintHalftone, 0.02), (Pai::ReplayMoire, 0.05)]);
        assert_eq!(r.apcer, 0.05);
        assert!(apcer_bpcer_acer(&recs[..1], 0.5).is_err());
    }

    #[test]
    fn acer_arithmetic() {
        assert_eq!(mean2(1.3, 12.5), 6.9);
        assert_eq!(format!("{:.1}", 100.0 * mean2(0.013, 0.125)), "6.9");
        assert!((mean2(0.2, 0.1) - 0.15).abs() < 1e-16);
        assert_eq!(mean2(1.0, 1.0), 1.0);
    }

    #[test]
    fn eer_cases() {
        let (t, eer) = eer_threshold(&separable()).unwrap();
        assert_eq!(eer, 0.0);
        assert!(t > 0.2 && t < 0.8);
        let same: Vec<_> = (0..6)
            .map(|i| rec(&i.to_string(), if i < 3 { Pai::None } else { Pai::ReplayBanding }, 0.3))
            .collect();
        assert_eq!(eer_threshold(&same).unwrap().1, 0.5);
    }

    #[test]
    fn roc_endpoints_and_monotonicity() {
        let pts = roc_points(&separable()).unwrap();
        assert_eq!((pts[0].far, pts[0].frr), (1.0, 0.0));
        let last = pts.last().unwrap();
        assert_eq!((last.far, last.frr), (0.0, 1.0));
        assert!(pts.iter().any(|p| p.far == 0.0 && p.frr == 0.0));
        for w in pts.windows(2) {
            assert!(w[0].threshold < w[1].threshold);
            assert!(w[0].far >= w[1].far && w[0].frr <= w[1].frr);
        }
    }

    #[test]
    fn adjacent_floats_get_a_separating_threshold() {
        let a = 0.5f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let r = vec![rec("b", Pai::None, b), rec("a", Pai::PrintColorcast, a)];
        let (t, eer) = eer_threshold(&r).unwrap();
        assert_eq!(eer, 0.0);
        assert_eq!(t, b);
    }
}
