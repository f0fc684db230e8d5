use std::fmt::Write as _;

use super::{apcer_bpcer_acer, eer_threshold, far_frr, mean2, ScoreRecord};
use crate::data::manifest::{Label, Pai};
use crate::error::Result;

/// Eval-set error rates at the EER threshold of a development set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub threshold: f64,
    /// EER of the development set the threshold came from.
    pub dev_eer: f64,
    pub apcer_per_pai: Vec<(Pai, f64)>,
    pub apcer: f64,
    pub bpcer: f64,
    pub acer: f64,
    pub far: f64,
    pub frr: f64,
    pub hter: f64,
    /// EER of the eval set on its own (threshold not transferred).
    pub eval_eer: f64,
    pub bonafide: usize,
    pub attacks: usize,
}

/// Fixes the threshold on `dev` and measures every rate on `eval`.
pub fn evaluate(dev: &[ScoreRecord], eval: &[ScoreRecord]) -> Result<MetricsReport> {
    let (threshold, dev_eer) = eer_threshold(dev)?;
    let iso = apcer_bpcer_acer(eval, threshold)?;
    let (far, frr) = far_frr(eval, threshold)?;
    let (_, eval_eer) = eer_threshold(eval)?;
    Ok(MetricsReport {
        threshold,
        dev_eer,
        apcer_per_pai: iso.apcer_per_pai,
        apcer: iso.apcer,
        bpcer: iso.bpcer,
        acer: iso.acer,
        far,
        frr,
        hter: mean2(far, frr),
        eval_eer,
        bonafide: eval.iter().filter(|r| r.label == Label::Bonafide).count(),
        attacks: eval.iter().filter(|r| r.label == Label::Attack).count(),
    })
}

impl MetricsReport {
    fn rates(&self) -> Vec<(String, f64)> {
        let mut out = vec![("dev_eer".to_string(), self.dev_eer)];
        for (pai, r) in &self.apcer_per_pai {
            out.push((format!("apcer_{pai}"), *r));
        }
        for (k, v) in [
            ("apcer", self.apcer),
            ("bpcer", self.bpcer),
            ("acer", self.acer),
            ("far", self.far),
            ("frr", self.frr),
            ("hter", self.hter),
            ("eval_eer", self.eval_eer),
        ] {
            out.push((k.to_string(), v));
        }
        out
    }

    /// `key: value` lines; rates as fractions followed by percentages.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "threshold: {:?}", self.threshold).unwrap();
        writeln!(s, "bonafide: {}", self.bonafide).unwrap();
        writeln!(s, "attacks: {}", self.attacks).unwrap();
        for (k, v) in self.rates() {
            writeln!(s, "{k}: {v:?} ({:.2}%)", 100.0 * v).unwrap();
        }
        s
    }

    /// Long-format `metric,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        writeln!(s, "threshold,{:?}", self.threshold).unwrap();
        writeln!(s, "bonafide,{}", self.bonafide).unwrap();
        writeln!(s, "attacks,{}", self.attacks).unwrap();
        for (k, v) in self.rates() {
            writeln!(s, "{k},{v:?}").unwrap();
        }
        s
    }

    /// Parses the value of `key` back out of [`Self::to_csv`] output.
    pub fn csv_value(csv: &str, key: &str) -> Option<f64> {
        csv.lines()
            .filter_map(|l| l.split_once(','))
            .find(|(k, _)| *k == key)
            .and_then(|(_, v)| v.parse().ok())
    }
}
