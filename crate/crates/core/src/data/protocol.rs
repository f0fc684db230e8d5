use std::fmt;

use super::manifest::{Manifest, Pai, Sample, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Grandtest,
    UnseenAttack,
    Cross,
}

/// Which PAIs each split keeps. Bonafide samples are always kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub name: String,
    pub purpose: Purpose,
    /// Allowed attack PAIs for train, dev and eval.
    pub allowed: [Vec<Pai>; 3],
}

impl ProtocolSpec {
    pub const BUILTIN: [&'static str; 2] = ["grandtest", "unseen-replay"];

    pub fn grandtest() -> Self {
        Self {
            name: "grandtest".into(),
            purpose: Purpose::Grandtest,
            allowed: [Pai::ATTACKS.to_vec(), Pai::ATTACKS.to_vec(), Pai::ATTACKS.to_vec()],
        }
    }

    /// replay_banding is held out of train and dev and only seen at eval.
    pub fn unseen_replay() -> Self {
        let seen: Vec<Pai> = Pai::ATTACKS
            .into_iter()
            .filter(|&p| p != Pai::ReplayBanding)
            .collect();
        Self {
            name: "unseen-replay".into(),
            purpose: Purpose::UnseenAttack,
            allowed: [seen.clone(), seen, Pai::ATTACKS.to_vec()],
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "grandtest" => Ok(Self::grandtest()),
            "unseen-replay" => Ok(Self::unseen_replay()),
            other => Err(Error::Protocol(format!(
                "unknown protocol '{other}' (expected one of {})",
                Self::BUILTIN.join(", ")
            ))),
        }
    }

    fn allowed(&self, split: Split) -> &[Pai] {
        &self.allowed[split as usize]
    }

    pub fn validate(&self) -> Result<()> {
        if self.purpose == Purpose::UnseenAttack {
            let unseen = self
                .allowed(Split::Eval)
                .iter()
                .any(|p| !self.allowed(Split::Train).contains(p));
            if !unseen {
                return Err(Error::Protocol(format!(
                    "protocol '{}' has no PAI that is absent from train",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn keeps(&self, s: &Sample) -> bool {
        s.pai == Pai::None || self.allowed(s.split).contains(&s.pai)
    }
}

/// Per-split sample lists produced by a protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSplits {
    pub name: String,
    pub train: Vec<Sample>,
    pub dev: Vec<Sample>,
    pub eval: Vec<Sample>,
}

impl ProtocolSplits {
    pub fn get(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Eval => &self.eval,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.eval.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_nonempty(&self) -> Result<()> {
        for split in Split::ALL {
            if self.get(split).is_empty() {
                return Err(Error::Protocol(format!(
                    "protocol '{}' leaves the {split} split empty",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

pub fn apply_protocol(manifest: &Manifest, spec: &ProtocolSpec) -> Result<ProtocolSplits> {
    spec.validate()?;
    let pick = |split: Split| -> Vec<Sample> {
        manifest
            .samples
            .iter()
            .filter(|s| s.split == split && spec.keeps(s))
            .cloned()
            .collect()
    };
    let out = ProtocolSplits {
        name: spec.name.clone(),
        train: pick(Split::Train),
        dev: pick(Split::Dev),
        eval: pick(Split::Eval),
    };
    out.check_nonempty()?;
    Ok(out)
}

/// Which development split fixes the decision threshold in a cross test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdSource {
    #[default]
    Source,
    Target,
}

impl fmt::Display for ThresholdSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdSource::Source => "source",
            ThresholdSource::Target => "target",
        })
    }
}

impl std::str::FromStr for ThresholdSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Self::Source),
            "target" => Ok(Self::Target),
            _ => Err(Error::InvalidArgument(format!(
                "threshold source must be 'source' or 'target', got '{s}'"
            ))),
        }
    }
}

/// Train on `source`, evaluate on the eval split of `target`. The dev split
/// (used for the threshold) comes from the dataset picked by `threshold`.
pub fn cross_protocol(source: &Manifest, target: &Manifest, threshold: ThresholdSource) -> Result<ProtocolSplits> {
    let a = apply_protocol(source, &ProtocolSpec::grandtest())?;
    let b = apply_protocol(target, &ProtocolSpec::grandtest())?;
    Ok(ProtocolSplits {
        name: format!("cross:{}->{}", source.name, target.name),
        train: a.train,
        dev: match threshold {
            ThresholdSource::Source => a.dev,
            ThresholdSource::Target => b.dev,
        },
        eval: b.eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::manifest::Label;
    use std::path::PathBuf;

    fn toy(name: &str) -> Manifest {
        let mut samples = Vec::new();
        for (si, split) in Split::ALL.into_iter().enumerate() {
            for (pi, pai) in [Pai::None].into_iter().chain(Pai::ATTACKS).enumerate() {
                samples.push(Sample {
                    path: PathBuf::from(format!("{name}/{si}_{pi}.ppm")),
                    label: pai.label(),
                    pai,
                    video_id: format!("s{si}_{pai}"),
                    frame_index: 0,
                    split,
                });
            }
        }
        Manifest {
            name: name.into(),
            config_hash: String::new(),
            root: PathBuf::from(name),
            samples,
        }
    }

    #[test]
    fn grandtest_keeps_everything() {
        let m = toy("a");
        let p = apply_protocol(&m, &ProtocolSpec::grandtest()).unwrap();
        assert_eq!(p.len(), m.samples.len());
    }

    #[test]
    fn unseen_replay_hides_banding_until_eval() {
        let p = apply_protocol(&toy("a"), &ProtocolSpec::unseen_replay()).unwrap();
        assert!(p.train.iter().chain(&p.dev).all(|s| s.pai != Pai::ReplayBanding));
        assert!(p.eval.iter().any(|s| s.pai == Pai::ReplayBanding));
        assert!(p.train.iter().any(|s| s.label == Label::Bonafide));
    }

    #[test]
    fn cross_eval_comes_from_target() {
        let (a, b) = (toy("a"), toy("b"));
        let p = cross_protocol(&a, &b, ThresholdSource::Source).unwrap();
        assert!(p.eval.iter().all(|s| s.path.starts_with("b")));
        assert!(p.dev.iter().all(|s| s.path.starts_with("a")));
        let p = cross_protocol(&a, &b, ThresholdSource::Target).unwrap();
        assert!(p.dev.iter().all(|s| s.path.starts_with("b")));
    }

    #[test]
    fn empty_split_is_rejected() {
        let mut m = toy("a");
        m.samples.retain(|s| s.split != Split::Dev);
        assert!(apply_protocol(&m, &ProtocolSpec::grandtest()).is_err());
        let bad = ProtocolSpec {
            purpose: Purpose::UnseenAttack,
            ..ProtocolSpec::grandtest()
        };
        assert!(bad.validate().is_err());
        assert!(ProtocolSpec::builtin("nope").is_err());
    }
}
