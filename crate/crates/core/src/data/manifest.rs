use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const DATASET_INFO_FILE: &str = "dataset.txt";
pub const MANIFEST_HEADER: [&str; 6] = ["path", "split", "label", "pai", "video_id", "frame_index"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Bonafide,
    Attack,
}

impl Label {
    /// Supervision target: 1 for bonafide, 0 for attack.
    pub fn target(self) -> f64 {
        match self {
            Label::Bonafide => 1.0,
            Label::Attack => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Attack => "attack",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "attack" => Ok(Label::Attack),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Presentation attack instrument category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pai {
    None,
    PrintHalftone,
    ReplayMoire,
    ReplayBanding,
    PrintColorcast,
}

impl Pai {
    /// The attack categories, in canonical order.
    pub const ATTACKS: [Pai; 4] = [
        Pai::PrintHalftone,
        Pai::ReplayMoire,
        Pai::ReplayBanding,
        Pai::PrintColorcast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pai::None => "none",
            Pai::PrintHalftone => "print_halftone",
            Pai::ReplayMoire => "replay_moire",
            Pai::ReplayBanding => "replay_banding",
            Pai::PrintColorcast => "print_colorcast",
        }
    }

    pub fn label(self) -> Label {
        match self {
            Pai::None => Label::Bonafide,
            _ => Label::Attack,
        }
    }
}

impl fmt::Display for Pai {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pai {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Pai::None]
            .into_iter()
            .chain(Pai::ATTACKS)
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown PAI {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Eval];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown split {s:?}"))
    }
}

/// One image frame of a video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// Location of the image; resolved against the manifest directory on load.
    pub path: PathBuf,
    pub label: Label,
    pub pai: Pai,
    pub video_id: String,
    pub frame_index: usize,
    pub split: Split,
}

/// Dataset catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    /// Directory image paths are written relative to.
    pub root: PathBuf,
    pub samples: Vec<Sample>,
}

impl Manifest {
    /// Checks label/PAI consistency, frame uniqueness and that no video spans
    /// splits.
    pub fn validate(&self) -> Result<()> {
        let mut frames = HashSet::new();
        let mut video_split: HashMap<&str, Split> = HashMap::new();
        for s in &self.samples {
            if s.pai.label() != s.label {
                return Err(Error::Protocol(format!(
                    "{}: label {} inconsistent with PAI {}",
                    s.video_id, s.label, s.pai
                )));
            }
            if !frames.insert((s.video_id.as_str(), s.frame_index)) {
                return Err(Error::Protocol(format!(
                    "duplicate frame {} of video {}",
                    s.frame_index, s.video_id
                )));
            }
            if let Some(prev) = video_split.insert(&s.video_id, s.split) {
                if prev != s.split {
                    return Err(Error::Protocol(format!(
                        "video {} appears in both {prev} and {}",
                        s.video_id, s.split
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.split == split).collect()
    }

    /// Writes `manifest.csv` and `dataset.txt` into `self.root`.
    pub fn save(&self) -> Result<()> {
        let path = self.root.join(MANIFEST_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
        w.write_record(MANIFEST_HEADER).map_err(|e| csv_io(&path, e))?;
        for s in &self.samples {
            let rel = s.path.strip_prefix(&self.root).unwrap_or(&s.path);
            let rel = rel.to_string_lossy().replace('\\', "/");
            let frame = s.frame_index.to_string();
            w.write_record([
                rel.as_str(),
                s.split.as_str(),
                s.label.as_str(),
                s.pai.as_str(),
                s.video_id.as_str(),
                frame.as_str(),
            ])
            .map_err(|e| csv_io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let info = self.root.join(DATASET_INFO_FILE);
        let text = format!("name={}\nconfig_hash={}\n", self.name, self.config_hash);
        fs::write(&info, text).map_err(|e| Error::io(&info, e))
    }

    /// Loads `<dir>/manifest.csv`, resolving image paths against `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let ctx = path.display().to_string();
        let mut r = csv::Reader::from_path(&path).map_err(|e| csv_io(&path, e))?;
        let header = r.headers().map_err(|e| Error::parse(&ctx, 1, e.to_string()))?;
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(Error::parse(
                &ctx,
                1,
                format!("expected header {}", MANIFEST_HEADER.join(",")),
            ));
        }
        let mut samples = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse(&ctx, line, e.to_string()))?;
            let field = |k: usize| rec.get(k).unwrap_or_default();
            let err = |m: String| Error::parse(&ctx, line, m);
            let label: Label = field(2).parse().map_err(err)?;
            let pai: Pai = field(3).parse().map_err(err)?;
            if pai.label() != label {
                return Err(err(format!("label {label} inconsistent with PAI {pai}")));
            }
            samples.push(Sample {
                path: dir.join(field(0)),
                split: field(1).parse().map_err(err)?,
                label,
                pai,
                video_id: field(4).to_string(),
                frame_index: field(5)
                    .parse()
                    .map_err(|_| err(format!("bad frame index {:?}", field(5))))?,
            });
        }
        let mut name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut config_hash = String::new();
        if let Ok(info) = fs::read_to_string(dir.join(DATASET_INFO_FILE)) {
            for line in info.lines() {
                match line.split_once('=') {
                    Some(("name", v)) => name = v.to_string(),
                    Some(("config_hash", v)) => config_hash = v.to_string(),
                    _ => {}
                }
            }
        }
        let manifest = Self {
            name,
            config_hash,
            root: dir.to_path_buf(),
            samples,
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), 0, format!("{other:?}")),
    }
}
