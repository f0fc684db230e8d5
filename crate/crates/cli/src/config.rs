use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pixbis_core::baselines::LinearConfig;
use pixbis_core::data::{GeneratorConfig, ProtocolSpec, ThresholdSource};
use pixbis_core::model::ModelConfig;
use pixbis_core::train::TrainConfig;

/// Every recognized configuration key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for generation, initialization and training"),
    ("name", "dataset name written by generate"),
    ("image_size", "side of generated frames in pixels"),
    ("subjects", "number of synthetic subjects"),
    ("bonafide_videos", "bonafide videos per subject"),
    ("attack_videos", "attack videos per subject"),
    ("frames", "frames per generated video"),
    ("strength", "sets all four artifact strengths"),
    ("strength_halftone", "print_halftone artifact strength"),
    ("strength_moire", "replay_moire artifact strength"),
    ("strength_banding", "replay_banding artifact strength"),
    ("strength_colorcast", "print_colorcast artifact strength"),
    ("input_size", "network input side (multiple of 16)"),
    ("stem_channels", "channels after the stem convolution"),
    ("growth_rate", "channels added per dense layer"),
    ("block1_layers", "dense layers in block 1"),
    ("block2_layers", "dense layers in block 2"),
    ("compression", "transition channel compression in (0, 1]"),
    ("bottleneck_factor", "bottleneck width as a multiple of the growth rate"),
    ("norm_eps", "batch normalization epsilon"),
    ("norm_momentum", "batch normalization running-stat momentum"),
    ("lr", "Adam learning rate"),
    ("weight_decay", "L2 coefficient added to gradients"),
    ("batch_size", "mini-batch size"),
    ("epochs", "training epochs"),
    ("lambda", "weight of the pixel-wise loss"),
    ("flip_prob", "horizontal flip probability"),
    ("jitter", "photometric jitter range"),
    ("frames_per_video", "frames kept per training video"),
    ("score_frames", "frames scored per video"),
    ("protocol", "grandtest or unseen-replay"),
    ("threshold_from", "cross-test dev split: source or target"),
    ("baseline_l2", "logistic regression L2 coefficient"),
    ("baseline_epochs", "logistic regression gradient steps"),
    ("baseline_lr", "logistic regression step size"),
];

/// Flat run configuration; defaults reproduce the desk-scale experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub protocol: String,
    pub score_frames: usize,
    pub threshold_from: ThresholdSource,
    pub linear: LinearConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            generator: GeneratorConfig {
                seed: train.seed,
                ..GeneratorConfig::default()
            },
            model: ModelConfig::desk(),
            train,
            protocol: "grandtest".into(),
            score_frames: 20,
            threshold_from: ThresholdSource::Source,
            linear: LinearConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow::anyhow!("invalid value {value:?} for {key}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let g = &mut self.generator;
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "seed" => {
                t.seed = parse(key, value)?;
                g.seed = t.seed;
            }
            "name" => g.name = value.to_string(),
            "image_size" => g.image_size = parse(key, value)?,
            "subjects" => g.subjects = parse(key, value)?,
            "bonafide_videos" => g.bonafide_videos = parse(key, value)?,
            "attack_videos" => g.attack_videos = parse(key, value)?,
            "frames" => g.frames = parse(key, value)?,
            "strength" => {
                let s = parse(key, value)?;
                g.strengths = pixbis_core::data::ArtifactStrengths::uniform(s);
            }
            "strength_halftone" => g.strengths.halftone = parse(key, value)?,
            "strength_moire" => g.strengths.moire = parse(key, value)?,
            "strength_banding" => g.strengths.banding = parse(key, value)?,
            "strength_colorcast" => g.strengths.colorcast = parse(key, value)?,
            "input_size" => {
                let s = parse(key, value)?;
                m.input_size = (s, s);
            }
            "stem_channels" => m.stem_channels = parse(key, value)?,
            "growth_rate" => m.growth_rate = parse(key, value)?,
            "block1_layers" => m.block_layers.0 = parse(key, value)?,
            "block2_layers" => m.block_layers.1 = parse(key, value)?,
            "compression" => m.compression = parse(key, value)?,
            "bottleneck_factor" => m.bottleneck_factor = parse(key, value)?,
            "norm_eps" => m.norm_eps = parse(key, value)?,
            "norm_momentum" => m.norm_momentum = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "weight_decay" => t.weight_decay = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "lambda" => {
                t.lambda = parse(key, value)?;
                m.lambda = t.lambda;
            }
            "flip_prob" => t.flip_prob = parse(key, value)?,
            "jitter" => t.jitter = parse(key, value)?,
            "frames_per_video" => t.frames_per_video = parse(key, value)?,
            "score_frames" => self.score_frames = parse(key, value)?,
            "protocol" => {
                ProtocolSpec::builtin(value)?;
                self.protocol = value.to_string();
            }
            "threshold_from" => self.threshold_from = value.parse()?,
            "baseline_l2" => self.linear.l2 = parse(key, value)?,
            "baseline_epochs" => self.linear.epochs = parse(key, value)?,
            "baseline_lr" => self.linear.lr = parse(key, value)?,
            other => bail!("unknown configuration key {other:?}"),
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{origin}:{}: expected key=value", i + 1))?;
            self.set(k.trim(), v.trim())
                .with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.score_frames == 0 {
            bail!("score_frames must be at least 1");
        }
        Ok(())
    }

    pub fn protocol_spec(&self) -> ProtocolSpec {
        ProtocolSpec::builtin(&self.protocol).expect("validated in set")
    }
}
