//! Optimization: Adam, class balancing, augmentation, the epoch loop and
//! checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod sampling;

use std::fs;
use std::path::{Path, PathBuf};

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use sampling::{augment, balance_classes, hflip, stream_rng, AugmentConfig, Concern};

use crate::autodiff::{Scalar, Tensor};
use crate::data::manifest::{Label, Sample};
use crate::data::{read_ppm, resize_square, Image};
use crate::error::{Error, Result};
use crate::model::{Mode, Model};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub flip_prob: f64,
    pub jitter: f64,
    pub seed: u64,
    /// Frames kept per training video.
    pub frames_per_video: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-5,
            batch_size: 32,
            epochs: 20,
            lambda: 0.5,
            flip_prob: 0.5,
            jitter: 0.1,
            seed: 7,
            frames_per_video: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.frames_per_video == 0 {
            return Err(Error::Config("batch_size and frames_per_video must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("flip_prob and lambda must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config("jitter must lie in [0, 1)".into()));
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn augment(&self) -> AugmentConfig {
        AugmentConfig {
            flip_prob: self.flip_prob,
            jitter: self.jitter,
        }
    }
}

/// Sample-weighted epoch means of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub combined: f64,
    pub pixel: f64,
    pub binary: f64,
}

pub const LOSS_LOG_FILE: &str = "loss_log.csv";

pub fn write_loss_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut text = String::from("epoch,combined,pixel,binary\n");
    for e in log {
        text.push_str(&format!("{},{:.8e},{:.8e},{:.8e}\n", e.epoch, e.combined, e.pixel, e.binary));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch_{epoch:03}.ckpt"))
}

/// Decoded, resized frames held in memory for training or scoring.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub images: Vec<Image>,
    pub labels: Vec<Label>,
    /// `video_id:frame_index` of each frame, for error messages.
    pub keys: Vec<String>,
}

impl FrameSet {
    pub fn load(samples: &[Sample], size: (usize, usize)) -> Result<Self> {
        let mut images = Vec::with_capacity(samples.len());
        for s in samples {
            let img = read_ppm(&s.path)?;
            images.push(resize_square(&img, size.0, size.1)?);
        }
        Ok(Self {
            images,
            labels: samples.iter().map(|s| s.label).collect(),
            keys: samples
                .iter()
                .map(|s| format!("{}:{}", s.video_id, s.frame_index))
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Stacks equally sized images into a `[N, 3, H, W]` batch.
pub fn batch_tensor<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let (w, h) = (first.width(), first.height());
    let mut data = Vec::with_capacity(images.len() * 3 * w * h);
    for img in images {
        if img.width() != w || img.height() != h {
            return Err(Error::Shape("batch images differ in size".into()));
        }
        data.extend(img.data().iter().map(|&v| T::of(v as f64)));
    }
    Tensor::new(&[images.len(), 3, h, w], data)
}

/// Everything that evolves during training.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub model: Model<T>,
    pub adam: AdamState<T>,
    pub epochs_done: usize,
    pub seed: u64,
    pub log: Vec<EpochLog>,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(model: Model<T>, cfg: &TrainConfig) -> Self {
        let adam = AdamState::new(cfg.adam(), model.params());
        Self {
            model,
            adam,
            epochs_done: 0,
            seed: cfg.seed,
            log: Vec::new(),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            adam: Some(self.adam.clone()),
            epoch: self.epochs_done as u64,
            seed: self.seed,
            log: self.log.clone(),
            ..Checkpoint::from_model(&self.model)
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint<T>) -> Result<Self> {
        let model = ck.to_model()?;
        let adam = ck
            .adam
            .clone()
            .ok_or_else(|| Error::InvalidArgument("checkpoint carries no optimizer state".into()))?;
        if adam.m.len() != model.params().len()
            || adam.m.iter().zip(model.params()).any(|(m, p)| m.shape() != p.tensor.shape())
        {
            return Err(Error::Shape("optimizer state does not match the model".into()));
        }
        Ok(Self {
            model,
            adam,
            epochs_done: ck.epoch as usize,
            seed: ck.seed,
            log: ck.log.clone(),
        })
    }

    /// Runs one epoch: rebalance, shuffle, augment, and one Adam step per
    /// mini-batch.
    pub fn train_epoch(&mut self, frames: &FrameSet, cfg: &TrainConfig) -> Result<EpochLog> {
        let epoch = self.epochs_done;
        let mut idx = balance_classes(&frames.labels, &mut stream_rng(self.seed, Concern::Balance, epoch))?;
        sampling::shuffle(&mut idx, &mut stream_rng(self.seed, Concern::Shuffle, epoch));
        let mut aug_rng = stream_rng(self.seed, Concern::Augment, epoch);
        let aug = cfg.augment();
        self.model.set_mode(Mode::Train);

        let mut sums = [0.0f64; 3];
        for (b, chunk) in idx.chunks(cfg.batch_size).enumerate() {
            let images: Vec<Image> = chunk
                .iter()
                .map(|&i| augment(&frames.images[i], aug, &mut aug_rng))
                .collect();
            let refs: Vec<&Image> = images.iter().collect();
            let x = batch_tensor::<T>(&refs)?;
            let labels: Vec<T> = chunk.iter().map(|&i| T::of(frames.labels[i].target())).collect();
            let mut pass = self.model.forward(&x)?;
            let terms = pass.losses(&labels, cfg.lambda)?;
            let values = [terms.combined, terms.pixel, terms.binary].map(|v| pass.scalar(v).as_f64());
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b,
                    samples: chunk
                        .iter()
                        .map(|&i| frames.keys[i].as_str())
                        .collect::<Vec<_>>()
                        .join(" "),
                });
            }
            pass.backward(terms.combined)?;
            let grads = pass.take_param_grads();
            self.adam.step(self.model.params_mut(), &grads)?;
            for (s, v) in sums.iter_mut().zip(values) {
                *s += v * chunk.len() as f64;
            }
        }
        let n = idx.len() as f64;
        self.epochs_done += 1;
        let entry = EpochLog {
            epoch: self.epochs_done,
            combined: sums[0] / n,
            pixel: sums[1] / n,
            binary: sums[2] / n,
        };
        self.log.push(entry);
        Ok(entry)
    }
}

/// Trains until `cfg.epochs` epochs are complete. With `checkpoint_dir`,
/// writes `epoch_NNN.ckpt` and the loss log after every epoch.
pub fn train<T: Scalar>(
    mut state: TrainState<T>,
    frames: &FrameSet,
    cfg: &TrainConfig,
    checkpoint_dir: Option<&Path>,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainState<T>> {
    cfg.validate()?;
    if let Some(dir) = checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    while state.epochs_done < cfg.epochs {
        let entry = state.train_epoch(frames, cfg)?;
        if let Some(dir) = checkpoint_dir {
            save_checkpoint(&state.checkpoint(), &checkpoint_path(dir, state.epochs_done))?;
            write_loss_log(&dir.join(LOSS_LOG_FILE), &state.log)?;
        }
        progress(&entry);
    }
    state.model.set_mode(Mode::Eval);
    Ok(state)
}
