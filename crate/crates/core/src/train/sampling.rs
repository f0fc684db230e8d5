use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::manifest::Label;
use crate::data::synth::luminance;
use crate::data::Image;
use crate::error::{Error, Result};

/// Independent random streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Concern {
    Balance = 1,
    Shuffle = 2,
    Augment = 3,
}

/// Generator for one concern in one epoch. Streams never overlap, so the
/// draws of one concern do not depend on how many another consumed.
pub fn stream_rng(seed: u64, concern: Concern, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((concern as u64) << 32) | epoch as u64);
    rng
}

/// Under-samples the majority class without replacement. Returns ascending
/// indices with equal bonafide and attack counts.
pub fn balance_classes(labels: &[Label], rng: &mut impl Rng) -> Result<Vec<usize>> {
    let (bona, attack): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| labels[i] == Label::Bonafide);
    if bona.is_empty() || attack.is_empty() {
        return Err(Error::Protocol(format!(
            "class balancing needs both classes, got {} bonafide and {} attack samples",
            bona.len(),
            attack.len()
        )));
    }
    let (minority, majority) = if bona.len() <= attack.len() {
        (bona, attack)
    } else {
        (attack, bona)
    };
    let keep = index::sample(rng, majority.len(), minority.len());
    let mut out: Vec<usize> = minority;
    out.extend(keep.iter().map(|k| majority[k]));
    out.sort_unstable();
    Ok(out)
}

pub fn shuffle(indices: &mut [usize], rng: &mut impl Rng) {
    indices.shuffle(rng);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    /// Photometric factors are drawn from `[1 - jitter, 1 + jitter]`.
    pub jitter: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            jitter: 0.1,
        }
    }
}

pub fn hflip(image: &Image) -> Image {
    let w = image.width();
    Image::from_fn(w, image.height(), |x, y| image.rgb(w - 1 - x, y))
}

/// Random horizontal flip followed by brightness, contrast and saturation
/// jitter, clamped to [0, 1]. Always consumes four draws.
pub fn augment(image: &Image, cfg: AugmentConfig, rng: &mut impl Rng) -> Image {
    let flip = rng.random::<f64>() < cfg.flip_prob;
    let mut factor = || (1.0 + cfg.jitter * (2.0 * rng.random::<f64>() - 1.0)) as f32;
    let (brightness, contrast, saturation) = (factor(), factor(), factor());

    let mut out = if flip { hflip(image) } else { image.clone() };
    out.data_mut().iter_mut().for_each(|v| *v *= brightness);

    let n = out.data().len() as f64;
    let mean = (out.data().iter().map(|&v| v as f64).sum::<f64>() / n) as f32;
    let k = contrast - 1.0;
    out.data_mut().iter_mut().for_each(|v| *v += k * (*v - mean));

    let k = saturation - 1.0;
    for y in 0..out.height() {
        for x in 0..out.width() {
            let rgb = out.rgb(x, y);
            let g = luminance(rgb);
            out.set_rgb(x, y, rgb.map(|c| c + k * (c - g)));
        }
    }
    out.clamp();
    out
}
