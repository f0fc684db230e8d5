//! Procedural stand-in for a face anti-spoofing corpus.
//!
//! Bonafide frames are smooth cartoon faces with per-subject geometry and
//! per-frame pose/illumination jitter. Attack frames are the same faces with a
//! simulated recapture artifact: halftone print dots, screen moiré, display
//! banding with glare, or a color-cast blurry print.

use std::f32::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::image::{encode_ppm, Image};
use super::manifest::{Label, Manifest, Pai, Sample, Split};
use crate::error::{Error, Result};

/// Amplitude multipliers for each attack artifact; 0 disables the artifact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArtifactStrengths {
    pub halftone: f64,
    pub moire: f64,
    pub banding: f64,
    pub colorcast: f64,
}

impl ArtifactStrengths {
    pub fn uniform(s: f64) -> Self {
        Self {
            halftone: s,
            moire: s,
            banding: s,
            colorcast: s,
        }
    }

    pub fn get(&self, pai: Pai) -> f64 {
        match pai {
            Pai::None => 0.0,
            Pai::PrintHalftone => self.halftone,
            Pai::ReplayMoire => self.moire,
            Pai::ReplayBanding => self.banding,
            Pai::PrintColorcast => self.colorcast,
        }
    }
}

/// Upper bound accepted for any artifact strength.
pub const MAX_STRENGTH: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub name: String,
    pub image_size: usize,
    pub subjects: usize,
    pub bonafide_videos: usize,
    pub attack_videos: usize,
    pub frames: usize,
    pub strengths: ArtifactStrengths,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            image_size: 64,
            subjects: 12,
            bonafide_videos: 1,
            attack_videos: 2,
            frames: 20,
            strengths: ArtifactStrengths::uniform(1.0),
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 16 {
            return Err(Error::Config("image_size must be at least 16".into()));
        }
        if self.subjects < 3 {
            return Err(Error::Config(
                "at least 3 subjects are needed for disjoint train/dev/eval splits".into(),
            ));
        }
        if self.bonafide_videos == 0 || self.attack_videos == 0 || self.frames == 0 {
            return Err(Error::Config("video and frame counts must be at least 1".into()));
        }
        for pai in Pai::ATTACKS {
            let s = self.strengths.get(pai);
            if !(0.0..=MAX_STRENGTH).contains(&s) {
                return Err(Error::Config(format!(
                    "strength of {pai} must lie in [0, {MAX_STRENGTH}], got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("name", self.name.clone()),
            ("image_size", self.image_size.to_string()),
            ("subjects", self.subjects.to_string()),
            ("bonafide_videos", self.bonafide_videos.to_string()),
            ("attack_videos", self.attack_videos.to_string()),
            ("frames", self.frames.to_string()),
            ("strength_halftone", format!("{:?}", self.strengths.halftone)),
            ("strength_moire", format!("{:?}", self.strengths.moire)),
            ("strength_banding", format!("{:?}", self.strengths.banding)),
            ("strength_colorcast", format!("{:?}", self.strengths.colorcast)),
            ("seed", self.seed.to_string()),
        ]
    }

    /// SHA-256 of the canonical `key=value` listing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.to_pairs() {
            h.update(format!("{k}={v}\n"));
        }
        hex::encode(h.finalize())
    }
}

const STREAM_SUBJECT: u64 = 1;
const STREAM_FRAME: u64 = 2;
const STREAM_ARTIFACT: u64 = 3;
const STREAM_SPLIT: u64 = 4;

fn derived_rng(seed: u64, stream: u64, a: u64, b: u64, c: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    for v in [seed, stream, a, b, c] {
        h.update(v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

struct Face {
    cx: f32,
    cy: f32,
    rx: f32,
    ry: f32,
    skin: [f32; 3],
    background: [f32; 3],
    background_tilt: f32,
    eye_dx: f32,
    eye_dy: f32,
    eye_r: f32,
    mouth_dy: f32,
    mouth_w: f32,
    hair: [f32; 3],
}

impl Face {
    fn for_subject(seed: u64, subject: u64) -> Self {
        let mut r = derived_rng(seed, STREAM_SUBJECT, subject, 0, 0);
        let tone: f32 = r.random_range(-0.12..0.08);
        let mut skin = [0.80 + tone, 0.60 + tone, 0.48 + tone];
        for c in &mut skin {
            *c += r.random_range(-0.04..0.04);
        }
        let gray: f32 = r.random_range(0.25..0.6);
        let background = [
            gray + r.random_range(-0.02..0.02),
            gray + r.random_range(-0.02..0.02),
            gray + r.random_range(-0.02..0.02),
        ];
        let shade: f32 = r.random_range(0.05..0.3);
        Self {
            cx: 0.5 + r.random_range(-0.03..0.03),
            cy: 0.52 + r.random_range(-0.03..0.03),
            rx: r.random_range(0.27..0.33),
            ry: r.random_range(0.36..0.42),
            skin,
            background,
            background_tilt: r.random_range(-0.15..0.15),
            eye_dx: r.random_range(0.10..0.14),
            eye_dy: r.random_range(-0.10..-0.05),
            eye_r: r.random_range(0.022..0.032),
            mouth_dy: r.random_range(0.16..0.21),
            mouth_w: r.random_range(0.07..0.11),
            hair: [shade, shade * 0.8, shade * 0.6],
        }
    }
}

fn gauss(d2: f32, sigma: f32) -> f32 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

fn blend(base: [f32; 3], top: [f32; 3], w: f32) -> [f32; 3] {
    [
        base[0] + w * (top[0] - base[0]),
        base[1] + w * (top[1] - base[1]),
        base[2] + w * (top[2] - base[2]),
    ]
}

/// Renders one capture of a subject. `capture` distinguishes independent
/// recordings (and therefore pose/illumination sequences) of the same person.
pub fn render_face(size: usize, subject: u64, capture: u64, frame: u64, seed: u64) -> Image {
    let face = Face::for_subject(seed, subject);
    let mut r = derived_rng(seed, STREAM_FRAME, subject, capture, frame);
    let shift_x: f32 = r.random_range(-0.02..0.02);
    let shift_y: f32 = r.random_range(-0.02..0.02);
    let gain: f32 = r.random_range(0.9..1.1);
    let light_angle: f32 = r.random_range(0.0..2.0 * PI);
    let light_strength: f32 = r.random_range(0.0..0.2);
    let noise = Normal::new(0.0f32, SENSOR_NOISE).expect("valid sigma");

    let s = size as f32;
    let (cx, cy) = (face.cx + shift_x, face.cy + shift_y);
    let eyes = [(cx - face.eye_dx, cy + face.eye_dy), (cx + face.eye_dx, cy + face.eye_dy)];
    let mut img = Image::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let u = (x as f32 + 0.5) / s;
            let v = (y as f32 + 0.5) / s;
            let bg_shade = 1.0 + face.background_tilt * (v - 0.5);
            let mut px = face.background.map(|c| c * bg_shade);

            let du = (u - cx) / face.rx;
            let dv = (v - cy) / face.ry;
            let d = (du * du + dv * dv).sqrt();
            let alpha = 1.0 / (1.0 + (-(1.0 - d) * 25.0).exp());
            let shade = 1.0 - 0.25 * d * d;
            px = blend(px, face.skin.map(|c| c * shade), alpha);

            // hair cap over the top of the head
            let hair_d = ((u - cx) / (face.rx * 1.05)).powi(2) + ((v - cy) / (face.ry * 1.05)).powi(2);
            if v < cy - 0.55 * face.ry {
                let w = 1.0 / (1.0 + (-(1.0 - hair_d.sqrt()) * 25.0).exp());
                px = blend(px, face.hair, w * 0.9);
            }

            for (ex, ey) in eyes {
                let d2 = (u - ex).powi(2) + (v - ey).powi(2);
                px = blend(px, [0.12, 0.09, 0.08], 0.85 * gauss(d2, face.eye_r));
                let brow = (u - ex).powi(2) / 9.0 + (v - (ey - 2.2 * face.eye_r)).powi(2);
                px = blend(px, face.hair, 0.6 * gauss(brow, 0.009));
            }

            if v > cy - 0.02 && v < cy + 0.10 {
                let w = 0.18 * gauss((u - cx).powi(2), 0.009);
                px = blend(px, [0.35, 0.22, 0.18], w);
            }

            let mouth = ((u - cx) / face.mouth_w).powi(2) + ((v - (cy + face.mouth_dy)) / 0.02).powi(2);
            px = blend(px, [0.62, 0.26, 0.26], 0.8 * gauss(mouth, 0.6));

            let light = gain
                * (1.0 + light_strength * ((u - 0.5) * light_angle.cos() + (v - 0.5) * light_angle.sin()));
            let rgb = px.map(|c| c * light + noise.sample(&mut r));
            img.set_rgb(x, y, rgb);
        }
    }
    img.clamp();
    img
}

/// Standard deviation of the additive capture noise.
pub const SENSOR_NOISE: f32 = 0.03;

/// Deterministic bonafide capture of `subject` at `frame`.
pub fn render_bonafide(size: usize, subject: u64, frame: u64, seed: u64) -> Image {
    render_face(size, subject, 0, frame, seed)
}

const BAYER4: [[f32; 4]; 4] = [
    [0.0, 8.0, 2.0, 10.0],
    [12.0, 4.0, 14.0, 6.0],
    [3.0, 11.0, 1.0, 9.0],
    [15.0, 7.0, 13.0, 5.0],
];

/// Nominal spatial frequency of the simulated screen moiré, in cycles/pixel.
pub const MOIRE_FREQUENCY: f32 = 0.19;

/// Applies the recapture artifact of `pai` with amplitude scaled by
/// `strength`. Strength 0 returns the input unchanged. The artifact parameters
/// (phases, orientations, gains) are drawn from `rng`.
pub fn apply_attack_artifact(image: &Image, pai: Pai, strength: f64, rng: &mut impl Rng) -> Result<Image> {
    if pai == Pai::None {
        return Err(Error::InvalidArgument(
            "bonafide presentations carry no attack artifact".into(),
        ));
    }
    if !strength.is_finite() || strength < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid artifact strength {strength}")));
    }
    let s = strength as f32;
    let (w, h) = (image.width(), image.height());
    let mut out = image.clone();
    match pai {
        Pai::None => unreachable!(),
        Pai::PrintHalftone => {
            let (ox, oy) = (rng.random_range(0..4usize), rng.random_range(0..4usize));
            let dot = (0.35 * s).min(1.0);
            let desat = (0.3 * s).min(1.0);
            for y in 0..h {
                for x in 0..w {
                    let t = (BAYER4[(y + oy) % 4][(x + ox) % 4] + 0.5) / 16.0;
                    let rgb = image.rgb(x, y).map(|c| {
                        let d = if c > t { 1.0 } else { 0.0 };
                        c + dot * (d - c)
                    });
                    let g = luminance(rgb);
                    out.set_rgb(x, y, rgb.map(|c| c + desat * (g - c)));
                }
            }
        }
        Pai::ReplayMoire => {
            let theta: f32 = (35.0 + rng.random_range(-8.0..8.0f32)).to_radians();
            let freq = MOIRE_FREQUENCY + rng.random_range(-0.01..0.01f32);
            let phase: f32 = rng.random_range(0.0..2.0 * PI);
            let amp = 0.07 * s;
            for y in 0..h {
                for x in 0..w {
                    let arg = 2.0 * PI * freq * (x as f32 * theta.cos() + y as f32 * theta.sin()) + phase;
                    let delta = amp * arg.sin();
                    out.set_rgb(x, y, image.rgb(x, y).map(|c| c + delta));
                }
            }
        }
        Pai::ReplayBanding => {
            let period: f32 = rng.random_range(6.0..10.0);
            let phase: f32 = rng.random_range(0.0..2.0 * PI);
            let amp = 0.12 * s;
            let angle: f32 = rng.random_range(20.0..70.0f32).to_radians();
            let (px, py) = (rng.random_range(0.0..w as f32), rng.random_range(0.0..h as f32));
            let width: f32 = rng.random_range(4.0..8.0);
            let glare = 0.3 * s;
            let (nx, ny) = (-angle.sin(), angle.cos());
            for y in 0..h {
                let band = 1.0 + amp * (2.0 * PI * y as f32 / period + phase).sin();
                for x in 0..w {
                    let dist = (x as f32 - px) * nx + (y as f32 - py) * ny;
                    let streak = glare * gauss(dist * dist, width);
                    out.set_rgb(x, y, image.rgb(x, y).map(|c| c * band + streak));
                }
            }
        }
        Pai::PrintColorcast => {
            // warm print cast: red up, blue down
            let dirs = [1.0f32, 0.0, -1.0];
            let mags: [f32; 3] = [
                rng.random_range(0.6..1.0),
                rng.random_range(0.6..1.0),
                rng.random_range(0.6..1.0),
            ];
            for c in 0..3 {
                let gain = 1.0 + 0.08 * s * dirs[c] * mags[c];
                out.plane_mut(c).iter_mut().for_each(|v| *v *= gain);
            }
            if s > 0.0 {
                out = gaussian_blur(&out, 2.0 * s);
            }
        }
    }
    out.clamp();
    Ok(out)
}

/// Rec. 601 luma.
pub fn luminance(rgb: [f32; 3]) -> f32 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(img: &Image, sigma: f32) -> Image {
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f32> = (-radius..=radius).map(|i| gauss((i * i) as f32, sigma)).collect();
    let norm: f32 = kernel.iter().sum();
    let kernel: Vec<f32> = kernel.iter().map(|k| k / norm).collect();
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut tmp = img.clone();
    let mut out = img.clone();
    for c in 0..3 {
        let src = img.plane(c);
        let dst = tmp.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let xx = (x + k as isize - radius).clamp(0, w - 1);
                    acc += kv * src[(y * w + xx) as usize];
                }
                dst[(y * w + x) as usize] = acc;
            }
        }
        let src = tmp.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let yy = (y + k as isize - radius).clamp(0, h - 1);
                    acc += kv * src[(yy * w + x) as usize];
                }
                dst[(y * w + x) as usize] = acc;
            }
        }
    }
    out
}

/// Subject ids of each split: subjects are ranked by a seeded hash and cut
/// 60/20/20 into train/dev/eval.
pub fn assign_subjects(subjects: usize, seed: u64) -> [Vec<u64>; 3] {
    let mut ranked: Vec<(u64, u64)> = (0..subjects as u64)
        .map(|s| (derived_rng(seed, STREAM_SPLIT, s, 0, 0).random::<u64>(), s))
        .collect();
    ranked.sort();
    let n = subjects;
    let n_train = ((0.6 * n as f64).round() as usize).clamp(1, n - 2);
    let n_dev = ((0.2 * n as f64).round() as usize).clamp(1, n - n_train - 1);
    let mut out: [Vec<u64>; 3] = Default::default();
    for (i, (_, s)) in ranked.into_iter().enumerate() {
        let k = if i < n_train {
            0
        } else if i < n_train + n_dev {
            1
        } else {
            2
        };
        out[k].push(s);
    }
    out.iter_mut().for_each(|v| v.sort());
    out
}

/// Renders the corpus into `out_dir` (one directory of PPM frames per video)
/// and writes its manifest. Attack videos cycle through the PAIs within each
/// split so that every split covers as many PAIs as it has attack videos.
pub fn generate_dataset(config: &GeneratorConfig, out_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let splits = assign_subjects(config.subjects, config.seed);
    let size = config.image_size;
    let mut samples = Vec::new();
    for (split, subjects) in Split::ALL.into_iter().zip(&splits) {
        let mut next_pai = 0usize;
        for &subject in subjects {
            let mut videos: Vec<(String, Pai, u64, u64)> = Vec::new();
            for v in 0..config.bonafide_videos as u64 {
                videos.push((format!("s{subject:03}_bonafide{v}"), Pai::None, v, v));
            }
            for v in 0..config.attack_videos as u64 {
                let pai = Pai::ATTACKS[next_pai % Pai::ATTACKS.len()];
                next_pai += 1;
                videos.push((format!("s{subject:03}_{pai}{v}"), pai, 1000 + v, v));
            }
            for (video_id, pai, capture, v) in videos {
                let dir = out_dir.join(&video_id);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for frame in 0..config.frames {
                    let mut img = render_face(size, subject, capture, frame as u64, config.seed);
                    if pai != Pai::None {
                        let mut rng = derived_rng(config.seed, STREAM_ARTIFACT, subject, v, 0);
                        img = apply_attack_artifact(&img, pai, config.strengths.get(pai), &mut rng)?;
                    }
                    let path = dir.join(format!("{frame:03}.ppm"));
                    fs::write(&path, encode_ppm(&img)).map_err(|e| Error::io(&path, e))?;
                    samples.push(Sample {
                        path,
                        label: if pai == Pai::None { Label::Bonafide } else { Label::Attack },
                        pai,
                        video_id: video_id.clone(),
                        frame_index: frame,
                        split,
                    });
                }
            }
        }
    }
    let manifest = Manifest {
        name: config.name.clone(),
        config_hash: config.hash(),
        root: out_dir.to_path_buf(),
        samples,
    };
    manifest.validate()?;
    manifest.save()?;
    let cfg_path = out_dir.join("generator.cfg");
    let text: String = config
        .to_pairs()
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    fs::write(&cfg_path, text).map_err(|e| Error::io(&cfg_path, e))?;
    Ok(manifest)
}

/// SHA-256 over the manifest file and every image it references, in manifest
/// order.
pub fn corpus_fingerprint(manifest: &Manifest) -> Result<String> {
    let mut h = Sha256::new();
    let path = manifest.root.join(super::manifest::MANIFEST_FILE);
    h.update(fs::read(&path).map_err(|e| Error::io(&path, e))?);
    for s in &manifest.samples {
        h.update(fs::read(&s.path).map_err(|e| Error::io(&s.path, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

/// Random generator for artifact parameters of one attack video.
pub fn artifact_rng(seed: u64, subject: u64, video: u64) -> ChaCha8Rng {
    derived_rng(seed, STREAM_ARTIFACT, subject, video, 0)
}
