//! Synthetic corpus, on-disk format, preprocessing and evaluation protocols.

pub mod image;
pub mod manifest;
pub mod preprocess;
pub mod protocol;
pub mod synth;

pub use image::{decode_ppm, encode_ppm, read_ppm, write_ppm, Image};
pub use manifest::{Label, Manifest, Pai, Sample, Split};
pub use preprocess::{preprocess, resize_square, select_frame_indices, select_frames, select_video_frames};
pub use protocol::{apply_protocol, cross_protocol, ProtocolSpec, ProtocolSplits, Purpose, ThresholdSource};
pub use synth::{
    apply_attack_artifact, artifact_rng, corpus_fingerprint, generate_dataset, render_bonafide, render_face,
    ArtifactStrengths, GeneratorConfig,
};
