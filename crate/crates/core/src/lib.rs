//! Face presentation attack detection with pixel-wise binary supervision.
//!
//! A densely connected convolutional network predicts a coarse map in which
//! every cell carries the frame's bonafide/attack label, plus a single binary
//! output on top of that map. The crate contains everything needed to train
//! and evaluate it on the CPU: a small reverse-mode engine ([`autodiff`]), the
//! network and its losses ([`model`]), optimization ([`train`]), a synthetic
//! recapture-artifact corpus ([`data`]), ISO/IEC 30107-3 style metrics
//! ([`metrics`]) and handcrafted-feature baselines ([`baselines`]).

pub mod autodiff;
pub mod baselines;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod train;

pub use error::{Error, Result};
