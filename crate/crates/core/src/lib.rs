//! Multimodal hypersphere anomaly detection for pantograph-catenary arcing.
//!
//! The crate covers the whole desk-scale pipeline: seeded synthetic force
//! signals and pantograph scenes, FFT force features and image corruptions,
//! pseudo-anomaly generation (arc cut-paste, mixup, nearest-neighbour mixup),
//! a small differentiable core, the hypersphere detector with its three
//! training objectives, and evaluation harnesses.

mod bytes;
pub mod config;
pub mod dataset;
pub mod deepsad;
pub mod error;
pub mod eval;
pub mod features;
pub mod force;
pub mod label;
pub mod pseudo;
pub mod rng;
pub mod scene;
pub mod tensor;

pub use error::{Error, Result};
pub use label::{Label, Provenance};
