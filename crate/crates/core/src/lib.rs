//! Label-aware contrastive training for multi-label classification on
//! precomputed sentence embeddings.
//!
//! The crate covers the whole pipeline: dataset I/O and synthesis, the
//! combined BCE + contrastive objective with analytic gradients, a small
//! body/head model with per-part freezing, batch samplers, the two-phase
//! multi-stage trainer with its ablation harness, and embedding-space
//! diagnostics.

pub mod ablation;
pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod sampler;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use data::{Dataset, LabelVector, Sample, Split};
pub use error::{Error, Result};
pub use matrix::Matrix;
