//! Speaker-verification evaluation and context-adaptive threshold
//! calibration.
//!
//! The crate covers the full pipeline:
//!
//! - [`audio`] / [`features`] — WAV decoding and 80-dimensional log-mel
//!   filterbank extraction (25 ms frames, 10 ms shift).
//! - [`model`] — the multi-scale residual embedding network with attentive
//!   statistics pooling, additive-margin softmax loss with analytic
//!   gradients, and parameter/MAC counting.
//! - [`scoring`] — cosine trial scoring, FAR/FRR sweeps, EER, minDCF.
//! - [`calibration`] — per-group thresholds at a common FAR target,
//!   single-vs-adaptive comparison, EET-based grade grouping, and the
//!   context-adaptive verification decision.
//! - [`detector`] — a light dense classifier that infers group context
//!   (e.g. gender) from speaker embeddings.
//! - [`store`] / [`trials`] / [`experiment`] — file formats, trial lists,
//!   and the reproducible experiment runner.
//!
//! Start with the `examples/` directory: each example is a runnable tour
//! of one capability, and `cargo run --bin svcal -- selftest` exercises the
//! whole stack.

pub mod audio;
pub mod calibration;
pub mod config;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod features;
pub mod model;
pub mod plot;
pub mod scoring;
pub mod store;
pub mod synthetic;
pub mod tensor;
pub mod trials;

pub use calibration::{GroupKey, GroupThresholdTable};
pub use error::{Error, Result};
pub use features::{AudioSignal, FeatureConfig, FeatureMatrix};
pub use model::{Embedding, ModelConfig, ParameterSet};
pub use scoring::{DcfParams, ScoreSet, TrialLabel, TrialPair};
pub use store::EmbeddingStore;
pub use tensor::TensorChw;
