//! EEG emotion classification from multi-channel recordings.
//!
//! The library covers the full path from raw CSV recordings to evaluated
//! classifiers:
//!
//! ```text
//! CSV recordings -> segmentation -> session split -> wavelet decomposition
//!     -> per-channel statistics -> feature vectors -> kNN / recurrent net
//!     -> confusion matrices and reports
//! ```
//!
//! Modules are usable on their own; [`pipeline`] wires them together behind
//! a single config file and writes the artifact set the `emowave` binary
//! exposes.

pub mod dwt;
pub mod features;
pub mod knn;
pub mod metrics;
pub mod pipeline;
pub mod rnn;
pub mod signal_io;
pub mod synth;

mod seed;

pub use seed::sub_seed;
