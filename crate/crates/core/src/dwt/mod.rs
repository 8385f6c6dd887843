//! Multilevel discrete wavelet transform.
//!
//! The decomposition convolves the signal with an analysis filter pair and
//! keeps every second output:
//!
//! ```text
//! approx[n] = sum_k x[k] * lowpass[2n - k]
//! detail[n] = sum_k x[k] * highpass[2n - k]
//! ```
//!
//! Out-of-range samples come from the chosen [`ExtensionMode`]. Repeating
//! the step on the approximation yields the level-by-level decomposition;
//! [`waverec`] inverts it exactly (up to rounding) for every mode.
//!
//! [`subband_map`] reports which frequency range each coefficient set
//! covers at a given sampling rate and tags it with the conventional EEG
//! rhythm name where one fits.

mod filters;
mod subband;
mod transform;

pub use filters::{available_wavelets, parse_wavelet_table, WaveletFilterPair};
pub use subband::{subband_map, Rhythm, SubbandId, SubbandRange};
pub use transform::{
    coefficient_len, dwt_step, wavedec, waverec, ExtensionMode, WaveletDecomposition,
};

#[derive(Debug, thiserror::Error)]
pub enum DwtError {
    #[error("unknown wavelet {0:?}; available: {1}")]
    UnknownWavelet(String, String),
    #[error("filter {name:?} rejected: {reason}")]
    InvalidFilter { name: String, reason: String },
    #[error("wavelet table: {0}")]
    TableParse(String),
    #[error("signal of {len} sample(s) is too short to transform (minimum 2)")]
    SignalTooShort { len: usize },
    #[error("cannot run {requested} level(s): level {failed_at} input has {len} samples, fewer than the {filter_len}-tap filter")]
    TooManyLevels {
        requested: usize,
        failed_at: usize,
        len: usize,
        filter_len: usize,
    },
    #[error("decomposition must have at least one level")]
    ZeroLevels,
    #[error("decomposition does not fit the given filters: {0}")]
    ShapeMismatch(String),
    #[error("sampling rate must be positive and finite, got {0}")]
    InvalidSamplingRate(f64),
}
