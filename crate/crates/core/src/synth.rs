//! Deterministic synthetic headband recordings for fixtures and smoke
//! runs. Each class mixes the same three tones but with its own
//! amplitude signature, so every channel looks like a plausible noisy
//! trace while the classes stay separable.
//!
//! The signatures differ in total power, not just in which band is
//! loudest: the feature statistics pool all subband coefficients per
//! channel, and a near-orthogonal transform maps equal-power signals to
//! equal pooled energy no matter where the energy sits. Classes that
//! differed only by band would collapse to almost the same feature
//! vector.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::signal_io::{write_recording, Channel, EegRecording, EmotionLabel, SignalIoError};
use crate::sub_seed;

/// One tone per rhythm of interest: theta, alpha, beta.
pub const TONE_FREQUENCIES_HZ: [f64; 3] = [6.0, 10.0, 20.0];

/// Per-class tone amplitudes. Each class is loud in a different band
/// and the total power is ordered Positive < Neutral < Negative.
fn class_signature(label: EmotionLabel) -> [f64; 3] {
    match label {
        EmotionLabel::Positive => [6.0, 1.0, 1.0],
        EmotionLabel::Neutral => [1.0, 10.0, 1.0],
        EmotionLabel::Negative => [1.0, 1.0, 16.0],
    }
}

/// Mild electrode-to-electrode gain spread.
const CHANNEL_GAINS: [f64; 4] = [1.0, 0.9, 1.1, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seconds_per_recording: f64,
    pub sampling_rate_hz: f64,
    pub sessions_per_label: u32,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seconds_per_recording: 60.0,
            sampling_rate_hz: 256.0,
            sessions_per_label: 3,
            noise_sigma: 0.5,
            seed: 0,
        }
    }
}

/// Box-Muller draw; two uniforms per normal, the sine twin is discarded
/// to keep the stream layout obvious.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Builds one recording. The RNG stream is derived from the master seed
/// plus the (label, session) pair, so any single file can be regenerated
/// without producing the others.
pub fn generate_recording(
    cfg: &SynthConfig,
    label: EmotionLabel,
    session: u32,
) -> EegRecording {
    let name = format!("synth/{}/{}", label.name(), session);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, &name));

    let samples_per_channel = (cfg.seconds_per_recording * cfg.sampling_rate_hz).round() as usize;
    let amps = class_signature(label);

    // Phases first, then noise, in channel-major order.
    let phases: Vec<[f64; 3]> = (0..CHANNEL_GAINS.len())
        .map(|_| {
            let mut p = [0.0; 3];
            for v in &mut p {
                *v = rng.gen::<f64>() * TAU;
            }
            p
        })
        .collect();

    let mut samples = Vec::with_capacity(CHANNEL_GAINS.len());
    for (ch, &gain) in CHANNEL_GAINS.iter().enumerate() {
        let mut column = Vec::with_capacity(samples_per_channel);
        for i in 0..samples_per_channel {
            let t = i as f64 / cfg.sampling_rate_hz;
            let mut v = 0.0;
            for (k, &freq) in TONE_FREQUENCIES_HZ.iter().enumerate() {
                v += amps[k] * (TAU * freq * t + phases[ch][k]).sin();
            }
            column.push(gain * v + cfg.noise_sigma * standard_normal(&mut rng));
        }
        samples.push(column);
    }

    let source_id = label.index() as u32 * cfg.sessions_per_label + (session - 1);
    EegRecording::new(
        Channel::ALL.to_vec(),
        samples,
        cfg.sampling_rate_hz,
        session,
        source_id,
        label,
    )
    .expect("generated recording is structurally valid")
}

/// Every label crossed with sessions 1..=sessions_per_label, label-major.
pub fn generate_dataset(cfg: &SynthConfig) -> Vec<EegRecording> {
    let mut out = Vec::new();
    for label in EmotionLabel::ALL {
        for session in 1..=cfg.sessions_per_label {
            out.push(generate_recording(cfg, label, session));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFile {
    pub path: PathBuf,
    pub label: EmotionLabel,
    pub session: u32,
}

/// Writes the whole dataset as CSV files named
/// `synthetic_<label>_s<session>.csv` under `dir`.
pub fn write_dataset(cfg: &SynthConfig, dir: &Path) -> Result<Vec<SynthFile>, SignalIoError> {
    let mut files = Vec::new();
    for recording in generate_dataset(cfg) {
        let file_name = format!(
            "synthetic_{}_s{}.csv",
            recording.label.name().to_lowercase(),
            recording.session_id
        );
        let path = dir.join(file_name);
        write_recording(&recording, &path)?;
        files.push(SynthFile {
            path,
            label: recording.label,
            session: recording.session_id,
        });
    }
    Ok(files)
}
