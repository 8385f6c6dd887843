//! Decomposition and reconstruction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DwtError, WaveletFilterPair};

/// How samples beyond the signal edges are defined during analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionMode {
    /// Out-of-range samples are zero.
    Zero,
    /// Half-point mirror: ... x1 x0 | x0 x1 ... xN-1 | xN-1 xN-2 ...
    #[default]
    Symmetric,
    /// The signal is treated as one period; odd lengths are padded by
    /// repeating the final sample. Each branch keeps ceil(n/2)
    /// coefficients, and for even lengths the transform is orthogonal, so
    /// energy is conserved exactly.
    Periodic,
}

impl ExtensionMode {
    pub fn name(self) -> &'static str {
        match self {
            ExtensionMode::Zero => "zero",
            ExtensionMode::Symmetric => "symmetric",
            ExtensionMode::Periodic => "periodic",
        }
    }
}

impl fmt::Display for ExtensionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExtensionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(ExtensionMode::Zero),
            "symmetric" => Ok(ExtensionMode::Symmetric),
            "periodic" => Ok(ExtensionMode::Periodic),
            other => Err(format!(
                "unknown extension mode {other:?} (expected zero, symmetric, or periodic)"
            )),
        }
    }
}

/// Multilevel analysis result.
///
/// `details[0]` is the finest level (level 1); `approximation` belongs to
/// the deepest level. `input_lengths[l]` records how many samples entered
/// the analysis at level `l + 1`, which makes reconstruction exact and
/// shape checks unambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    pub levels: usize,
    pub extension_mode: ExtensionMode,
    pub input_lengths: Vec<usize>,
}

/// Coefficient count produced by one analysis step on `input_len` samples.
///
/// Extension modes decimate the full convolution: ceil((n + taps - 1) / 2).
/// Periodic mode is the exception at ceil(n / 2).
pub fn coefficient_len(input_len: usize, filter_len: usize, mode: ExtensionMode) -> usize {
    match mode {
        ExtensionMode::Periodic => input_len.div_ceil(2),
        _ => (input_len + filter_len - 1).div_ceil(2),
    }
}

/// Sample of the extended signal at (possibly out-of-range) index `j`.
fn extended(signal: &[f64], j: isize, mode: ExtensionMode) -> f64 {
    let n = signal.len() as isize;
    if (0..n).contains(&j) {
        return signal[j as usize];
    }
    match mode {
        ExtensionMode::Zero => 0.0,
        ExtensionMode::Symmetric => {
            // Mirroring has period 2n; fold the index into one period.
            let m = j.rem_euclid(2 * n);
            let idx = if m < n { m } else { 2 * n - 1 - m };
            signal[idx as usize]
        }
        ExtensionMode::Periodic => signal[j.rem_euclid(n) as usize],
    }
}

/// One analysis step: returns (approximation, detail).
pub fn dwt_step(
    signal: &[f64],
    filters: &WaveletFilterPair,
    mode: ExtensionMode,
) -> Result<(Vec<f64>, Vec<f64>), DwtError> {
    if signal.len() < 2 {
        return Err(DwtError::SignalTooShort { len: signal.len() });
    }
    let h = filters.lowpass();
    let g = filters.highpass();
    let taps = filters.len();

    let padded;
    let (x, mode) = match mode {
        ExtensionMode::Periodic if signal.len() % 2 == 1 => {
            let mut p = signal.to_vec();
            p.push(*signal.last().unwrap());
            padded = p;
            (padded.as_slice(), ExtensionMode::Periodic)
        }
        m => (signal, m),
    };

    let out_len = coefficient_len(signal.len(), taps, mode);
    let mut approx = vec![0.0; out_len];
    let mut detail = vec![0.0; out_len];
    for n in 0..out_len {
        let mut a = 0.0;
        let mut d = 0.0;
        for (i, (&hi, &gi)) in h.iter().zip(g).enumerate() {
            let v = extended(x, 2 * n as isize - i as isize, mode);
            a += hi * v;
            d += gi * v;
        }
        approx[n] = a;
        detail[n] = d;
    }
    Ok((approx, detail))
}

/// Repeats [`dwt_step`] on the approximation `levels` times.
///
/// Every level's input must be at least as long as the filter; the level
/// at which that first fails is reported in [`DwtError::TooManyLevels`].
pub fn wavedec(
    signal: &[f64],
    filters: &WaveletFilterPair,
    levels: usize,
    mode: ExtensionMode,
) -> Result<WaveletDecomposition, DwtError> {
    if levels == 0 {
        return Err(DwtError::ZeroLevels);
    }
    let mut details = Vec::with_capacity(levels);
    let mut input_lengths = Vec::with_capacity(levels);
    let mut current = signal.to_vec();
    for level in 1..=levels {
        if current.len() < filters.len() {
            return Err(DwtError::TooManyLevels {
                requested: levels,
                failed_at: level,
                len: current.len(),
                filter_len: filters.len(),
            });
        }
        input_lengths.push(current.len());
        let (approx, detail) = dwt_step(&current, filters, mode)?;
        details.push(detail);
        current = approx;
    }
    Ok(WaveletDecomposition {
        details,
        approximation: current,
        levels,
        extension_mode: mode,
        input_lengths,
    })
}

/// One synthesis step, the adjoint of [`dwt_step`] restricted to the
/// original sample range: out[2n - i] += approx[n] h[i] + detail[n] g[i].
fn idwt_step(
    approx: &[f64],
    detail: &[f64],
    filters: &WaveletFilterPair,
    mode: ExtensionMode,
    output_len: usize,
) -> Vec<f64> {
    let h = filters.lowpass();
    let g = filters.highpass();
    match mode {
        ExtensionMode::Periodic => {
            // The analysis acted on the signal padded to even length.
            let padded_len = approx.len() * 2;
            let mut out = vec![0.0; padded_len];
            for n in 0..approx.len() {
                for i in 0..filters.len() {
                    let j = (2 * n as isize - i as isize).rem_euclid(padded_len as isize);
                    out[j as usize] += approx[n] * h[i] + detail[n] * g[i];
                }
            }
            out.truncate(output_len);
            out
        }
        _ => {
            let mut out = vec![0.0; output_len];
            for n in 0..approx.len() {
                for i in 0..filters.len() {
                    let j = 2 * n as isize - i as isize;
                    if (0..output_len as isize).contains(&j) {
                        out[j as usize] += approx[n] * h[i] + detail[n] * g[i];
                    }
                }
            }
            out
        }
    }
}

/// Inverts a decomposition produced by [`wavedec`] with the same filters.
pub fn waverec(
    dec: &WaveletDecomposition,
    filters: &WaveletFilterPair,
) -> Result<Vec<f64>, DwtError> {
    if dec.levels == 0 || dec.details.len() != dec.levels || dec.input_lengths.len() != dec.levels
    {
        return Err(DwtError::ShapeMismatch(format!(
            "{} detail set(s) and {} recorded length(s) for {} level(s)",
            dec.details.len(),
            dec.input_lengths.len(),
            dec.levels
        )));
    }
    for (l, detail) in dec.details.iter().enumerate() {
        let expect = coefficient_len(dec.input_lengths[l], filters.len(), dec.extension_mode);
        if detail.len() != expect {
            return Err(DwtError::ShapeMismatch(format!(
                "level {} detail has {} coefficient(s), expected {expect}",
                l + 1,
                detail.len()
            )));
        }
        if l + 1 < dec.levels && dec.input_lengths[l + 1] != expect {
            return Err(DwtError::ShapeMismatch(format!(
                "level {} input length {} does not follow from level {}",
                l + 2,
                dec.input_lengths[l + 1],
                l + 1
            )));
        }
    }
    let deepest = coefficient_len(
        dec.input_lengths[dec.levels - 1],
        filters.len(),
        dec.extension_mode,
    );
    if dec.approximation.len() != deepest {
        return Err(DwtError::ShapeMismatch(format!(
            "approximation has {} coefficient(s), expected {deepest}",
            dec.approximation.len()
        )));
    }

    let mut current = dec.approximation.clone();
    for l in (0..dec.levels).rev() {
        current = idwt_step(
            &current,
            &dec.details[l],
            filters,
            dec.extension_mode,
            dec.input_lengths[l],
        );
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_2: f64 = std::f64::consts::SQRT_2;

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() <= tol, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn haar_periodic_constant_signal() {
        let haar = WaveletFilterPair::haar();
        let (approx, detail) =
            dwt_step(&[1.0, 1.0, 1.0, 1.0], &haar, ExtensionMode::Periodic).unwrap();
        assert_close(&approx, &[SQRT_2, SQRT_2], 1e-12);
        assert_close(&detail, &[0.0, 0.0], 1e-12);
    }

    #[test]
    fn haar_periodic_alternating_signal() {
        let haar = WaveletFilterPair::haar();
        let (approx, detail) =
            dwt_step(&[1.0, -1.0, 1.0, -1.0], &haar, ExtensionMode::Periodic).unwrap();
        assert_close(&approx, &[0.0, 0.0], 1e-12);
        assert_close(&detail, &[SQRT_2, SQRT_2], 1e-12);
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let haar = WaveletFilterPair::haar();
        assert!(matches!(
            dwt_step(&[1.0], &haar, ExtensionMode::Symmetric),
            Err(DwtError::SignalTooShort { len: 1 })
        ));
    }

    #[test]
    fn db4_level_counts_follow_the_decimated_convolution_recurrence() {
        // ceil((n + 7) / 2) from 256: 132, 70, 39.
        let db4 = WaveletFilterPair::db4();
        let x: Vec<f64> = (0..256).map(|i| (i as f64 * 0.37).sin()).collect();
        let dec = wavedec(&x, &db4, 3, ExtensionMode::Symmetric).unwrap();
        let lens: Vec<usize> = dec.details.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![132, 70, 39]);
        assert_eq!(dec.approximation.len(), 39);
        assert_eq!(dec.input_lengths, vec![256, 132, 70]);
    }

    #[test]
    fn periodic_counts_halve() {
        let db4 = WaveletFilterPair::db4();
        let x: Vec<f64> = (0..256).map(|i| (i as f64 * 0.37).cos()).collect();
        let dec = wavedec(&x, &db4, 3, ExtensionMode::Periodic).unwrap();
        let lens: Vec<usize> = dec.details.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![128, 64, 32]);
    }

    #[test]
    fn zero_levels_is_rejected() {
        let haar = WaveletFilterPair::haar();
        assert!(matches!(
            wavedec(&[1.0, 2.0], &haar, 0, ExtensionMode::Symmetric),
            Err(DwtError::ZeroLevels)
        ));
    }

    #[test]
    fn depth_beyond_the_filter_support_is_rejected() {
        let haar = WaveletFilterPair::haar();
        let x: Vec<f64> = (0..256).map(|i| i as f64).collect();
        // Periodic lengths halve: 256 ... 2, 1; level 9 input is a single sample.
        match wavedec(&x, &haar, 50, ExtensionMode::Periodic) {
            Err(DwtError::TooManyLevels {
                requested: 50,
                failed_at: 9,
                len: 1,
                filter_len: 2,
            }) => {}
            other => panic!("expected TooManyLevels at level 9, got {other:?}"),
        }
        let db4 = WaveletFilterPair::db4();
        assert!(matches!(
            wavedec(&x, &db4, 50, ExtensionMode::Periodic),
            Err(DwtError::TooManyLevels { .. })
        ));
    }

    #[test]
    fn reconstruction_inverts_decomposition_in_every_mode() {
        let modes = [
            ExtensionMode::Zero,
            ExtensionMode::Symmetric,
            ExtensionMode::Periodic,
        ];
        for filters in [WaveletFilterPair::haar(), WaveletFilterPair::db4()] {
            for mode in modes {
                for n in [17usize, 64, 100, 255] {
                    let x: Vec<f64> = (0..n)
                        .map(|i| (i as f64 * 0.21).sin() + 0.4 * (i as f64 * 1.7).cos())
                        .collect();
                    let dec = wavedec(&x, &filters, 2, mode).unwrap();
                    let back = waverec(&dec, &filters).unwrap();
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let err = x
                        .iter()
                        .zip(&back)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    assert!(
                        err / norm < 1e-10,
                        "{} {mode} n={n}: relative error {}",
                        filters.name(),
                        err / norm
                    );
                }
            }
        }
    }

    #[test]
    fn periodic_mode_conserves_energy_on_even_lengths() {
        let db4 = WaveletFilterPair::db4();
        let x: Vec<f64> = (0..128).map(|i| (i as f64 * 0.83).sin() * (1.0 + i as f64 * 0.01)).collect();
        let (approx, detail) = dwt_step(&x, &db4, ExtensionMode::Periodic).unwrap();
        let in_energy: f64 = x.iter().map(|v| v * v).sum();
        let out_energy: f64 = approx.iter().chain(&detail).map(|v| v * v).sum();
        // The tabulated coefficients are decimal-rounded, so orthogonality
        // holds to ~1e-12, not machine epsilon.
        assert!((in_energy - out_energy).abs() / in_energy < 1e-11);
    }

    #[test]
    fn tampered_decompositions_are_rejected() {
        let db4 = WaveletFilterPair::db4();
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.5).sin()).collect();
        let good = wavedec(&x, &db4, 2, ExtensionMode::Symmetric).unwrap();

        let mut truncated = good.clone();
        truncated.details[1].pop();
        assert!(matches!(
            waverec(&truncated, &db4),
            Err(DwtError::ShapeMismatch(_))
        ));

        let mut missing = good.clone();
        missing.details.pop();
        assert!(matches!(
            waverec(&missing, &db4),
            Err(DwtError::ShapeMismatch(_))
        ));

        // A decomposition made with one filter length cannot be decoded
        // with another.
        assert!(matches!(
            waverec(&good, &WaveletFilterPair::haar()),
            Err(DwtError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [
            ExtensionMode::Zero,
            ExtensionMode::Symmetric,
            ExtensionMode::Periodic,
        ] {
            assert_eq!(mode.name().parse::<ExtensionMode>().unwrap(), mode);
        }
        assert!("reflect".parse::<ExtensionMode>().is_err());
    }
}
