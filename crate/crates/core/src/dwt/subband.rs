//! Frequency ranges of the coefficient sets.
//!
//! With an ideal half-band split, detail level l of a signal sampled at
//! `fs` covers (fs/2^(l+1), fs/2^l] and the deepest approximation covers
//! what is left at the bottom, so the sets partition (0, fs/2].

use std::fmt;

use serde::{Deserialize, Serialize};

use super::DwtError;

/// Conventional EEG rhythm bands, in Hz.
const BANDS: [(Rhythm, f64, f64); 5] = [
    (Rhythm::Delta, 0.0, 4.0),
    (Rhythm::Theta, 4.0, 8.0),
    (Rhythm::Alpha, 8.0, 13.0),
    (Rhythm::Beta, 13.0, 30.0),
    (Rhythm::Gamma, 30.0, 100.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rhythm {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
    /// No band overlaps at least half of the set's range.
    None,
}

impl fmt::Display for Rhythm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Rhythm::Delta => "delta",
            Rhythm::Theta => "theta",
            Rhythm::Alpha => "alpha",
            Rhythm::Beta => "beta",
            Rhythm::Gamma => "gamma",
            Rhythm::None => "none",
        };
        f.write_str(name)
    }
}

/// Identity of one coefficient set within a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubbandId {
    Detail(usize),
    Approximation(usize),
}

impl fmt::Display for SubbandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubbandId::Detail(l) => write!(f, "d{l}"),
            SubbandId::Approximation(l) => write!(f, "a{l}"),
        }
    }
}

/// One coefficient set's nominal frequency range `(low_hz, high_hz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubbandRange {
    pub id: SubbandId,
    pub low_hz: f64,
    pub high_hz: f64,
    pub rhythm: Rhythm,
}

/// Ranges for an L-level decomposition at `sampling_rate` Hz, ordered
/// d1, d2, ..., dL, aL.
///
/// A set is tagged with the rhythm whose band covers the largest share of
/// the set's range, provided that share is at least half; otherwise it is
/// tagged [`Rhythm::None`]. Exact 50/50 splits go to the lower band.
pub fn subband_map(sampling_rate: f64, levels: usize) -> Result<Vec<SubbandRange>, DwtError> {
    if !(sampling_rate > 0.0) || !sampling_rate.is_finite() {
        return Err(DwtError::InvalidSamplingRate(sampling_rate));
    }
    if levels == 0 {
        return Err(DwtError::ZeroLevels);
    }

    let mut map = Vec::with_capacity(levels + 1);
    for l in 1..=levels {
        let high = sampling_rate / f64::powi(2.0, l as i32);
        let low = high / 2.0;
        map.push(SubbandRange {
            id: SubbandId::Detail(l),
            low_hz: low,
            high_hz: high,
            rhythm: classify(low, high),
        });
    }
    let top = sampling_rate / f64::powi(2.0, levels as i32 + 1);
    map.push(SubbandRange {
        id: SubbandId::Approximation(levels),
        low_hz: 0.0,
        high_hz: top,
        rhythm: classify(0.0, top),
    });
    Ok(map)
}

fn classify(low: f64, high: f64) -> Rhythm {
    let width = high - low;
    let mut best = Rhythm::None;
    let mut best_fraction = 0.0;
    for (rhythm, band_low, band_high) in BANDS {
        let overlap = (high.min(band_high) - low.max(band_low)).max(0.0);
        let fraction = overlap / width;
        // Strict comparison keeps the lower band on an exact tie.
        if fraction > best_fraction {
            best_fraction = fraction;
            best = rhythm;
        }
    }
    if best_fraction >= 0.5 {
        best
    } else {
        Rhythm::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_levels_at_256_hz_put_theta_in_d5() {
        let map = subband_map(256.0, 5).unwrap();
        assert_eq!(map.len(), 6);

        let d5 = &map[4];
        assert_eq!(d5.id, SubbandId::Detail(5));
        assert_eq!((d5.low_hz, d5.high_hz), (4.0, 8.0));
        assert_eq!(d5.rhythm, Rhythm::Theta);

        let a5 = &map[5];
        assert_eq!(a5.id, SubbandId::Approximation(5));
        assert_eq!((a5.low_hz, a5.high_hz), (0.0, 4.0));
        assert_eq!(a5.rhythm, Rhythm::Delta);

        assert_eq!((map[0].low_hz, map[0].high_hz), (64.0, 128.0));
        assert_eq!(map[3].rhythm, Rhythm::Alpha); // d4 = (8, 16], 5/8 alpha
    }

    #[test]
    fn three_levels_at_256_hz_leave_the_approximation_unlabeled() {
        let map = subband_map(256.0, 3).unwrap();
        let a3 = map.last().unwrap();
        assert_eq!(a3.id, SubbandId::Approximation(3));
        assert_eq!((a3.low_hz, a3.high_hz), (0.0, 16.0));
        // Largest overlap is alpha at 5/16, below the one-half threshold.
        assert_eq!(a3.rhythm, Rhythm::None);
    }

    #[test]
    fn single_level_at_64_hz() {
        let map = subband_map(64.0, 1).unwrap();
        assert_eq!((map[0].low_hz, map[0].high_hz), (16.0, 32.0));
        assert_eq!((map[1].low_hz, map[1].high_hz), (0.0, 16.0));
    }

    #[test]
    fn ranges_partition_the_spectrum() {
        for levels in 1..=8 {
            let map = subband_map(200.0, levels).unwrap();
            assert!((map[0].high_hz - 100.0).abs() < 1e-12);
            for pair in map.windows(2) {
                assert!((pair[0].low_hz - pair[1].high_hz).abs() < 1e-12);
            }
            assert_eq!(map.last().unwrap().low_hz, 0.0);
        }
    }

    #[test]
    fn ids_render_compactly() {
        assert_eq!(SubbandId::Detail(3).to_string(), "d3");
        assert_eq!(SubbandId::Approximation(5).to_string(), "a5");
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        assert!(subband_map(0.0, 3).is_err());
        assert!(subband_map(-1.0, 3).is_err());
        assert!(subband_map(256.0, 0).is_err());
    }
}
