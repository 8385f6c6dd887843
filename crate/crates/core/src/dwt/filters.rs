//! Analysis filter banks.
//!
//! Only the lowpass half is stored in the coefficient table; the highpass
//! is its quadrature mirror, `g[n] = (-1)^n h[L-1-n]`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::DwtError;

/// Tolerance for the orthogonality checks applied to filter tables.
const ORTHO_TOL: f64 = 1e-10;

const BUILTIN_TABLE: &str = include_str!("../../data/wavelets.toml");

/// Matched lowpass/highpass analysis filters for one wavelet family.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilterPair {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

#[derive(Deserialize)]
struct TableEntry {
    lowpass: Vec<f64>,
}

fn builtin() -> &'static BTreeMap<String, Vec<f64>> {
    static TABLE: OnceLock<BTreeMap<String, Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_wavelet_table(BUILTIN_TABLE).expect("built-in wavelet table is valid")
    })
}

/// Parses a TOML wavelet table (`[name] lowpass = [...]`) into a name ->
/// lowpass map. Coefficient validity is checked later, when a family is
/// actually instantiated.
pub fn parse_wavelet_table(text: &str) -> Result<BTreeMap<String, Vec<f64>>, DwtError> {
    let raw: BTreeMap<String, TableEntry> =
        toml::from_str(text).map_err(|e| DwtError::TableParse(e.to_string()))?;
    Ok(raw.into_iter().map(|(k, v)| (k, v.lowpass)).collect())
}

/// Names in the built-in coefficient table.
pub fn available_wavelets() -> Vec<String> {
    builtin().keys().cloned().collect()
}

impl WaveletFilterPair {
    /// Builds a filter pair from explicit lowpass coefficients, deriving
    /// the highpass by the quadrature mirror rule. Rejects filters that
    /// are not a valid orthogonal analysis bank: the tap count must be
    /// even, the coefficients must sum to sqrt(2), have unit norm, and be
    /// uncorrelated with themselves at every even shift.
    pub fn from_lowpass(name: impl Into<String>, lowpass: Vec<f64>) -> Result<Self, DwtError> {
        let name = name.into();
        let reject = |reason: String| DwtError::InvalidFilter {
            name: name.clone(),
            reason,
        };

        let len = lowpass.len();
        if len < 2 || len % 2 != 0 {
            return Err(reject(format!("{len} taps; need an even count of at least 2")));
        }
        if lowpass.iter().any(|c| !c.is_finite()) {
            return Err(reject("coefficients must be finite".into()));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > ORTHO_TOL {
            return Err(reject(format!("coefficient sum {sum} != sqrt(2)")));
        }
        let norm: f64 = lowpass.iter().map(|c| c * c).sum();
        if (norm - 1.0).abs() > ORTHO_TOL {
            return Err(reject(format!("squared norm {norm} != 1")));
        }
        for shift in (2..len).step_by(2) {
            let corr: f64 = (0..len - shift).map(|i| lowpass[i] * lowpass[i + shift]).sum();
            if corr.abs() > ORTHO_TOL {
                return Err(reject(format!("correlation {corr} at shift {shift}")));
            }
        }

        let highpass = (0..len)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - n]
            })
            .collect();
        Ok(WaveletFilterPair {
            name,
            lowpass,
            highpass,
        })
    }

    /// Looks a family up in the built-in table.
    pub fn by_name(name: &str) -> Result<Self, DwtError> {
        Self::from_table(name, builtin())
    }

    /// Looks a family up in a caller-supplied table, e.g. one parsed from
    /// a user file via [`parse_wavelet_table`].
    pub fn from_table(name: &str, table: &BTreeMap<String, Vec<f64>>) -> Result<Self, DwtError> {
        let key = name.trim().to_ascii_lowercase();
        let lowpass = table.get(&key).ok_or_else(|| {
            DwtError::UnknownWavelet(
                name.to_string(),
                table.keys().cloned().collect::<Vec<_>>().join(", "),
            )
        })?;
        Self::from_lowpass(key, lowpass.clone())
    }

    pub fn haar() -> Self {
        Self::by_name("haar").expect("built-in haar")
    }

    pub fn db4() -> Self {
        Self::by_name("db4").expect("built-in db4")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false // construction rejects empty filters
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_has_the_expected_families() {
        assert_eq!(available_wavelets(), vec!["db2", "db4", "db8", "haar"]);
    }

    #[test]
    fn haar_mirror_filter_is_the_signed_reversal() {
        let haar = WaveletFilterPair::haar();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(haar.lowpass(), &[s, s]);
        assert_eq!(haar.highpass(), &[s, -s]);
    }

    #[test]
    fn db4_satisfies_the_orthogonality_identities() {
        let db4 = WaveletFilterPair::db4();
        assert_eq!(db4.len(), 8);
        let h = db4.lowpass();
        let g = db4.highpass();
        let norm: f64 = h.iter().map(|c| c * c).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        // Lowpass and highpass are orthogonal at every even shift.
        for shift in (0..8).step_by(2) {
            let cross: f64 = (0..8 - shift).map(|i| h[i] * g[i + shift]).sum();
            assert!(cross.abs() < 1e-12, "cross-correlation {cross} at shift {shift}");
        }
    }

    #[test]
    fn all_builtin_families_load() {
        for name in available_wavelets() {
            let pair = WaveletFilterPair::by_name(&name).unwrap();
            assert_eq!(pair.name(), name);
            assert_eq!(pair.len() % 2, 0);
        }
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        let err = WaveletFilterPair::by_name("sym9").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sym9") && msg.contains("db4"), "{msg}");
    }

    #[test]
    fn non_orthogonal_filters_are_rejected() {
        // Right norm, wrong sum.
        assert!(WaveletFilterPair::from_lowpass("bad", vec![1.0, 0.0]).is_err());
        // Right sum, wrong norm.
        let s = std::f64::consts::SQRT_2 / 2.0;
        assert!(WaveletFilterPair::from_lowpass("bad", vec![s * 0.5, s * 1.5]).is_err());
        // Odd tap count.
        assert!(WaveletFilterPair::from_lowpass("bad", vec![1.0, 0.5, -0.1]).is_err());
        // Correlated at shift 2: h = [a, b, a, b] with 2(a^2+b^2)=1, sum=sqrt2.
        let a = 0.6533;
        let b = 0.2706;
        assert!(WaveletFilterPair::from_lowpass("bad", vec![a, b, a, b]).is_err());
    }

    #[test]
    fn user_tables_override_nothing_until_instantiated() {
        let table = parse_wavelet_table("[flat]\nlowpass = [0.7071067811865476, 0.7071067811865476]\n").unwrap();
        let pair = WaveletFilterPair::from_table("flat", &table).unwrap();
        assert_eq!(pair.name(), "flat");
        assert_eq!(pair.len(), 2);
    }
}
