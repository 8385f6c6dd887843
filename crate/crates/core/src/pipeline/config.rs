//! Run configuration: TOML schema, validation, and the manifest hash
//! that ties intermediate artifacts to the settings that produced them.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dwt::ExtensionMode;
use crate::features::BandPolicy;
use crate::signal_io::{Channel, EmotionLabel};

use super::PipelineError;

/// One input CSV plus the metadata the file itself does not carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingEntry {
    pub path: PathBuf,
    /// Class name, any casing. Optional when `label_column` is set; if
    /// both are present the column is authoritative and this must agree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// 1-based chronological ordinal within this recording's label.
    pub session: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

impl RecordingEntry {
    pub fn parsed_label(&self) -> Result<Option<EmotionLabel>, PipelineError> {
        match &self.label {
            None => Ok(None),
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|_| PipelineError::Config(format!("unknown label {text:?}"))),
        }
    }
}

fn default_channels() -> Vec<String> {
    Channel::ALL.iter().map(|c| c.name().to_string()).collect()
}

fn default_sampling_rate() -> f64 {
    256.0
}

fn default_timestamp_column() -> Option<String> {
    Some("timestamp".to_string())
}

fn default_window_length() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub recordings: Vec<RecordingEntry>,
    /// Channel column names, in storage order.
    #[serde(default = "default_channels")]
    pub channels: Vec<String>,
    #[serde(default = "default_sampling_rate")]
    pub sampling_rate_hz: f64,
    #[serde(default = "default_timestamp_column", skip_serializing_if = "Option::is_none")]
    pub timestamp_column: Option<String>,
    /// When set, labels come from this CSV column instead of the entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default = "default_window_length")]
    pub window_length: usize,
    /// Fraction of a window shared with its successor, in [0, 1).
    #[serde(default)]
    pub overlap: f64,
}

fn default_wavelet() -> String {
    "db4".to_string()
}

fn default_levels() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwtConfig {
    #[serde(default = "default_wavelet")]
    pub wavelet: String,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub mode: ExtensionMode,
    #[serde(default)]
    pub band_policy: BandPolicy,
    /// Optional TOML file of extra analysis lowpass filters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelet_table: Option<PathBuf>,
}

impl Default for DwtConfig {
    fn default() -> Self {
        DwtConfig {
            wavelet: default_wavelet(),
            levels: default_levels(),
            mode: ExtensionMode::default(),
            band_policy: BandPolicy::default(),
            wavelet_table: None,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Z-score features with train-split moments before either classifier.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig { standardize: true }
    }
}

fn default_candidates() -> Vec<usize> {
    vec![1, 3, 5, 7]
}

fn default_minkowski_c() -> f64 {
    2.0
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnConfig {
    /// k values tried by cross-validation.
    #[serde(default = "default_candidates")]
    pub candidates: Vec<usize>,
    #[serde(default = "default_minkowski_c")]
    pub minkowski_c: f64,
    /// Inner cross-validation folds for picking k.
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Train and score one model per subject, pooling the confusions.
    #[serde(default)]
    pub per_subject: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            candidates: default_candidates(),
            minkowski_c: default_minkowski_c(),
            folds: default_folds(),
            per_subject: false,
        }
    }
}

fn default_hidden_size() -> usize {
    16
}

fn default_learning_rate() -> f64 {
    0.05
}

fn default_epochs() -> usize {
    150
}

fn default_batch_size() -> usize {
    8
}

fn default_grad_clip() -> f64 {
    5.0
}

fn default_sequence_length() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RnnSettings {
    #[serde(default = "default_hidden_size")]
    pub hidden_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_grad_clip")]
    pub grad_clip: f64,
    /// Windows per sequence; trailing partial chunks are dropped.
    #[serde(default = "default_sequence_length")]
    pub sequence_length: usize,
}

impl Default for RnnSettings {
    fn default() -> Self {
        RnnSettings {
            hidden_size: default_hidden_size(),
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            grad_clip: default_grad_clip(),
            sequence_length: default_sequence_length(),
        }
    }
}

/// How train and test sets are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Hold out each label's latest session.
    #[default]
    Session,
    /// Five stratified folds; every sample is scored exactly once.
    Fivefold,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Session => "session",
            Protocol::Fivefold => "fivefold",
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: Protocol::default(),
            seed: 0,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub dwt: DwtConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub knn: KnnConfig,
    #[serde(default)]
    pub rnn: RnnSettings,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn parsed_channels(&self) -> Result<Vec<Channel>, PipelineError> {
        self.data
            .channels
            .iter()
            .map(|name| {
                name.parse()
                    .map_err(|_| PipelineError::Config(format!("unknown channel {name:?}")))
            })
            .collect()
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::Config(msg));

        if self.data.recordings.is_empty() {
            return fail("no recordings configured".into());
        }
        let channels = self.parsed_channels()?;
        let mut seen = BTreeSet::new();
        for ch in &channels {
            if !seen.insert(ch.name()) {
                return fail(format!("channel {} listed twice", ch.name()));
            }
        }
        if !(self.data.sampling_rate_hz > 0.0) {
            return fail("sampling_rate_hz must be positive".into());
        }
        if self.data.window_length < 2 {
            return fail("window_length must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.data.overlap) {
            return fail("overlap must lie in [0, 1)".into());
        }
        for entry in &self.data.recordings {
            entry.parsed_label()?;
            if self.data.label_column.is_none() && entry.label.is_none() {
                return fail(format!(
                    "recording {} has no label and no label_column is set",
                    entry.path.display()
                ));
            }
            if entry.session == 0 {
                return fail(format!(
                    "recording {} has session 0; sessions are numbered from 1",
                    entry.path.display()
                ));
            }
        }
        if self.dwt.levels == 0 {
            return fail("dwt.levels must be at least 1".into());
        }
        if self.knn.candidates.is_empty() {
            return fail("knn.candidates must not be empty".into());
        }
        if self.knn.folds < 2 {
            return fail("knn.folds must be at least 2".into());
        }
        if !(self.knn.minkowski_c.is_finite() && self.knn.minkowski_c >= 1.0) {
            return fail("knn.minkowski_c must be finite and >= 1".into());
        }
        if self.rnn.sequence_length == 0 {
            return fail("rnn.sequence_length must be at least 1".into());
        }
        if self.rnn.hidden_size == 0 || self.rnn.batch_size == 0 {
            return fail("rnn.hidden_size and rnn.batch_size must be at least 1".into());
        }
        if self.knn.per_subject && self.eval.protocol == Protocol::Fivefold {
            return fail("knn.per_subject requires the session protocol".into());
        }
        Ok(())
    }

    /// Subject tag for a recording; entries without one get a per-file tag.
    pub fn subject_of(&self, source_id: u32) -> String {
        self.data
            .recordings
            .get(source_id as usize)
            .and_then(|e| e.subject.clone())
            .unwrap_or_else(|| format!("src{source_id}"))
    }
}

/// Parses `path` and resolves the recording and wavelet-table paths
/// relative to the config file's directory.
pub fn load_config(path: &Path) -> Result<PipelineConfig, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg: PipelineConfig = toml::from_str(&text)
        .map_err(|e| PipelineError::Config(one_line(&e.to_string())))?;

    let base = path.parent().unwrap_or(Path::new("."));
    for entry in &mut cfg.data.recordings {
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
    }
    if let Some(table) = &mut cfg.dwt.wavelet_table {
        if table.is_relative() {
            *table = base.join(&*table);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// toml's parse errors span multiple lines; stderr reporting wants one.
fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Serializes a config, e.g. for writing next to a generated dataset.
pub fn render_config_toml(cfg: &PipelineConfig) -> String {
    toml::to_string_pretty(cfg).expect("config serializes")
}

/// Hex digest identifying what a run computes: the full config except
/// the output directory, plus the crate version. Stamped into every
/// intermediate artifact so mixed-config stage chains fail loudly.
pub fn manifest_hash(cfg: &PipelineConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.eval.output_dir = PathBuf::new();
    let json = serde_json::to_string(&canonical).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hasher.update(b"\n");
    hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
