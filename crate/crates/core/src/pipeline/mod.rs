//! End-to-end orchestration. Every stage writes its outputs into the
//! run's output directory and reads its inputs back from there, so a
//! one-shot `run` and the same stages invoked one at a time produce
//! byte-identical artifacts.
//!
//! Intermediate files are stamped with a manifest hash derived from the
//! configuration. A stage fed an artifact produced under different
//! settings fails with a mismatch error instead of computing nonsense.

pub mod config;
mod svg;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dwt::{parse_wavelet_table, DwtError, WaveletFilterPair};
use crate::features::{self, FeatureError, FeatureVector, LabeledDataset, ScalingParams};
use crate::knn::{self, KnnError, KnnModel};
use crate::metrics::{ConfusionMatrix, EvalReport};
use crate::rnn::{self, FeatureSequence, RnnError, RnnParameters};
use crate::signal_io::{self, ColumnSchema, EmotionLabel, LabelSource, SignalIoError};
use crate::sub_seed;

pub use config::{load_config, manifest_hash, PipelineConfig, Protocol};
pub use svg::{comparison_chart, ComparisonRow};

pub const FEATURES_CSV: &str = "features.csv";
pub const KNN_MODEL_JSON: &str = "knn_model.json";
pub const RNN_MODEL_JSON: &str = "rnn_model.json";
pub const RNN_LOSS_CSV: &str = "rnn_loss.csv";
pub const KNN_REPORT_JSON: &str = "knn_report.json";
pub const RNN_REPORT_JSON: &str = "rnn_report.json";
pub const CONFUSION_KNN_CSV: &str = "confusion_knn.csv";
pub const CONFUSION_RNN_CSV: &str = "confusion_rnn.csv";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_SVG: &str = "comparison.svg";
pub const RUN_MANIFEST_JSON: &str = "run_manifest.json";

/// Outer fold count of the fivefold protocol.
const FIVEFOLD: usize = 5;

const HASH_PREFIX: &str = "# manifest_hash=";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    SignalIo(#[from] SignalIoError),
    #[error(transparent)]
    Dwt(#[from] DwtError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Rnn(#[from] RnnError),
    #[error("{artifact} was produced under a different configuration (hash {found}, current config is {expected})")]
    StageMismatch {
        artifact: String,
        expected: String,
        found: String,
    },
    #[error("missing artifact {path}; run the earlier stages first")]
    MissingArtifact { path: String },
    #[error("{path}: {reason}")]
    MalformedArtifact { path: String, reason: String },
}

/// Where a run writes, plus a registry of the files created so far so a
/// failed run can remove its partial outputs.
pub struct OutputContext {
    out_dir: PathBuf,
    created: RefCell<Vec<PathBuf>>,
}

impl OutputContext {
    pub fn new(out_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir).map_err(|source| PipelineError::Io {
            path: out_dir.display().to_string(),
            source,
        })?;
        Ok(OutputContext {
            out_dir,
            created: RefCell::new(Vec::new()),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let path = self.path(name);
        // Register before writing so an interrupted write is cleaned too.
        self.created.borrow_mut().push(path.clone());
        fs::write(&path, bytes).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }

    /// Removes every file created through this context. Only called on
    /// failure; missing files are ignored.
    pub fn cleanup_created(&self) {
        for path in self.created.borrow_mut().drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

fn with_cleanup<T>(
    ctx: &OutputContext,
    f: impl FnOnce() -> Result<T, PipelineError>,
) -> Result<T, PipelineError> {
    match f() {
        Ok(v) => Ok(v),
        Err(e) => {
            ctx.cleanup_created();
            Err(e)
        }
    }
}

fn read_artifact_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            PipelineError::MissingArtifact {
                path: path.display().to_string(),
            }
        } else {
            PipelineError::Io {
                path: path.display().to_string(),
                source,
            }
        }
    })
}

fn malformed(path: &Path, reason: impl Into<String>) -> PipelineError {
    PipelineError::MalformedArtifact {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn stage_mismatch(artifact: &str, expected: &str, found: &str) -> PipelineError {
    // Shortened digests keep the one-line message readable.
    let clip = |h: &str| h.chars().take(12).collect::<String>();
    PipelineError::StageMismatch {
        artifact: artifact.to_string(),
        expected: clip(expected),
        found: clip(found),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = read_artifact_text(path)?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

fn write_json<T: Serialize>(
    ctx: &OutputContext,
    name: &str,
    value: &T,
) -> Result<PathBuf, PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    ctx.write(name, text.as_bytes())
}

/// One feature vector with its provenance and split assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub source_id: u32,
    pub session: u32,
    pub offset: usize,
    /// "train"/"test" under the session protocol, "fold0".."fold4"
    /// under fivefold.
    pub split: String,
    pub values: Vec<f64>,
    pub label: EmotionLabel,
}

/// The features artifact: rows grouped by recording, offsets ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub hash: String,
    pub rows: Vec<FeatureRow>,
}

fn resolve_filters(cfg: &PipelineConfig) -> Result<WaveletFilterPair, PipelineError> {
    match &cfg.dwt.wavelet_table {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let table = parse_wavelet_table(&text)?;
            Ok(WaveletFilterPair::from_table(&cfg.dwt.wavelet, &table)?)
        }
        None => Ok(WaveletFilterPair::by_name(&cfg.dwt.wavelet)?),
    }
}

/// Loads every recording, windows it, runs the wavelet feature extractor,
/// and tags each row with its split. Values are raw (unstandardized);
/// scaling happens at training time and is stored with each model.
pub fn compute_features(cfg: &PipelineConfig) -> Result<FeatureTable, PipelineError> {
    let channels = cfg.parsed_channels()?;
    let filters = resolve_filters(cfg)?;

    let mut segments = Vec::new();
    for (idx, entry) in cfg.data.recordings.iter().enumerate() {
        let entry_label = entry.parsed_label()?;
        let label_source = match (&cfg.data.label_column, entry_label) {
            (Some(col), _) => LabelSource::Column(col.clone()),
            (None, Some(label)) => LabelSource::FileWide(label),
            (None, None) => {
                return Err(PipelineError::Config(format!(
                    "recording {} has no label source",
                    entry.path.display()
                )))
            }
        };
        let schema = ColumnSchema {
            timestamp_column: cfg.data.timestamp_column.clone(),
            channel_columns: channels
                .iter()
                .copied()
                .zip(cfg.data.channels.iter().cloned())
                .collect(),
            label: label_source,
            sampling_rate_hz: cfg.data.sampling_rate_hz,
            session_id: entry.session,
            source_id: idx as u32,
        };
        let recording = signal_io::load_recording(&entry.path, &schema)?;
        if let Some(expected) = entry_label {
            if recording.label != expected {
                return Err(PipelineError::Config(format!(
                    "{}: label column says {} but the config entry says {}",
                    entry.path.display(),
                    recording.label,
                    expected
                )));
            }
        }
        segments.extend(signal_io::segment_recording(
            &recording,
            cfg.data.window_length,
            cfg.data.overlap,
        )?);
    }

    let mut rows = Vec::with_capacity(segments.len());
    for seg in &segments {
        let fv = features::segment_features(
            seg,
            &filters,
            cfg.dwt.levels,
            cfg.dwt.mode,
            cfg.dwt.band_policy,
        )?;
        rows.push(FeatureRow {
            source_id: seg.source_id,
            session: seg.source_session,
            offset: seg.offset,
            split: String::new(),
            values: fv.values,
            label: fv.label,
        });
    }

    match cfg.eval.protocol {
        Protocol::Session => {
            let split = signal_io::split_by_session(segments)?;
            let test_keys: BTreeSet<(u32, usize)> =
                split.test.iter().map(|s| (s.source_id, s.offset)).collect();
            for row in &mut rows {
                let tag = if test_keys.contains(&(row.source_id, row.offset)) {
                    "test"
                } else {
                    "train"
                };
                row.split = tag.to_string();
            }
        }
        Protocol::Fivefold => {
            let labels: Vec<EmotionLabel> = rows.iter().map(|r| r.label).collect();
            let assignment = knn::fold_assignment(
                &labels,
                FIVEFOLD,
                sub_seed(cfg.eval.seed, "fivefold-split"),
            );
            for (row, fold) in rows.iter_mut().zip(assignment) {
                row.split = format!("fold{fold}");
            }
        }
    }

    Ok(FeatureTable {
        hash: manifest_hash(cfg),
        rows,
    })
}

fn render_features_csv(table: &FeatureTable) -> String {
    let dim = table.rows.first().map_or(0, |r| r.values.len());
    let mut s = format!("{HASH_PREFIX}{}\n", table.hash);
    s.push_str("source,session,offset,split");
    for i in 0..dim {
        s.push_str(&format!(",f{i}"));
    }
    s.push_str(",label\n");
    for row in &table.rows {
        s.push_str(&format!(
            "{},{},{},{}",
            row.source_id, row.session, row.offset, row.split
        ));
        for v in &row.values {
            s.push(',');
            s.push_str(&format!("{v}"));
        }
        s.push(',');
        s.push_str(row.label.name());
        s.push('\n');
    }
    s
}

/// Reads a features artifact back, optionally insisting on a hash.
pub fn read_features_csv(
    path: &Path,
    expected_hash: Option<&str>,
) -> Result<FeatureTable, PipelineError> {
    let text = read_artifact_text(path)?;
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| malformed(path, "empty file"))?;
    let hash = first
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| malformed(path, "missing manifest hash line"))?
        .to_string();
    if let Some(expected) = expected_hash {
        if expected != hash {
            return Err(stage_mismatch(FEATURES_CSV, expected, &hash));
        }
    }

    let header = lines.next().ok_or_else(|| malformed(path, "missing header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 6
        || cols[..4] != ["source", "session", "offset", "split"]
        || *cols.last().unwrap() != "label"
    {
        return Err(malformed(path, "unexpected header"));
    }
    let dim = cols.len() - 5;

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row_err = |what: &str| malformed(path, format!("data row {}: {what}", i + 1));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 5 {
            return Err(row_err(&format!(
                "expected {} fields, found {}",
                dim + 5,
                fields.len()
            )));
        }
        let source_id: u32 = fields[0].parse().map_err(|_| row_err("bad source id"))?;
        let session: u32 = fields[1].parse().map_err(|_| row_err("bad session"))?;
        let offset: usize = fields[2].parse().map_err(|_| row_err("bad offset"))?;
        let split = fields[3].to_string();
        let mut values = Vec::with_capacity(dim);
        for f in &fields[4..4 + dim] {
            values.push(f.parse::<f64>().map_err(|_| row_err("bad feature value"))?);
        }
        let label: EmotionLabel = fields[dim + 4]
            .parse()
            .map_err(|_| row_err("bad label"))?;
        rows.push(FeatureRow {
            source_id,
            session,
            offset,
            split,
            values,
            label,
        });
    }
    Ok(FeatureTable { hash, rows })
}

/// Stage 1: extract features and write `features.csv`.
pub fn stage_features(
    cfg: &PipelineConfig,
    ctx: &OutputContext,
) -> Result<PathBuf, PipelineError> {
    with_cleanup(ctx, || {
        let table = compute_features(cfg)?;
        ctx.write(FEATURES_CSV, render_features_csv(&table).as_bytes())
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvScore {
    pub k: usize,
    pub accuracy: f64,
}

/// One trained nearest-neighbour model plus the scaling that maps raw
/// feature rows into its space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnUnit {
    pub chosen_k: usize,
    pub cv_scores: Vec<CvScore>,
    pub scaling: Option<ScalingParams>,
    pub model: KnnModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectUnit {
    pub subject: String,
    pub unit: KnnUnit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnnVariant {
    Session { unit: KnnUnit },
    PerSubject { units: Vec<SubjectUnit> },
    Fivefold { folds: Vec<KnnUnit> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModelFile {
    pub manifest_hash: String,
    pub variant: KnnVariant,
}

fn rows_to_vectors(
    rows: &[&FeatureRow],
    channels: &[crate::signal_io::Channel],
) -> Vec<FeatureVector> {
    rows.iter()
        .map(|r| FeatureVector {
            values: r.values.clone(),
            label: r.label,
            channel_order: channels.to_vec(),
        })
        .collect()
}

fn build_knn_unit(
    cfg: &PipelineConfig,
    channels: &[crate::signal_io::Channel],
    rows: &[&FeatureRow],
    seed_name: &str,
) -> Result<KnnUnit, PipelineError> {
    let raw = rows_to_vectors(rows, channels);
    let (train, scaling) = if cfg.features.standardize {
        let (train, _, params) = features::standardize(&raw, &[])?;
        (train, Some(params))
    } else {
        (raw, None)
    };
    let dataset = LabeledDataset::from_vectors(train)?;
    let (chosen_k, scores) = knn::select_k(
        &dataset,
        &cfg.knn.candidates,
        cfg.knn.minkowski_c,
        cfg.knn.folds,
        sub_seed(cfg.eval.seed, seed_name),
    )?;
    let model = KnnModel::new(dataset, chosen_k, cfg.knn.minkowski_c)?;
    Ok(KnnUnit {
        chosen_k,
        cv_scores: scores
            .into_iter()
            .map(|(k, accuracy)| CvScore { k, accuracy })
            .collect(),
        scaling,
        model,
    })
}

/// Stage 2a: pick k by cross-validation, fit, write `knn_model.json`.
pub fn stage_train_knn(
    cfg: &PipelineConfig,
    ctx: &OutputContext,
) -> Result<PathBuf, PipelineError> {
    with_cleanup(ctx, || {
        let hash = manifest_hash(cfg);
        let table = read_features_csv(&ctx.path(FEATURES_CSV), Some(&hash))?;
        let channels = cfg.parsed_channels()?;

        let variant = match cfg.eval.protocol {
            Protocol::Session if cfg.knn.per_subject => {
                let mut by_subject: BTreeMap<String, Vec<&FeatureRow>> = BTreeMap::new();
                for row in table.rows.iter().filter(|r| r.split == "train") {
                    by_subject
                        .entry(cfg.subject_of(row.source_id))
                        .or_default()
                        .push(row);
                }
                let mut units = Vec::new();
                for (subject, rows) in by_subject {
                    let unit =
                        build_knn_unit(cfg, &channels, &rows, &format!("knn-cv-{subject}"))?;
                    units.push(SubjectUnit { subject, unit });
                }
                KnnVariant::PerSubject { units }
            }
            Protocol::Session => {
                let rows: Vec<&FeatureRow> =
                    table.rows.iter().filter(|r| r.split == "train").collect();
                KnnVariant::Session {
                    unit: build_knn_unit(cfg, &channels, &rows, "knn-cv")?,
                }
            }
            Protocol::Fivefold => {
                let mut folds = Vec::with_capacity(FIVEFOLD);
                for i in 0..FIVEFOLD {
                    let held_out = format!("fold{i}");
                    let rows: Vec<&FeatureRow> = table
                        .rows
                        .iter()
                        .filter(|r| r.split != held_out)
                        .collect();
                    folds.push(build_knn_unit(
                        cfg,
                        &channels,
                        &rows,
                        &format!("knn-cv-fold{i}"),
                    )?);
                }
                KnnVariant::Fivefold { folds }
            }
        };
        write_json(
            ctx,
            KNN_MODEL_JSON,
            &KnnModelFile {
                manifest_hash: hash,
                variant,
            },
        )
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnUnit {
    pub scaling: Option<ScalingParams>,
    pub params: RnnParameters,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RnnVariant {
    Single { unit: RnnUnit },
    Fivefold { folds: Vec<RnnUnit> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnModelFile {
    pub manifest_hash: String,
    pub sequence_length: usize,
    pub variant: RnnVariant,
}

/// Groups rows into per-recording runs and cuts each run into
/// non-overlapping sequences of `t` consecutive windows; a trailing
/// partial chunk is dropped. Rows must already be grouped by source,
/// which the features artifact guarantees.
fn sequences_from_rows(rows: &[&FeatureRow], t: usize) -> Vec<FeatureSequence> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].source_id == rows[i].source_id {
            j += 1;
        }
        for chunk in rows[i..j].chunks(t) {
            if chunk.len() == t {
                out.push(FeatureSequence {
                    steps: chunk.iter().map(|r| r.values.clone()).collect(),
                    label: chunk[0].label,
                });
            }
        }
        i = j;
    }
    out
}

fn scale_sequences(
    seqs: &[FeatureSequence],
    scaling: Option<&ScalingParams>,
) -> Vec<FeatureSequence> {
    seqs.iter()
        .map(|s| {
            let mut c = s.clone();
            if let Some(p) = scaling {
                for step in &mut c.steps {
                    p.apply(step);
                }
            }
            c
        })
        .collect()
}

/// Scaling parameters from a set of step vectors (population moments),
/// or None when standardization is off.
fn sequence_scaling(
    cfg: &PipelineConfig,
    channels: &[crate::signal_io::Channel],
    seqs: &[FeatureSequence],
) -> Result<Option<ScalingParams>, PipelineError> {
    if !cfg.features.standardize {
        return Ok(None);
    }
    let flat: Vec<FeatureVector> = seqs
        .iter()
        .flat_map(|s| {
            s.steps.iter().map(|step| FeatureVector {
                values: step.clone(),
                label: s.label,
                channel_order: channels.to_vec(),
            })
        })
        .collect();
    let (_, _, params) = features::standardize(&flat, &[])?;
    Ok(Some(params))
}

fn rnn_settings_with_seed(cfg: &PipelineConfig, seed_name: &str) -> rnn::RnnConfig {
    rnn::RnnConfig {
        hidden_size: cfg.rnn.hidden_size,
        learning_rate: cfg.rnn.learning_rate,
        epochs: cfg.rnn.epochs,
        batch_size: cfg.rnn.batch_size,
        grad_clip: cfg.rnn.grad_clip,
        seed: sub_seed(cfg.eval.seed, seed_name),
    }
}

/// Stage 2b: train the recurrent classifier, write `rnn_model.json` and
/// the per-epoch loss curve `rnn_loss.csv`.
pub fn stage_train_rnn(
    cfg: &PipelineConfig,
    ctx: &OutputContext,
) -> Result<PathBuf, PipelineError> {
    with_cleanup(ctx, || {
        let hash = manifest_hash(cfg);
        let table = read_features_csv(&ctx.path(FEATURES_CSV), Some(&hash))?;
        let channels = cfg.parsed_channels()?;
        let t = cfg.rnn.sequence_length;

        let mut loss_csv = String::from("fold,epoch,mean_loss\n");
        let variant = match cfg.eval.protocol {
            Protocol::Session => {
                let train_rows: Vec<&FeatureRow> =
                    table.rows.iter().filter(|r| r.split == "train").collect();
                // Scaling comes from all train rows, matching the kNN
                // unit, not only the rows that land in full sequences.
                let scaling = if cfg.features.standardize {
                    let raw = rows_to_vectors(&train_rows, &channels);
                    let (_, _, params) = features::standardize(&raw, &[])?;
                    Some(params)
                } else {
                    None
                };
                let seqs = sequences_from_rows(&train_rows, t);
                let scaled = scale_sequences(&seqs, scaling.as_ref());
                let settings = rnn_settings_with_seed(cfg, "rnn-train");
                let (params, history) = rnn::train(&scaled, &settings)?;
                for (epoch, loss) in history.iter().enumerate() {
                    loss_csv.push_str(&format!("0,{epoch},{loss}\n"));
                }
                RnnVariant::Single {
                    unit: RnnUnit { scaling, params },
                }
            }
            Protocol::Fivefold => {
                let all_rows: Vec<&FeatureRow> = table.rows.iter().collect();
                let seqs = sequences_from_rows(&all_rows, t);
                let labels: Vec<EmotionLabel> = seqs.iter().map(|s| s.label).collect();
                let assignment =
                    knn::fold_assignment(&labels, FIVEFOLD, sub_seed(cfg.eval.seed, "rnn-folds"));
                let mut folds = Vec::with_capacity(FIVEFOLD);
                for i in 0..FIVEFOLD {
                    let train: Vec<FeatureSequence> = seqs
                        .iter()
                        .zip(&assignment)
                        .filter(|(_, &a)| a != i)
                        .map(|(s, _)| s.clone())
                        .collect();
                    let scaling = sequence_scaling(cfg, &channels, &train)?;
                    let scaled = scale_sequences(&train, scaling.as_ref());
                    let settings = rnn_settings_with_seed(cfg, &format!("rnn-train-fold{i}"));
                    let (params, history) = rnn::train(&scaled, &settings)?;
                    for (epoch, loss) in history.iter().enumerate() {
                        loss_csv.push_str(&format!("{i},{epoch},{loss}\n"));
                    }
                    folds.push(RnnUnit { scaling, params });
                }
                RnnVariant::Fivefold { folds }
            }
        };

        ctx.write(RNN_LOSS_CSV, loss_csv.as_bytes())?;
        write_json(
            ctx,
            RNN_MODEL_JSON,
            &RnnModelFile {
                manifest_hash: hash,
                sequence_length: t,
                variant,
            },
        )
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectK {
    pub subject: String,
    pub chosen_k: usize,
}

/// Evaluation artifact for one classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub manifest_hash: String,
    pub classifier: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_chosen_ks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_chosen_ks: Option<Vec<SubjectK>>,
    pub report: EvalReport,
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub knn: ReportFile,
    pub rnn: ReportFile,
}

fn classify_rows(
    unit: &KnnUnit,
    rows: &[&FeatureRow],
    cm: &mut ConfusionMatrix,
) -> Result<(), PipelineError> {
    for row in rows {
        let mut query = row.values.clone();
        if let Some(s) = &unit.scaling {
            s.apply(&mut query);
        }
        let (pred, _) = unit.model.classify(&query)?;
        cm.record(row.label, pred);
    }
    Ok(())
}

fn predict_sequences(
    unit: &RnnUnit,
    seqs: &[FeatureSequence],
    cm: &mut ConfusionMatrix,
) -> Result<(), PipelineError> {
    for seq in scale_sequences(seqs, unit.scaling.as_ref()) {
        let pred = rnn::predict(&unit.params, &seq)?;
        cm.record(seq.label, pred);
    }
    Ok(())
}

/// Stage 3: score both models, write the reports, confusion tables, and
/// the comparison CSV consumed by the plot stage.
pub fn stage_evaluate(
    cfg: &PipelineConfig,
    ctx: &OutputContext,
) -> Result<EvalOutcome, PipelineError> {
    with_cleanup(ctx, || {
        let hash = manifest_hash(cfg);
        let table = read_features_csv(&ctx.path(FEATURES_CSV), Some(&hash))?;

        let knn_path = ctx.path(KNN_MODEL_JSON);
        let knn_file: KnnModelFile = read_json(&knn_path)?;
        if knn_file.manifest_hash != hash {
            return Err(stage_mismatch(KNN_MODEL_JSON, &hash, &knn_file.manifest_hash));
        }
        let rnn_path = ctx.path(RNN_MODEL_JSON);
        let rnn_file: RnnModelFile = read_json(&rnn_path)?;
        if rnn_file.manifest_hash != hash {
            return Err(stage_mismatch(RNN_MODEL_JSON, &hash, &rnn_file.manifest_hash));
        }
        let t = rnn_file.sequence_length;

        let mut knn_cm = ConfusionMatrix::new();
        let mut chosen_k = None;
        let mut fold_chosen_ks = None;
        let mut subject_chosen_ks = None;
        match (&cfg.eval.protocol, &knn_file.variant) {
            (Protocol::Session, KnnVariant::Session { unit }) => {
                let rows: Vec<&FeatureRow> =
                    table.rows.iter().filter(|r| r.split == "test").collect();
                classify_rows(unit, &rows, &mut knn_cm)?;
                chosen_k = Some(unit.chosen_k);
            }
            (Protocol::Session, KnnVariant::PerSubject { units }) => {
                let mut by_subject: BTreeMap<String, Vec<&FeatureRow>> = BTreeMap::new();
                for row in table.rows.iter().filter(|r| r.split == "test") {
                    by_subject
                        .entry(cfg.subject_of(row.source_id))
                        .or_default()
                        .push(row);
                }
                let mut ks = Vec::new();
                for (subject, rows) in by_subject {
                    let unit = units
                        .iter()
                        .find(|u| u.subject == subject)
                        .map(|u| &u.unit)
                        .ok_or_else(|| {
                            PipelineError::Config(format!(
                                "subject {subject} appears only in the test split"
                            ))
                        })?;
                    classify_rows(unit, &rows, &mut knn_cm)?;
                    ks.push(SubjectK {
                        subject,
                        chosen_k: unit.chosen_k,
                    });
                }
                subject_chosen_ks = Some(ks);
            }
            (Protocol::Fivefold, KnnVariant::Fivefold { folds }) => {
                let mut ks = Vec::new();
                for (i, unit) in folds.iter().enumerate() {
                    let held_out = format!("fold{i}");
                    let rows: Vec<&FeatureRow> = table
                        .rows
                        .iter()
                        .filter(|r| r.split == held_out)
                        .collect();
                    classify_rows(unit, &rows, &mut knn_cm)?;
                    ks.push(unit.chosen_k);
                }
                fold_chosen_ks = Some(ks);
            }
            _ => {
                return Err(malformed(
                    &knn_path,
                    format!(
                        "model kind does not match the {} protocol",
                        cfg.eval.protocol.name()
                    ),
                ))
            }
        }

        let mut rnn_cm = ConfusionMatrix::new();
        match (&cfg.eval.protocol, &rnn_file.variant) {
            (Protocol::Session, RnnVariant::Single { unit }) => {
                let rows: Vec<&FeatureRow> =
                    table.rows.iter().filter(|r| r.split == "test").collect();
                let seqs = sequences_from_rows(&rows, t);
                predict_sequences(unit, &seqs, &mut rnn_cm)?;
            }
            (Protocol::Fivefold, RnnVariant::Fivefold { folds }) => {
                let all_rows: Vec<&FeatureRow> = table.rows.iter().collect();
                let seqs = sequences_from_rows(&all_rows, t);
                let labels: Vec<EmotionLabel> = seqs.iter().map(|s| s.label).collect();
                // Same derived seed as training, so the folds line up.
                let assignment =
                    knn::fold_assignment(&labels, FIVEFOLD, sub_seed(cfg.eval.seed, "rnn-folds"));
                for (i, unit) in folds.iter().enumerate() {
                    let held_out: Vec<FeatureSequence> = seqs
                        .iter()
                        .zip(&assignment)
                        .filter(|(_, &a)| a == i)
                        .map(|(s, _)| s.clone())
                        .collect();
                    predict_sequences(unit, &held_out, &mut rnn_cm)?;
                }
            }
            _ => {
                return Err(malformed(
                    &rnn_path,
                    format!(
                        "model kind does not match the {} protocol",
                        cfg.eval.protocol.name()
                    ),
                ))
            }
        }

        let knn_report = ReportFile {
            manifest_hash: hash.clone(),
            classifier: "knn".to_string(),
            chosen_k,
            fold_chosen_ks,
            subject_chosen_ks,
            report: EvalReport::from_confusion(knn_cm),
        };
        let rnn_report = ReportFile {
            manifest_hash: hash.clone(),
            classifier: "rnn".to_string(),
            chosen_k: None,
            fold_chosen_ks: None,
            subject_chosen_ks: None,
            report: EvalReport::from_confusion(rnn_cm),
        };

        write_json(ctx, KNN_REPORT_JSON, &knn_report)?;
        write_json(ctx, RNN_REPORT_JSON, &rnn_report)?;
        ctx.write(CONFUSION_KNN_CSV, knn_report.report.confusion.csv_string().as_bytes())?;
        ctx.write(CONFUSION_RNN_CSV, rnn_report.report.confusion.csv_string().as_bytes())?;

        let mut comparison = format!("{HASH_PREFIX}{hash}\n");
        comparison.push_str("classifier,accuracy,specificity,sensitivity\n");
        for file in [&knn_report, &rnn_report] {
            let r = &file.report;
            comparison.push_str(&format!(
                "{},{},{},{}\n",
                file.classifier,
                r.overall_accuracy.value,
                r.macro_specificity,
                r.macro_sensitivity
            ));
        }
        ctx.write(COMPARISON_CSV, comparison.as_bytes())?;

        Ok(EvalOutcome {
            knn: knn_report,
            rnn: rnn_report,
        })
    })
}

pub struct ComparisonFile {
    pub hash: Option<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Parses a comparison CSV. The manifest hash line is optional so
/// hand-written tables can be plotted.
pub fn read_comparison_csv(path: &Path) -> Result<ComparisonFile, PipelineError> {
    let text = read_artifact_text(path)?;
    let mut hash = None;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in text.lines() {
        if let Some(h) = line.strip_prefix(HASH_PREFIX) {
            hash = Some(h.trim().to_string());
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            let normalized: Vec<&str> = line.split(',').map(str::trim).collect();
            if normalized != ["classifier", "accuracy", "specificity", "sensitivity"] {
                return Err(malformed(path, "unexpected header"));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(malformed(path, format!("expected 4 fields, found {}", fields.len())));
        }
        let value = |i: usize| -> Result<f64, PipelineError> {
            fields[i]
                .parse()
                .map_err(|_| malformed(path, format!("bad number {:?}", fields[i])))
        };
        rows.push(ComparisonRow {
            classifier: fields[0].to_string(),
            accuracy: value(1)?,
            specificity: value(2)?,
            sensitivity: value(3)?,
        });
    }
    if !header_seen {
        return Err(malformed(path, "missing header"));
    }
    Ok(ComparisonFile { hash, rows })
}

/// Stage 4: render `comparison.csv` from the output directory to SVG,
/// refusing a table stamped by a different configuration.
pub fn stage_plot(cfg: &PipelineConfig, ctx: &OutputContext) -> Result<PathBuf, PipelineError> {
    with_cleanup(ctx, || {
        let parsed = read_comparison_csv(&ctx.path(COMPARISON_CSV))?;
        if let Some(found) = &parsed.hash {
            let expected = manifest_hash(cfg);
            if *found != expected {
                return Err(stage_mismatch(COMPARISON_CSV, &expected, found));
            }
        }
        ctx.write(COMPARISON_SVG, comparison_chart(&parsed.rows).as_bytes())
    })
}

/// Plot an arbitrary comparison CSV to an arbitrary SVG path, no hash
/// check and no output registry.
pub fn render_plot(input: &Path, output: &Path) -> Result<(), PipelineError> {
    let parsed = read_comparison_csv(input)?;
    fs::write(output, comparison_chart(&parsed.rows)).map_err(|source| PipelineError::Io {
        path: output.display().to_string(),
        source,
    })
}

/// Macro scores echoed into the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryBlock {
    pub overall_accuracy: f64,
    pub macro_accuracy: f64,
    pub macro_specificity: f64,
    pub macro_sensitivity: f64,
    pub macro_recall: f64,
}

impl SummaryBlock {
    fn from_report(report: &EvalReport) -> Self {
        SummaryBlock {
            overall_accuracy: report.overall_accuracy.value,
            macro_accuracy: report.macro_accuracy,
            macro_specificity: report.macro_specificity,
            macro_sensitivity: report.macro_sensitivity,
            macro_recall: report.macro_recall,
        }
    }
}

/// The run record: configuration echo, achieved scores, and timing.
/// The only artifact that is not byte-reproducible (wall time).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_hash: String,
    pub crate_version: String,
    pub seed: u64,
    pub protocol: Protocol,
    pub wall_time_seconds: f64,
    pub knn: SummaryBlock,
    pub rnn: SummaryBlock,
    pub config: PipelineConfig,
}

pub struct RunSummary {
    pub outcome: EvalOutcome,
    pub manifest: RunManifest,
}

/// All stages in order, plus `run_manifest.json`. Composes the stage
/// functions as-is (each re-reads its inputs from the output directory),
/// which is what makes one-shot and staged invocations byte-identical.
pub fn run(cfg: &PipelineConfig, ctx: &OutputContext) -> Result<RunSummary, PipelineError> {
    with_cleanup(ctx, || {
        let started = Instant::now();
        stage_features(cfg, ctx)?;
        stage_train_knn(cfg, ctx)?;
        stage_train_rnn(cfg, ctx)?;
        let outcome = stage_evaluate(cfg, ctx)?;
        stage_plot(cfg, ctx)?;

        let manifest = RunManifest {
            manifest_hash: manifest_hash(cfg),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.eval.seed,
            protocol: cfg.eval.protocol,
            wall_time_seconds: started.elapsed().as_secs_f64(),
            knn: SummaryBlock::from_report(&outcome.knn.report),
            rnn: SummaryBlock::from_report(&outcome.rnn.report),
            config: cfg.clone(),
        };
        write_json(ctx, RUN_MANIFEST_JSON, &manifest)?;
        Ok(RunSummary { outcome, manifest })
    })
}
