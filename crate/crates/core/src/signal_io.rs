//! Recording ingest, windowing, and the session-based train/test split.
//!
//! Recordings arrive as CSV files, one per (emotional state, session):
//! a header row, one column per electrode, optionally a timestamp column
//! and a label column. Sampling rate and session ordinal are not stored in
//! the files, so the caller declares them in [`ColumnSchema`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Electrode positions of the four-channel headband montage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    TP9,
    AF7,
    AF8,
    TP10,
}

impl Channel {
    /// All supported channels, in canonical order.
    pub const ALL: [Channel; 4] = [Channel::TP9, Channel::AF7, Channel::AF8, Channel::TP10];

    pub fn name(self) -> &'static str {
        match self {
            Channel::TP9 => "TP9",
            Channel::AF7 => "AF7",
            Channel::AF8 => "AF8",
            Channel::TP10 => "TP10",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = SignalIoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TP9" => Ok(Channel::TP9),
            "AF7" => Ok(Channel::AF7),
            "AF8" => Ok(Channel::AF8),
            "TP10" => Ok(Channel::TP10),
            other => Err(SignalIoError::UnknownChannel(other.to_string())),
        }
    }
}

/// Emotional state label. The discriminants are the class indices used by
/// every classifier and confusion matrix in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmotionLabel {
    Positive = 0,
    Neutral = 1,
    Negative = 2,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 3] = [
        EmotionLabel::Positive,
        EmotionLabel::Neutral,
        EmotionLabel::Negative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<EmotionLabel> {
        match index {
            0 => Some(EmotionLabel::Positive),
            1 => Some(EmotionLabel::Neutral),
            2 => Some(EmotionLabel::Negative),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Positive => "Positive",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Negative => "Negative",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = SignalIoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(EmotionLabel::Positive),
            "neutral" => Ok(EmotionLabel::Neutral),
            "negative" => Ok(EmotionLabel::Negative),
            other => Err(SignalIoError::InvalidLabel(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SignalIoError {
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column:?}: {value:?} is not a finite number")]
    NonNumericSample {
        row: usize,
        column: String,
        value: String,
    },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("unknown channel name {0:?}")]
    UnknownChannel(String),
    #[error("unknown label {0:?} (expected Positive, Neutral, or Negative)")]
    InvalidLabel(String),
    #[error("row {row}: label {found:?} differs from {expected:?} earlier in the file")]
    InconsistentLabel {
        row: usize,
        expected: EmotionLabel,
        found: EmotionLabel,
    },
    #[error("schema lists channel {0} more than once")]
    DuplicateChannel(Channel),
    #[error("schema lists no channels")]
    NoChannels,
    #[error("sampling rate must be positive, got {0}")]
    InvalidSamplingRate(f64),
    #[error("window of {window} samples does not fit a recording of {samples} samples")]
    WindowTooLarge { window: usize, samples: usize },
    #[error("overlap {overlap} leaves no positive stride (must lie in [0, 1) with round(window*(1-overlap)) >= 1)")]
    InvalidOverlap { overlap: f64 },
    #[error("label {label} has {sessions} session(s); the split needs at least two")]
    InsufficientSessions {
        label: EmotionLabel,
        sessions: usize,
    },
    #[error("window length must be positive")]
    ZeroWindow,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Where a recording's label comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LabelSource {
    /// The whole file carries one label, declared out of band.
    FileWide(EmotionLabel),
    /// A column holds the label; it must be constant across the file.
    Column(String),
}

/// How to interpret one recording file: which columns to read plus the
/// metadata the file format does not carry itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSchema {
    /// Ignored during parsing; named so it can be checked for presence.
    pub timestamp_column: Option<String>,
    /// Channel -> CSV column name, in the order channels should be stored.
    pub channel_columns: Vec<(Channel, String)>,
    pub label: LabelSource,
    pub sampling_rate_hz: f64,
    /// 1-based chronological ordinal of this recording within its label.
    pub session_id: u32,
    /// Ordinal identity of this recording among all loaded files.
    pub source_id: u32,
}

/// One fully loaded recording: per-channel sample columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub channels: Vec<Channel>,
    /// samples[ch][i] is sample i of channels[ch].
    pub samples: Vec<Vec<f64>>,
    pub sampling_rate: f64,
    pub session_id: u32,
    pub source_id: u32,
    pub label: EmotionLabel,
}

impl EegRecording {
    /// Validates the cross-field invariants: at least one channel, no
    /// duplicate channels, equal non-zero column lengths, positive rate.
    pub fn new(
        channels: Vec<Channel>,
        samples: Vec<Vec<f64>>,
        sampling_rate: f64,
        session_id: u32,
        source_id: u32,
        label: EmotionLabel,
    ) -> Result<Self, SignalIoError> {
        if channels.is_empty() {
            return Err(SignalIoError::NoChannels);
        }
        for (i, ch) in channels.iter().enumerate() {
            if channels[..i].contains(ch) {
                return Err(SignalIoError::DuplicateChannel(*ch));
            }
        }
        assert_eq!(channels.len(), samples.len(), "one sample column per channel");
        let n = samples[0].len();
        if n == 0 {
            return Err(SignalIoError::EmptyFile);
        }
        for col in &samples {
            if col.len() != n {
                return Err(SignalIoError::RaggedRows {
                    row: col.len().min(n) + 1,
                    expected: n,
                    found: col.len(),
                });
            }
        }
        if !(sampling_rate > 0.0) || !sampling_rate.is_finite() {
            return Err(SignalIoError::InvalidSamplingRate(sampling_rate));
        }
        Ok(EegRecording {
            channels,
            samples,
            sampling_rate,
            session_id,
            source_id,
            label,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples[0].len()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.sample_count() as f64 / self.sampling_rate
    }
}

/// One analysis window cut from a recording. Channel order is inherited
/// from the recording unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub channels: Vec<Channel>,
    /// channel_data[ch] has exactly window_length samples.
    pub channel_data: Vec<Vec<f64>>,
    pub window_length: usize,
    pub sampling_rate: f64,
    pub source_session: u32,
    pub source_id: u32,
    /// Sample offset of the window start within the source recording.
    pub offset: usize,
    pub label: EmotionLabel,
}

/// Session-based holdout: per label, the most recent session is the test
/// set and every earlier session trains.
#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
}

/// Loads one CSV recording according to `schema`.
///
/// The file must be UTF-8, comma-delimited, with a header row naming every
/// schema column. Samples must parse as finite floats; "NaN" and "inf" are
/// rejected like any other non-numeric text. Row numbers in errors are
/// 1-based over data rows (the header is row 0).
pub fn load_recording(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
) -> Result<EegRecording, SignalIoError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    if schema.channel_columns.is_empty() {
        return Err(SignalIoError::NoChannels);
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| SignalIoError::Csv {
            path: path_str.clone(),
            source,
        })?;

    let headers = reader
        .headers()
        .map_err(|source| SignalIoError::Csv {
            path: path_str.clone(),
            source,
        })?
        .clone();
    let find = |name: &str| -> Result<usize, SignalIoError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| SignalIoError::MissingColumn(name.to_string()))
    };

    let channel_idx: Vec<(Channel, usize)> = schema
        .channel_columns
        .iter()
        .map(|(ch, col)| Ok((*ch, find(col)?)))
        .collect::<Result<_, SignalIoError>>()?;
    if let Some(ts) = &schema.timestamp_column {
        find(ts)?;
    }
    let label_idx = match &schema.label {
        LabelSource::Column(col) => Some(find(col)?),
        LabelSource::FileWide(_) => None,
    };

    let width = headers.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channel_idx.len()];
    let mut file_label: Option<EmotionLabel> = None;

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| SignalIoError::Csv {
            path: path_str.clone(),
            source,
        })?;
        if record.len() != width {
            return Err(SignalIoError::RaggedRows {
                row,
                expected: width,
                found: record.len(),
            });
        }
        for (slot, (ch, idx)) in channel_idx.iter().enumerate() {
            let raw = record.get(*idx).unwrap_or("");
            let value: f64 = raw.trim().parse().map_err(|_| SignalIoError::NonNumericSample {
                row,
                column: ch.name().to_string(),
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(SignalIoError::NonNumericSample {
                    row,
                    column: ch.name().to_string(),
                    value: raw.to_string(),
                });
            }
            columns[slot].push(value);
        }
        if let Some(idx) = label_idx {
            let raw = record.get(idx).unwrap_or("");
            let parsed: EmotionLabel = raw.parse()?;
            match file_label {
                None => file_label = Some(parsed),
                Some(expected) if expected != parsed => {
                    return Err(SignalIoError::InconsistentLabel {
                        row,
                        expected,
                        found: parsed,
                    });
                }
                Some(_) => {}
            }
        }
    }

    if columns[0].is_empty() {
        return Err(SignalIoError::EmptyFile);
    }

    let label = match &schema.label {
        LabelSource::FileWide(l) => *l,
        LabelSource::Column(_) => file_label.expect("non-empty file with label column"),
    };
    EegRecording::new(
        channel_idx.iter().map(|(ch, _)| *ch).collect(),
        columns,
        schema.sampling_rate_hz,
        schema.session_id,
        schema.source_id,
        label,
    )
}

/// Writes a recording as CSV: a generated timestamp column (seconds), one
/// column per channel, and a trailing label column. Floats are rendered in
/// shortest round-trip form, so loading the file back yields bit-identical
/// samples.
pub fn write_recording(
    recording: &EegRecording,
    path: impl AsRef<Path>,
) -> Result<(), SignalIoError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|source| SignalIoError::Csv {
        path: path_str.clone(),
        source,
    })?;

    let mut header = vec!["timestamp".to_string()];
    header.extend(recording.channels.iter().map(|c| c.name().to_string()));
    header.push("label".to_string());
    writer
        .write_record(&header)
        .map_err(|source| SignalIoError::Csv {
            path: path_str.clone(),
            source,
        })?;

    let n = recording.sample_count();
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..n {
        row.clear();
        row.push((i as f64 / recording.sampling_rate).to_string());
        for col in &recording.samples {
            row.push(col[i].to_string());
        }
        row.push(recording.label.name().to_string());
        writer
            .write_record(&row)
            .map_err(|source| SignalIoError::Csv {
                path: path_str.clone(),
                source,
            })?;
    }
    writer.flush().map_err(|source| SignalIoError::Io {
        path: path_str,
        source,
    })?;
    Ok(())
}

/// Stride implied by a window length and fractional overlap:
/// round(window * (1 - overlap)), which must come out >= 1.
pub fn segment_stride(window_length: usize, overlap: f64) -> Result<usize, SignalIoError> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(SignalIoError::InvalidOverlap { overlap });
    }
    let stride = (window_length as f64 * (1.0 - overlap)).round() as usize;
    if stride == 0 {
        return Err(SignalIoError::InvalidOverlap { overlap });
    }
    Ok(stride)
}

/// Cuts a recording into fixed-length windows.
///
/// Produces floor((samples - window) / stride) + 1 segments at offsets
/// 0, stride, 2*stride, ...; a trailing remainder shorter than the window
/// is dropped. Windows sized as a multiple of 2^L keep all L wavelet
/// levels free of odd-length padding under periodic extension.
pub fn segment_recording(
    recording: &EegRecording,
    window_length: usize,
    overlap: f64,
) -> Result<Vec<Segment>, SignalIoError> {
    if window_length == 0 {
        return Err(SignalIoError::ZeroWindow);
    }
    let n = recording.sample_count();
    if window_length > n {
        return Err(SignalIoError::WindowTooLarge {
            window: window_length,
            samples: n,
        });
    }
    let stride = segment_stride(window_length, overlap)?;

    let count = (n - window_length) / stride + 1;
    let mut segments = Vec::with_capacity(count);
    for k in 0..count {
        let offset = k * stride;
        let channel_data: Vec<Vec<f64>> = recording
            .samples
            .iter()
            .map(|col| col[offset..offset + window_length].to_vec())
            .collect();
        segments.push(Segment {
            channels: recording.channels.clone(),
            channel_data,
            window_length,
            sampling_rate: recording.sampling_rate,
            source_session: recording.session_id,
            source_id: recording.source_id,
            offset,
            label: recording.label,
        });
    }
    Ok(segments)
}

/// Splits segments chronologically, per label: the most recent session
/// (highest ordinal) becomes the test set, all earlier sessions train.
///
/// The result is deterministic and independent of the input order; both
/// sides are sorted by (label, session, source, offset). Every label must
/// appear in at least two distinct sessions.
pub fn split_by_session(mut segments: Vec<Segment>) -> Result<DatasetSplit, SignalIoError> {
    segments.sort_by_key(|s| (s.label.index(), s.source_session, s.source_id, s.offset));

    for label in EmotionLabel::ALL {
        let mut sessions: Vec<u32> = segments
            .iter()
            .filter(|s| s.label == label)
            .map(|s| s.source_session)
            .collect();
        sessions.sort_unstable();
        sessions.dedup();
        if sessions.is_empty() {
            continue; // label absent entirely; the caller decides if that is a problem
        }
        if sessions.len() < 2 {
            return Err(SignalIoError::InsufficientSessions {
                label,
                sessions: sessions.len(),
            });
        }
    }

    let mut latest = [0u32; 3];
    for seg in &segments {
        let slot = seg.label.index();
        latest[slot] = latest[slot].max(seg.source_session);
    }

    let mut split = DatasetSplit::default();
    for seg in segments {
        if seg.source_session == latest[seg.label.index()] {
            split.test.push(seg);
        } else {
            split.train.push(seg);
        }
    }
    Ok(split)
}
