//! Canonical on-disk track formats.
//!
//! Two interchangeable encodings are supported:
//!
//! * **CSV** – line 1 is `#BBX1 ` followed by a JSON header object, line 2
//!   repeats the channel labels, then one comma-separated row per frame.
//! * **JSON** – a single object holding the header keys plus `data`, an
//!   array of per-frame rows.
//!
//! Header keys are `format_version`, `modality`, `fps`, `labels`,
//! `template_id`, `basis_id` and `source_backend`. Two optional keys,
//! `units` and `canonicalized`, are emitted only when set. Values are
//! written in shortest round-trip form so that reading a written file gives
//! back the same bits; non-finite values are spelled `NaN`, `inf`, `-inf`.
//!
//! Pose tracks whose header declares `"units": "degrees"` have their
//! rotation channels converted to radians on read.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::model::{Modality, ModelError, Signal, TrackMeta};

/// The only format version this crate reads and writes.
pub const FORMAT_VERSION: &str = "1";
const CSV_MAGIC: &str = "#BBX";

/// Header object shared by both encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackHeader {
    pub format_version: String,
    pub modality: Modality,
    pub fps: f64,
    pub labels: Vec<String>,
    #[serde(default)]
    pub template_id: Option<String>,
    #[serde(default)]
    pub basis_id: Option<String>,
    #[serde(default)]
    pub source_backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub canonicalized: bool,
}

impl TrackHeader {
    pub fn for_signal(s: &Signal) -> Self {
        let meta = s.meta();
        Self {
            format_version: FORMAT_VERSION.to_string(),
            modality: s.modality(),
            fps: s.fps(),
            labels: s.labels().to_vec(),
            template_id: meta.template_id.clone(),
            basis_id: meta.basis_id.clone(),
            source_backend: meta.source_backend.clone(),
            units: meta.units.clone(),
            canonicalized: meta.canonicalized,
        }
    }

    fn meta(&self) -> TrackMeta {
        TrackMeta {
            template_id: self.template_id.clone(),
            basis_id: self.basis_id.clone(),
            source_backend: self.source_backend.clone(),
            units: self.units.clone(),
            canonicalized: self.canonicalized,
        }
    }
}

/// On-disk encoding of a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackFormat {
    Csv,
    Json,
}

impl TrackFormat {
    pub const SUPPORTED: [&'static str; 2] = ["csv", "json"];

    pub fn extension(self) -> &'static str {
        match self {
            TrackFormat::Csv => "csv",
            TrackFormat::Json => "json",
        }
    }
}

impl FromStr for TrackFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TrackFormat::Csv),
            "json" => Ok(TrackFormat::Json),
            _ => Err(IngestError::UnsupportedFormat {
                name: s.to_string(),
                supported: Self::SUPPORTED.join(", "),
            }),
        }
    }
}

/// A position inside an input file, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: Option<usize>,
}

impl Pos {
    fn line(line: usize) -> Self {
        Self { line, column: None }
    }

    fn at(line: usize, column: usize) -> Self {
        Self {
            line,
            column: Some(column),
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.column {
            Some(c) => write!(f, "line {}, column {}", self.line, c),
            None => write!(f, "line {}", self.line),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {pos}: missing `#BBX<version> {{...}}` header", path.display())]
    MissingHeader { path: PathBuf, pos: Pos },
    #[error("{}: {pos}: unknown format version `{found}` (supported: {FORMAT_VERSION})", path.display())]
    UnknownFormatVersion {
        path: PathBuf,
        pos: Pos,
        found: String,
    },
    #[error("{}: {pos}: malformed header: {message}", path.display())]
    Header {
        path: PathBuf,
        pos: Pos,
        message: String,
    },
    #[error("{}: {pos}: fps must be positive and finite, got {fps}", path.display())]
    InvalidFps { path: PathBuf, pos: Pos, fps: f64 },
    #[error("{}: {pos}: label row does not match header labels", path.display())]
    LabelMismatch { path: PathBuf, pos: Pos },
    #[error(
        "{}: {pos}: row {row} has {found} columns, header declares {expected} labels",
        path.display()
    )]
    ColumnMismatch {
        path: PathBuf,
        pos: Pos,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{}: {pos}: non-numeric value `{value}`", path.display())]
    NonNumeric {
        path: PathBuf,
        pos: Pos,
        value: String,
    },
    #[error("{}: invalid track: {source}", path.display())]
    Invalid {
        path: PathBuf,
        #[source]
        source: ModelError,
    },
    #[error("label `{0}` cannot be written to CSV (no commas, quotes or line breaks)")]
    LabelSyntax(String),
    #[error("unsupported format `{name}`; supported formats: {supported}")]
    UnsupportedFormat { name: String, supported: String },
}

impl IngestError {
    /// File position of a parse error, if any.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            IngestError::MissingHeader { pos, .. }
            | IngestError::UnknownFormatVersion { pos, .. }
            | IngestError::Header { pos, .. }
            | IngestError::InvalidFps { pos, .. }
            | IngestError::LabelMismatch { pos, .. }
            | IngestError::ColumnMismatch { pos, .. }
            | IngestError::NonNumeric { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}

/// Formats a value in shortest round-trip form.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        ryu::Buffer::new().format_finite(v).to_string()
    }
}

fn parse_value(text: &str) -> Option<f64> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok()
}

fn finish(path: &Path, header: TrackHeader, rows: Vec<f64>, frames: usize) -> Result<Signal, IngestError> {
    let invalid = |source| IngestError::Invalid {
        path: path.to_path_buf(),
        source,
    };
    let channels = header.labels.len();
    let mut data = Array2::from_shape_vec((frames, channels), rows)
        .expect("parsed rows have header width");
    let mut meta = header.meta();
    let degrees = header.modality == Modality::Pose
        && header
            .units
            .as_deref()
            .is_some_and(|u| u.eq_ignore_ascii_case("degrees"));
    if degrees {
        data.slice_mut(ndarray::s![.., 0..3.min(channels)])
            .mapv_inplace(f64::to_radians);
        meta.units = Some("radians".to_string());
    }
    let signal = Signal::new(data, header.fps, header.labels, header.modality)
        .map_err(invalid)?
        .with_meta(meta);
    signal.validate_modality().map_err(invalid)?;
    Ok(signal)
}

fn check_header(path: &Path, header: &TrackHeader, pos: Pos) -> Result<(), IngestError> {
    if header.format_version != FORMAT_VERSION {
        return Err(IngestError::UnknownFormatVersion {
            path: path.to_path_buf(),
            pos,
            found: header.format_version.clone(),
        });
    }
    if !(header.fps.is_finite() && header.fps > 0.0) {
        return Err(IngestError::InvalidFps {
            path: path.to_path_buf(),
            pos,
            fps: header.fps,
        });
    }
    Ok(())
}

fn parse_csv(path: &Path, text: &str) -> Result<Signal, IngestError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let owned = || path.to_path_buf();

    let (_, first) = lines.next().ok_or(IngestError::MissingHeader {
        path: owned(),
        pos: Pos::line(1),
    })?;
    let rest = first.strip_prefix(CSV_MAGIC).ok_or(IngestError::MissingHeader {
        path: owned(),
        pos: Pos::line(1),
    })?;
    let (version, json) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    if version != FORMAT_VERSION {
        return Err(IngestError::UnknownFormatVersion {
            path: owned(),
            pos: Pos::at(1, CSV_MAGIC.len() + 1),
            found: version.to_string(),
        });
    }
    let header: TrackHeader = serde_json::from_str(json).map_err(|e| IngestError::Header {
        path: owned(),
        pos: Pos::at(1, CSV_MAGIC.len() + version.len() + 1 + e.column()),
        message: e.to_string(),
    })?;
    check_header(path, &header, Pos::line(1))?;

    let channels = header.labels.len();
    match lines.next() {
        Some((_, l)) if l.split(',').map(str::trim).eq(header.labels.iter().map(String::as_str)) => {}
        Some((n, _)) => {
            return Err(IngestError::LabelMismatch {
                path: owned(),
                pos: Pos::line(n),
            })
        }
        None => {
            return Err(IngestError::LabelMismatch {
                path: owned(),
                pos: Pos::line(2),
            })
        }
    }

    let mut values = Vec::new();
    let mut frames = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let start = values.len();
        for (c, cell) in line.split(',').enumerate() {
            if c >= channels {
                let found = line.split(',').count();
                return Err(IngestError::ColumnMismatch {
                    path: owned(),
                    pos: Pos::at(n, c + 1),
                    row: frames + 1,
                    expected: channels,
                    found,
                });
            }
            let v = parse_value(cell).ok_or_else(|| IngestError::NonNumeric {
                path: owned(),
                pos: Pos::at(n, c + 1),
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        if values.len() - start != channels {
            return Err(IngestError::ColumnMismatch {
                path: owned(),
                pos: Pos::line(n),
                row: frames + 1,
                expected: channels,
                found: values.len() - start,
            });
        }
        frames += 1;
    }
    finish(path, header, values, frames)
}

/// JSON cell: numbers, or the strings `NaN` / `inf` / `-inf`, or null (NaN).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum JsonCell {
    Number(f64),
    Text(String),
    Null,
}

impl JsonCell {
    fn from_value(v: f64) -> Self {
        if v.is_finite() {
            JsonCell::Number(v)
        } else {
            JsonCell::Text(format_value(v))
        }
    }

    fn to_value(&self) -> Option<f64> {
        match self {
            JsonCell::Number(v) => Some(*v),
            JsonCell::Text(t) => match t.as_str() {
                "NaN" | "nan" => Some(f64::NAN),
                "inf" | "Infinity" => Some(f64::INFINITY),
                "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
                _ => None,
            },
            JsonCell::Null => Some(f64::NAN),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTrack {
    format_version: String,
    modality: Modality,
    fps: f64,
    labels: Vec<String>,
    #[serde(default)]
    template_id: Option<String>,
    #[serde(default)]
    basis_id: Option<String>,
    #[serde(default)]
    source_backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    canonicalized: bool,
    data: Vec<Vec<JsonCell>>,
}

fn parse_json(path: &Path, text: &str) -> Result<Signal, IngestError> {
    let owned = || path.to_path_buf();
    let track: JsonTrack = serde_json::from_str(text).map_err(|e| IngestError::Header {
        path: owned(),
        pos: Pos::at(e.line(), e.column()),
        message: e.to_string(),
    })?;
    let header = TrackHeader {
        format_version: track.format_version,
        modality: track.modality,
        fps: track.fps,
        labels: track.labels,
        template_id: track.template_id,
        basis_id: track.basis_id,
        source_backend: track.source_backend,
        units: track.units,
        canonicalized: track.canonicalized,
    };
    check_header(path, &header, Pos::line(1))?;
    let channels = header.labels.len();
    let mut values = Vec::with_capacity(track.data.len() * channels);
    for (r, row) in track.data.iter().enumerate() {
        // rows are addressed by their index in `data`, reported 1-based
        if row.len() != channels {
            return Err(IngestError::ColumnMismatch {
                path: owned(),
                pos: Pos::line(r + 1),
                row: r + 1,
                expected: channels,
                found: row.len(),
            });
        }
        for (c, cell) in row.iter().enumerate() {
            let v = cell.to_value().ok_or_else(|| IngestError::NonNumeric {
                path: owned(),
                pos: Pos::at(r + 1, c + 1),
                value: format!("{cell:?}"),
            })?;
            values.push(v);
        }
    }
    let frames = track.data.len();
    finish(path, header, values, frames)
}

/// Detects the encoding from the first non-blank character.
pub fn sniff_format(text: &str) -> TrackFormat {
    if text.trim_start().starts_with('{') {
        TrackFormat::Json
    } else {
        TrackFormat::Csv
    }
}

/// Parses a track from text already in memory. `origin` is only used in
/// error messages.
pub fn parse_track(text: &str, origin: &Path) -> Result<Signal, IngestError> {
    match sniff_format(text) {
        TrackFormat::Csv => parse_csv(origin, text),
        TrackFormat::Json => parse_json(origin, text),
    }
}

/// Reads and validates a track in either canonical encoding.
pub fn read_track(path: impl AsRef<Path>) -> Result<Signal, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_track(&text, path)
}

fn check_labels(s: &Signal) -> Result<(), IngestError> {
    for label in s.labels() {
        if label.is_empty()
            || label.trim() != label
            || label.contains([',', '"', '\n', '\r'])
        {
            return Err(IngestError::LabelSyntax(label.clone()));
        }
    }
    Ok(())
}

/// Encodes a signal in the requested format.
pub fn encode_track(s: &Signal, format: TrackFormat) -> Result<String, IngestError> {
    s.validate_modality().map_err(|source| IngestError::Invalid {
        path: PathBuf::new(),
        source,
    })?;
    let header = TrackHeader::for_signal(s);
    match format {
        TrackFormat::Csv => {
            check_labels(s)?;
            let mut out = String::new();
            out.push_str(CSV_MAGIC);
            out.push_str(FORMAT_VERSION);
            out.push(' ');
            out.push_str(&serde_json::to_string(&header).expect("header serializes"));
            out.push('\n');
            out.push_str(&s.labels().join(","));
            out.push('\n');
            for f in 0..s.frames() {
                let row: Vec<String> = s.frame(f).iter().map(|&v| format_value(v)).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        TrackFormat::Json => {
            let track = JsonTrack {
                format_version: header.format_version,
                modality: header.modality,
                fps: header.fps,
                labels: header.labels,
                template_id: header.template_id,
                basis_id: header.basis_id,
                source_backend: header.source_backend,
                units: header.units,
                canonicalized: header.canonicalized,
                data: (0..s.frames())
                    .map(|f| s.frame(f).iter().map(|&v| JsonCell::from_value(v)).collect())
                    .collect(),
            };
            Ok(serde_json::to_string(&track).expect("track serializes") + "\n")
        }
    }
}

/// Writes `s` as canonical CSV, atomically.
pub fn write_track(s: &Signal, path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_track_as(s, path, TrackFormat::Csv)
}

/// Writes `s` in the given encoding, atomically. Layout errors are reported
/// before anything touches the filesystem.
pub fn write_track_as(
    s: &Signal,
    path: impl AsRef<Path>,
    format: TrackFormat,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let text = encode_track(s, format).map_err(|e| match e {
        IngestError::Invalid { source, .. } => IngestError::Invalid {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    write_atomic(path, text.as_bytes()).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Re-encodes a track. `target` is a format name (`csv` or `json`).
pub fn convert(
    path_in: impl AsRef<Path>,
    path_out: impl AsRef<Path>,
    target: &str,
) -> Result<Signal, IngestError> {
    let format = TrackFormat::from_str(target)?;
    let signal = read_track(path_in)?;
    write_track_as(&signal, path_out, format)?;
    Ok(signal)
}
