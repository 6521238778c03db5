use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, Local, NaiveDateTime, TimeZone};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ProvenanceError, RetentionPeriod};
use crate::fsutil;

/// Layout of the `time` field, in local time.
pub const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
pub const HASH_ALGORITHM: &str = "sha256";

mod local_time {
    use super::TIME_FORMAT;
    use chrono::NaiveDateTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&t.format(TIME_FORMAT))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let text = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&text, TIME_FORMAT).map_err(|e| {
            serde::de::Error::custom(format!("time `{text}` does not match {TIME_FORMAT}: {e}"))
        })
    }
}

/// Record of the run that produced an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarMetadata {
    pub backend: String,
    pub cmd: String,
    pub input: String,
    pub input_hash: String,
    pub output: String,
    #[serde(with = "local_time")]
    pub time: NaiveDateTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_algorithm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utc_offset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toolkit_version: Option<String>,
    /// Backend- or command-specific keys.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl SidecarMetadata {
    /// Metadata stamped with `now`, the hash algorithm and the toolkit version.
    pub fn new(
        backend: &str,
        cmd: &str,
        input: &str,
        input_hash: &str,
        output: &str,
        now: DateTime<FixedOffset>,
    ) -> Self {
        Self {
            backend: backend.into(),
            cmd: cmd.into(),
            input: input.into(),
            input_hash: input_hash.into(),
            output: output.into(),
            time: now.naive_local(),
            hash_algorithm: Some(HASH_ALGORITHM.into()),
            utc_offset: Some(now.offset().to_string()),
            toolkit_version: Some(env!("CARGO_PKG_VERSION").into()),
            extra: BTreeMap::new(),
        }
    }

    /// Creation time, using the recorded offset or `fallback` without one.
    pub fn created_at(&self, fallback: FixedOffset) -> DateTime<FixedOffset> {
        let offset = self
            .utc_offset
            .as_deref()
            .and_then(|o| o.parse::<FixedOffset>().ok())
            .unwrap_or(fallback);
        offset
            .from_local_datetime(&self.time)
            .single()
            .expect("fixed offsets map local times uniquely")
    }

    fn validate(&self) -> Result<(), String> {
        let hex = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !hex(&self.input_hash) {
            return Err(format!("input_hash `{}` is not lowercase hex", self.input_hash));
        }
        if let Some(o) = &self.utc_offset {
            o.parse::<FixedOffset>()
                .map_err(|_| format!("utc_offset `{o}` is not an offset like +02:00"))?;
        }
        Ok(())
    }
}

/// Source of the current time, replaceable in tests.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<FixedOffset>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<FixedOffset> {
        Local::now().fixed_offset()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<FixedOffset>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<FixedOffset> {
        self.0
    }
}

/// `out/x.csv` → `out/x.csv.json`, `out/x` → `out/x.json`.
pub fn sidecar_path(output: &Path) -> Result<PathBuf, ProvenanceError> {
    let is_json = output
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let Some(name) = output.file_name().filter(|_| !is_json) else {
        return Err(ProvenanceError::SidecarOfSidecar(output.to_path_buf()));
    };
    let mut name = name.to_os_string();
    name.push(".json");
    Ok(output.with_file_name(name))
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn hash_input(path: &Path) -> Result<String, ProvenanceError> {
    let mut file = File::open(path).map_err(|e| ProvenanceError::io(path, e))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher).map_err(|e| ProvenanceError::io(path, e))?;
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn write_sidecar(meta: &SidecarMetadata, output: &Path) -> Result<PathBuf, ProvenanceError> {
    write_sidecar_with(meta, output, |_| Ok(()))
}

/// [`write_sidecar`] with a hook that runs just before the new file replaces
/// the old one.
pub fn write_sidecar_with<F>(
    meta: &SidecarMetadata,
    output: &Path,
    before_commit: F,
) -> Result<PathBuf, ProvenanceError>
where
    F: FnOnce(&Path) -> io::Result<()>,
{
    let path = sidecar_path(output)?;
    let mut text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    text.push('\n');
    fsutil::write_atomic_with(&path, text.as_bytes(), before_commit)
        .map_err(|e| ProvenanceError::io(&path, e))?;
    Ok(path)
}

/// Reads the sidecar of `output`.
pub fn read_sidecar(output: &Path) -> Result<SidecarMetadata, ProvenanceError> {
    let path = sidecar_path(output)?;
    let text = std::fs::read_to_string(&path).map_err(|e| ProvenanceError::io(&path, e))?;
    let corrupt = |message: String| ProvenanceError::Sidecar {
        path: path.clone(),
        message,
    };
    let meta: SidecarMetadata = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    meta.validate().map_err(corrupt)?;
    Ok(meta)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReuseReason {
    Fresh,
    OutputMissing,
    SidecarMissing,
    SidecarUnreadable(String),
    InputChanged,
    RetentionExpired,
}

impl fmt::Display for ReuseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReuseReason::Fresh => f.write_str("within retention"),
            ReuseReason::OutputMissing => f.write_str("output missing"),
            ReuseReason::SidecarMissing => f.write_str("sidecar missing"),
            ReuseReason::SidecarUnreadable(m) => write!(f, "sidecar unreadable: {m}"),
            ReuseReason::InputChanged => f.write_str("input changed"),
            ReuseReason::RetentionExpired => f.write_str("retention expired"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReuseDecision {
    pub reuse: bool,
    pub reason: ReuseReason,
}

impl ReuseDecision {
    fn no(reason: ReuseReason) -> Self {
        Self {
            reuse: false,
            reason,
        }
    }
}

/// Whether `output` can be reused: it and its sidecar exist, the sidecar
/// parses, it records `input_hash`, and it is no older than `retention`.
/// The reason names the first clause that fails.
pub fn should_reuse(
    output: &Path,
    retention: &RetentionPeriod,
    input_hash: &str,
    now: DateTime<FixedOffset>,
) -> ReuseDecision {
    if !output.is_file() {
        return ReuseDecision::no(ReuseReason::OutputMissing);
    }
    match sidecar_path(output) {
        Ok(p) if p.is_file() => {}
        _ => return ReuseDecision::no(ReuseReason::SidecarMissing),
    }
    let meta = match read_sidecar(output) {
        Ok(m) => m,
        Err(e) => return ReuseDecision::no(ReuseReason::SidecarUnreadable(e.to_string())),
    };
    if meta.input_hash != input_hash {
        return ReuseDecision::no(ReuseReason::InputChanged);
    }
    let age = (now - meta.created_at(*now.offset())).num_seconds().max(0) as u64;
    if age > retention.seconds() {
        return ReuseDecision::no(ReuseReason::RetentionExpired);
    }
    ReuseDecision {
        reuse: true,
        reason: ReuseReason::Fresh,
    }
}
