//! Output caching, sidecar metadata, external backend execution and
//! citation text.

mod citation;
mod retention;
mod runner;
mod sidecar;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use citation::{citation_block, CitationConfig, Reference};
pub use retention::{format_retention, parse_retention, RetentionPeriod, RETENTION_GRAMMAR};
pub use runner::{
    shell_quote, BackendSpec, CommandTemplate, ExecutionRecord, RunStatus, Runner, RUNTIME_ENV,
};
pub use sidecar::{
    hash_bytes, hash_input, read_sidecar, should_reuse, sidecar_path, write_sidecar,
    write_sidecar_with, Clock, FixedClock, ReuseDecision, ReuseReason, SidecarMetadata,
    SystemClock, HASH_ALGORITHM, TIME_FORMAT,
};

#[derive(Debug, Error)]
pub enum ProvenanceError {
    #[error("cannot parse retention `{text}`: expected {}", RETENTION_GRAMMAR)]
    Retention { text: String },
    #[error("{0}: outputs ending in .json would collide with sidecar files")]
    SidecarOfSidecar(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("command template placeholder `{{{0}}}` is not bound")]
    Unbound(String),
    #[error("command template: {0}")]
    TemplateSyntax(String),
    #[error("backend command failed ({status}): {cmd}\n{stderr}")]
    BackendFailed {
        cmd: String,
        status: String,
        stderr: String,
    },
    #[error("backend finished but did not produce {0}")]
    MissingOutput(PathBuf),
}

impl ProvenanceError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        ProvenanceError::Io {
            path: path.into(),
            source,
        }
    }
}
