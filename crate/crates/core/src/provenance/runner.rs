use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{
    hash_input, read_sidecar, should_reuse, write_sidecar, Clock, ProvenanceError,
    RetentionPeriod, SidecarMetadata, SystemClock,
};
use crate::fsutil::DirLock;

/// Environment variable supplying `{runtime}` when no binding is given,
/// e.g. a container launcher prefix or a directory of native binaries.
pub const RUNTIME_ENV: &str = "BEHAVIO_RUNTIME";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

/// A shell command with `{name}` placeholders; `{{` and `}}` are literal
/// braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    source: String,
    pieces: Vec<Piece>,
}

impl CommandTemplate {
    pub fn parse(source: &str) -> Result<Self, ProvenanceError> {
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut chars = source.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) if ch.is_ascii_alphanumeric() || ch == '_' => name.push(ch),
                            _ => {
                                return Err(ProvenanceError::TemplateSyntax(format!(
                                    "bad placeholder after `{{{name}` in `{source}`"
                                )))
                            }
                        }
                    }
                    if name.is_empty() || name.starts_with(|ch: char| ch.is_ascii_digit()) {
                        return Err(ProvenanceError::TemplateSyntax(format!(
                            "bad placeholder name `{name}` in `{source}`"
                        )));
                    }
                    pieces.push(Piece::Text(std::mem::take(&mut text)));
                    pieces.push(Piece::Slot(name));
                }
                '}' => {
                    return Err(ProvenanceError::TemplateSyntax(format!(
                        "unmatched `}}` in `{source}`"
                    )))
                }
                c => text.push(c),
            }
        }
        pieces.push(Piece::Text(text));
        Ok(Self {
            source: source.into(),
            pieces,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Placeholder names in order of first use.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for p in &self.pieces {
            if let Piece::Slot(n) = p {
                if !names.contains(&n.as_str()) {
                    names.push(n);
                }
            }
        }
        names
    }

    /// Substitutes shell-quoted values. `{runtime}` falls back to
    /// [`RUNTIME_ENV`] and is inserted verbatim, since it is a command prefix.
    pub fn materialize(&self, bindings: &BTreeMap<String, String>) -> Result<String, ProvenanceError> {
        let env_runtime = std::env::var(RUNTIME_ENV).ok();
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) if name == "runtime" => {
                    let v = bindings
                        .get(name)
                        .or(env_runtime.as_ref())
                        .ok_or_else(|| ProvenanceError::Unbound(name.clone()))?;
                    out.push_str(v);
                }
                Piece::Slot(name) => {
                    let v = bindings
                        .get(name)
                        .ok_or_else(|| ProvenanceError::Unbound(name.clone()))?;
                    out.push_str(&shell_quote(v));
                }
            }
        }
        Ok(out)
    }
}

/// Quotes `s` for a POSIX shell, leaving plain words untouched.
pub fn shell_quote(s: &str) -> String {
    let plain = !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"_@%+=:,./-".contains(&b));
    if plain {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// One backend invocation.
#[derive(Debug, Clone)]
pub struct BackendSpec {
    pub backend: String,
    pub template: CommandTemplate,
    pub bindings: BTreeMap<String, String>,
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// Files the command is expected to create.
    pub outputs: Vec<PathBuf>,
    /// Extra keys stored in every sidecar.
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    DryRun,
    Reused,
    Executed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub cmd: String,
    pub status: RunStatus,
    pub sidecars: Vec<PathBuf>,
    pub stdout: String,
    pub stderr: String,
}

/// Executes backend commands with caching.
pub struct Runner {
    retention: RetentionPeriod,
    clock: Box<dyn Clock>,
    spawned: AtomicUsize,
}

impl Default for Runner {
    fn default() -> Self {
        Self::new(RetentionPeriod::default())
    }
}

impl Runner {
    pub fn new(retention: RetentionPeriod) -> Self {
        Self::with_clock(retention, Box::new(SystemClock))
    }

    pub fn with_clock(retention: RetentionPeriod, clock: Box<dyn Clock>) -> Self {
        Self {
            retention,
            clock,
            spawned: AtomicUsize::new(0),
        }
    }

    /// Processes started so far.
    pub fn spawn_count(&self) -> usize {
        self.spawned.load(Ordering::SeqCst)
    }

    /// Command line that [`Runner::run`] would execute.
    pub fn materialize(&self, spec: &BackendSpec) -> Result<String, ProvenanceError> {
        spec.template.materialize(&spec.bindings)
    }

    /// Runs `spec` unless every output is reusable. Outputs count as reusable
    /// when the cache check passes and the recorded command is unchanged.
    pub fn run(&self, spec: &BackendSpec, dry_run: bool) -> Result<ExecutionRecord, ProvenanceError> {
        let cmd = self.materialize(spec)?;
        let mut record = ExecutionRecord {
            cmd,
            status: RunStatus::DryRun,
            sidecars: Vec::new(),
            stdout: String::new(),
            stderr: String::new(),
        };
        if dry_run {
            return Ok(record);
        }
        let input_hash = hash_input(&spec.input)?;
        let now = self.clock.now();
        let reusable = !spec.outputs.is_empty()
            && spec.outputs.iter().all(|o| {
                should_reuse(o, &self.retention, &input_hash, now).reuse
                    && read_sidecar(o).is_ok_and(|m| m.cmd == record.cmd)
            });
        if reusable {
            record.status = RunStatus::Reused;
            record.sidecars = spec
                .outputs
                .iter()
                .map(|o| super::sidecar_path(o))
                .collect::<Result<_, _>>()?;
            return Ok(record);
        }

        let _lock = DirLock::acquire(&spec.output_dir)
            .map_err(|e| ProvenanceError::io(&spec.output_dir, e))?;
        self.spawned.fetch_add(1, Ordering::SeqCst);
        let out = Command::new("sh")
            .arg("-c")
            .arg(&record.cmd)
            .output()
            .map_err(|e| ProvenanceError::io("sh", e))?;
        record.stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        record.stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        if !out.status.success() {
            return Err(ProvenanceError::BackendFailed {
                cmd: record.cmd,
                status: out.status.to_string(),
                stderr: record.stderr,
            });
        }
        if let Some(missing) = spec.outputs.iter().find(|o| !o.is_file()) {
            return Err(ProvenanceError::MissingOutput(missing.clone()));
        }

        let input = absolute(&spec.input);
        let output = absolute(&spec.output_dir);
        let now = self.clock.now();
        for o in &spec.outputs {
            let mut meta = SidecarMetadata::new(
                &spec.backend,
                &record.cmd,
                &input,
                &input_hash,
                &output,
                now,
            );
            meta.extra = spec.extra.clone();
            record.sidecars.push(write_sidecar(&meta, o)?);
        }
        record.status = RunStatus::Executed;
        Ok(record)
    }
}

fn absolute(p: &Path) -> String {
    std::path::absolute(p)
        .unwrap_or_else(|_| p.to_path_buf())
        .display()
        .to_string()
}
