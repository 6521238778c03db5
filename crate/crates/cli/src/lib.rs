//! The `behavio` command-line tool.
//!
//! Every command reads canonical track files, writes its results to the
//! output directory and records a provenance sidecar next to each result.
//! Exit codes: 0 success, 2 invalid input or arguments, 3 backend failure,
//! 4 corrupt cache metadata.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use behavio_core::expressions::ExpressionError;
use behavio_core::ingest::IngestError;
use behavio_core::kinematics::KinematicsError;
use behavio_core::model::ModelError;
use behavio_core::provenance::ProvenanceError;
use behavio_core::social::SocialError;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
pub mod config;
pub mod plot;

use config::{
    IntensityArg, LagAggregateArg, ObjectiveArg, PairingArg, PlotFormatArg, TrackFormatArg,
};

/// Environment variable holding an RFC 3339 timestamp that replaces the
/// system clock. Meant for reproducible tests.
pub const NOW_ENV: &str = "BEHAVIO_NOW";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Cache(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Cache(_) => 4,
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}

invalid_from!(IngestError, ModelError, KinematicsError, ExpressionError, SocialError);

impl From<ProvenanceError> for CliError {
    fn from(e: ProvenanceError) -> Self {
        match e {
            ProvenanceError::Sidecar { .. } => CliError::Cache(e.to_string()),
            ProvenanceError::BackendFailed { .. } | ProvenanceError::MissingOutput(_) => {
                CliError::Backend(e.to_string())
            }
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "behavio", version, about = "Measure behavior from face, head and body tracks")]
pub struct Cli {
    /// TOML file with default option values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory receiving outputs and sidecars [default: .]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Cache retention, e.g. "6 months" or "3 days".
    #[arg(long, global = true, value_name = "PERIOD")]
    pub retention: Option<String>,
    /// Recompute outputs even when cached results are valid.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Track files to process.
    #[arg(long = "input", short = 'i', value_name = "FILE", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct XcorrArgs {
    /// Window width in seconds [default: 1.1]
    #[arg(long)]
    pub width: Option<f64>,
    /// Step between windows in seconds [default: 0.5]
    #[arg(long)]
    pub step: Option<f64>,
    /// Largest lag in seconds [default: half the width]
    #[arg(long)]
    pub max_lag: Option<f64>,
    /// Expected frame rate; both tracks must match it.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Channel pairing [default: matched when labels agree, else all-pairs]
    #[arg(long, value_enum)]
    pub pairing: Option<PairingArg>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    pub lag_aggregate: Option<LagAggregateArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-encode tracks as canonical CSV or JSON.
    Convert {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        to: Option<TrackFormatArg>,
    },
    /// Range of motion, path length, speed, acceleration, jerk and smoothness.
    Kinematics {
        #[command(flatten)]
        inputs: Inputs,
        /// Use pose rotations instead of translations.
        #[arg(long)]
        angular: bool,
        /// Restrict the table to the legacy column set.
        #[arg(long)]
        compat: bool,
    },
    /// Motion relative to a reference track or to the first frame.
    RelativeMotion {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "FILE")]
        reference: Option<PathBuf>,
        #[arg(long)]
        angular: bool,
    },
    /// Per-frame facial asymmetry from landmarks.
    Asymmetry {
        #[command(flatten)]
        inputs: Inputs,
        /// Mirror template id when the track does not name one.
        #[arg(long)]
        template: Option<String>,
    },
    /// Intensity, variability and peak rate per time scale.
    Expressivity {
        #[command(flatten)]
        inputs: Inputs,
        /// Time scales: a count of dyadic scales, comma-separated seconds, or "none" [default: 6]
        #[arg(long)]
        scales: Option<String>,
        /// Peak threshold in standard deviations above the mean [default: 1]
        #[arg(long)]
        peak_z: Option<f64>,
        #[arg(long, value_enum)]
        intensity: Option<IntensityArg>,
    },
    /// Normalized entropy of the dominant coefficient per time scale.
    Diversity {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        scales: Option<String>,
    },
    /// How closely a participant follows a reference, window by window.
    Imitation {
        #[arg(long, visible_alias = "a", value_name = "FILE")]
        participant: PathBuf,
        #[arg(long, visible_alias = "b", value_name = "FILE")]
        reference: PathBuf,
        /// Allow the participant to lead as well as trail.
        #[arg(long)]
        no_causality: bool,
        #[command(flatten)]
        xcorr: XcorrArgs,
    },
    /// Mutual coupling between two partners, window by window.
    Coordination {
        #[arg(long, value_name = "FILE")]
        a: PathBuf,
        #[arg(long, value_name = "FILE")]
        b: PathBuf,
        #[command(flatten)]
        xcorr: XcorrArgs,
    },
    /// Run an external extraction backend with caching.
    RunBackend(RunBackendArgs),
    /// Inspect or configure the output cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Print a methods paragraph with references.
    Citation(CitationArgs),
    /// Render a track as an HTML or SVG chart.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunBackendArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Command template with {placeholders}.
    #[arg(long)]
    pub template: Option<String>,
    /// Backend name recorded in sidecars.
    #[arg(long)]
    pub name: Option<String>,
    /// Files the backend writes, relative to the output directory.
    #[arg(long = "output", value_name = "NAME")]
    pub outputs: Vec<String>,
    /// Extra placeholder bindings.
    #[arg(long = "bind", value_name = "KEY=VALUE")]
    pub bind: Vec<String>,
    /// Print the command without running it.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// List outputs with their age and cache status.
    Show,
    /// Store a retention period for the output directory.
    SetRetention { period: String },
}

#[derive(Debug, Args)]
pub struct CitationArgs {
    #[arg(long)]
    pub backend: Option<String>,
    /// Toolkit version to cite [default: this build]
    #[arg(long = "version", value_name = "VERSION")]
    pub toolkit_version: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Camera field of view in degrees.
    #[arg(long)]
    pub fov: Option<f64>,
    #[arg(long)]
    pub landmark_template: Option<String>,
    /// Local expression coefficients were used.
    #[arg(long)]
    pub local: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Landmark or rectangle tracks drawn in a per-frame view.
    #[arg(long = "overlay", value_name = "FILE")]
    pub overlays: Vec<PathBuf>,
    /// Time scales used for peak markers [default: none]
    #[arg(long)]
    pub scales: Option<String>,
    #[arg(long)]
    pub peak_z: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<PlotFormatArg>,
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match commands::execute(cli, &argv, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            let message = e.to_string();
            let line: Vec<&str> = message.lines().filter(|l| !l.trim().is_empty()).collect();
            eprintln!("behavio: {}", line.join(" | "));
            e.exit_code()
        }
    }
}
