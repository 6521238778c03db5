//! Optional TOML defaults. Flags given on the command line win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingArg {
    Matched,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    MaxSigned,
    MaxAbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagAggregateArg {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityArg {
    Peak,
    Rms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackFormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotFormatArg {
    Html,
    Svg,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub name: Option<String>,
    pub template: Option<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub bind: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitationFileConfig {
    pub backend: Option<String>,
    pub toolkit_version: Option<String>,
    pub model: Option<String>,
    pub fov: Option<f64>,
    pub landmark_template: Option<String>,
    pub local: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub retention: Option<String>,
    pub angular: Option<bool>,
    pub compat: Option<bool>,
    pub scales: Option<String>,
    pub peak_z: Option<f64>,
    pub intensity: Option<IntensityArg>,
    pub template: Option<String>,
    pub width: Option<f64>,
    pub step: Option<f64>,
    pub max_lag: Option<f64>,
    pub fps: Option<f64>,
    pub causality: Option<bool>,
    pub pairing: Option<PairingArg>,
    pub objective: Option<ObjectiveArg>,
    pub lag_aggregate: Option<LagAggregateArg>,
    pub to: Option<TrackFormatArg>,
    pub format: Option<PlotFormatArg>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub citation: CitationFileConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| {
            CliError::Invalid(format!("{}: {}", path.display(), e.message()))
        })
    }
}

/// Per-directory settings kept next to the outputs.
#[derive(Debug, Clone, Default, Deserialize, serde::Serialize)]
pub struct DirSettings {
    pub retention: Option<String>,
}

pub const SETTINGS_DIR: &str = ".behavio";
pub const SETTINGS_FILE: &str = "settings.toml";

impl DirSettings {
    pub fn path(out_dir: &Path) -> PathBuf {
        out_dir.join(SETTINGS_DIR).join(SETTINGS_FILE)
    }

    pub fn load(out_dir: &Path) -> Result<Self, CliError> {
        let path = Self::path(out_dir);
        match std::fs::read_to_string(&path) {
            Ok(text) => toml::from_str(&text)
                .map_err(|e| CliError::Cache(format!("{}: {}", path.display(), e.message()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(CliError::Cache(format!("{}: {e}", path.display()))),
        }
    }
}
