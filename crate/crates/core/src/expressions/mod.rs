//! Affective-expression measures: facial asymmetry, multiscale
//! decomposition with event peaks, expressivity and diversity.

mod asymmetry;
mod decompose;
mod diversity;
mod expressivity;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::ModelError;

pub use asymmetry::{asymmetry, reflect_across_plane, AsymmetryScores};
pub use decompose::{
    centered_moving_average, detect_peaks, multiscale_decompose, multiscale_decompose_with,
    MultiscaleDecomposition, Peak, PeakConfig,
};
pub use diversity::{
    diversity, diversity_table, normalized_entropy, DiversityScores, ScaleDiversity,
    DIVERSITY_ESTIMATOR,
};
pub use expressivity::{
    expressivity, expressivity_table, expressivity_with, CoefficientStats, ExpressivityStats,
    ExpressivityConfig, IntensityMeasure, ScaleStats, POOLED_COEFFICIENT,
};

/// Base window of the dyadic scale ladder, in seconds.
pub const DYADIC_BASE_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpressionError {
    #[error("scale count must be at least 1")]
    EmptyScales,
    #[error("scale windows must be positive and strictly increasing, got {0:?}")]
    ScaleOrder(Vec<f64>),
    #[error("scales {0:?} round to non-increasing frame windows {1:?} at this frame rate")]
    ScaleResolution(Vec<f64>, Vec<usize>),
    #[error("cannot parse scales `{0}`: use a count (`6`), seconds (`0.5,1,1.5,2`) or `none`")]
    ScaleSyntax(String),
    #[error("signal too short: {found} frames, need at least {required}")]
    TooShort { required: usize, found: usize },
    #[error("signal contains non-finite values in channel {channel}")]
    NonFinite { channel: usize },
    #[error("diversity needs at least 2 coefficients, got {0}")]
    TooFewCoefficients(usize),
    #[error("landmark track ({found}) does not match mirror template `{expected}`")]
    TemplateMismatch { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Temporal scales over which expression activity is analysed.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSet {
    /// One scale spanning the whole signal.
    Whole,
    /// `count` windows of 0.2 s, 0.4 s, … 0.1·2^count s.
    Dyadic(usize),
    /// Explicit windows in seconds, strictly increasing.
    Seconds(Vec<f64>),
}

/// One resolved scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub seconds: f64,
    pub frames: usize,
}

impl ScaleSet {
    pub fn seconds(windows: &[f64]) -> Result<Self, ExpressionError> {
        if windows.is_empty() {
            return Err(ExpressionError::EmptyScales);
        }
        let ok = windows.iter().all(|w| w.is_finite() && *w > 0.0)
            && windows.windows(2).all(|p| p[0] < p[1]);
        if !ok {
            return Err(ExpressionError::ScaleOrder(windows.to_vec()));
        }
        Ok(ScaleSet::Seconds(windows.to_vec()))
    }

    pub fn dyadic(count: usize) -> Result<Self, ExpressionError> {
        if count == 0 {
            return Err(ExpressionError::EmptyScales);
        }
        Ok(ScaleSet::Dyadic(count))
    }

    /// Window lengths in seconds, or `None` for [`ScaleSet::Whole`].
    pub fn window_seconds(&self) -> Option<Vec<f64>> {
        match self {
            ScaleSet::Whole => None,
            ScaleSet::Dyadic(k) => Some(
                (1..=*k as i32)
                    .map(|i| DYADIC_BASE_S * 2f64.powi(i))
                    .collect(),
            ),
            ScaleSet::Seconds(w) => Some(w.clone()),
        }
    }

    /// Resolves windows to frame counts, `round(seconds · fps)`. For
    /// [`ScaleSet::Whole`] the single scale spans `frames` samples.
    pub fn resolve(&self, fps: f64, frames: usize) -> Result<Vec<Scale>, ExpressionError> {
        let Some(seconds) = self.window_seconds() else {
            return Ok(vec![Scale {
                seconds: frames as f64 / fps,
                frames,
            }]);
        };
        if seconds.is_empty() {
            return Err(ExpressionError::EmptyScales);
        }
        let windows: Vec<usize> = seconds.iter().map(|s| (s * fps).round() as usize).collect();
        if windows[0] == 0 || windows.windows(2).any(|p| p[0] >= p[1]) {
            return Err(ExpressionError::ScaleResolution(seconds, windows));
        }
        Ok(seconds
            .into_iter()
            .zip(windows)
            .map(|(seconds, frames)| Scale { seconds, frames })
            .collect())
    }
}

impl FromStr for ScaleSet {
    type Err = ExpressionError;

    /// A bare integer is a dyadic count; anything with a decimal point or a
    /// comma is a list of seconds; `none` or `whole` is the single scale.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("whole") {
            return Ok(ScaleSet::Whole);
        }
        if let Ok(count) = t.parse::<usize>() {
            return ScaleSet::dyadic(count);
        }
        let t = t.trim_start_matches('[').trim_end_matches(']');
        let values: Result<Vec<f64>, _> = t
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match values {
            Ok(v) if !v.is_empty() => ScaleSet::seconds(&v),
            _ => Err(ExpressionError::ScaleSyntax(s.to_string())),
        }
    }
}

impl fmt::Display for ScaleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleSet::Whole => f.write_str("none"),
            ScaleSet::Dyadic(k) => write!(f, "{k}"),
            ScaleSet::Seconds(w) => {
                let parts: Vec<String> = w.iter().map(|v| format!("{v:?}")).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}
