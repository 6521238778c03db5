//! Interpersonal measures from windowed, lagged cross-correlation.
//!
//! For a window starting at frame `t` of width `w` and a lag `ℓ`, the
//! correlation is Pearson's r between `a[t..t+w)` and `b[t-ℓ..t-ℓ+w)`.
//! A positive lag therefore means the first signal trails the second.
//!
//! Window starts are `L, L+step, ...` where `L` is the largest lag in frames,
//! and a window is kept only if every allowed lag stays inside the signal.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{align_pair, Modality, ModelError, Signal};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SocialError {
    #[error("invalid correlation settings: {0}")]
    Config(String),
    #[error("matched pairing needs equal channel counts, got {a} and {b}")]
    Pairing { a: usize, b: usize },
    #[error("signals too short: {found} frames, need at least {required} for one window")]
    TooShort { required: usize, found: usize },
    #[error("no valid windows: every window had zero variance at all lags")]
    NoValidWindows,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagMode {
    /// Lags in `[0, L]`: the first signal may only trail the second.
    Directional,
    /// Lags in `[-L, L]`.
    Bidirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Channel i of `a` with channel i of `b`.
    Matched,
    /// Every channel of `a` with every channel of `b`.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LagObjective {
    #[default]
    MaxSigned,
    MaxAbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LagAggregate {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XcorrConfig {
    pub width_s: f64,
    pub step_s: f64,
    /// Defaults to half the width.
    pub max_lag_s: Option<f64>,
    pub mode: LagMode,
    /// `None` picks matched when channel counts and labels agree.
    pub pairing: Option<Pairing>,
    pub objective: LagObjective,
    pub lag_aggregate: LagAggregate,
}

impl XcorrConfig {
    pub fn new(width_s: f64, step_s: f64, mode: LagMode) -> Self {
        Self {
            width_s,
            step_s,
            max_lag_s: None,
            mode,
            pairing: None,
            objective: LagObjective::default(),
            lag_aggregate: LagAggregate::default(),
        }
    }

    pub fn max_lag_s(&self) -> f64 {
        self.max_lag_s.unwrap_or(self.width_s / 2.0)
    }

    /// Width, step and maximum lag in frames.
    pub fn frames(&self, fps: f64) -> Result<WindowGrid, SocialError> {
        let max_lag_s = self.max_lag_s();
        if !(self.width_s.is_finite() && self.width_s > 0.0) {
            return Err(SocialError::Config(format!("width must be positive, got {}", self.width_s)));
        }
        if !(self.step_s.is_finite() && self.step_s > 0.0) {
            return Err(SocialError::Config(format!("step must be positive, got {}", self.step_s)));
        }
        if !(max_lag_s.is_finite() && max_lag_s >= 0.0) {
            return Err(SocialError::Config(format!("max lag must be non-negative, got {max_lag_s}")));
        }
        let width = (self.width_s * fps).round() as usize;
        let step = (self.step_s * fps).round() as usize;
        let max_lag = (max_lag_s * fps).round() as usize;
        if width < 3 {
            return Err(SocialError::Config(format!(
                "window of {} s is {width} frames at {fps} fps; need at least 3",
                self.width_s
            )));
        }
        if step == 0 {
            return Err(SocialError::Config(format!(
                "step of {} s rounds to 0 frames at {fps} fps",
                self.step_s
            )));
        }
        Ok(WindowGrid {
            width,
            step,
            max_lag,
            mode: self.mode,
        })
    }
}

/// Window layout in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGrid {
    pub width: usize,
    pub step: usize,
    pub max_lag: usize,
    pub mode: LagMode,
}

impl WindowGrid {
    /// Allowed lags in evaluation order: 0, -1, 1, -2, 2, ... so that a
    /// strict improvement test breaks ties by smallest |ℓ|, then negative ℓ.
    pub fn lags(&self) -> Vec<isize> {
        let l = self.max_lag as isize;
        let mut lags = vec![0];
        for k in 1..=l {
            if self.mode == LagMode::Bidirectional {
                lags.push(-k);
            }
            lags.push(k);
        }
        lags
    }

    /// Start frames of all windows for a signal of `frames` samples.
    pub fn starts(&self, frames: usize) -> Vec<usize> {
        let ahead = match self.mode {
            LagMode::Directional => 0,
            LagMode::Bidirectional => self.max_lag,
        };
        let last = frames.checked_sub(self.width + ahead);
        match last {
            Some(last) if last >= self.max_lag => (self.max_lag..=last).step_by(self.step).collect(),
            _ => Vec::new(),
        }
    }

    /// Frames needed for one window.
    pub fn min_frames(&self) -> usize {
        match self.mode {
            LagMode::Directional => self.width + self.max_lag,
            LagMode::Bidirectional => self.width + 2 * self.max_lag,
        }
    }
}

/// Pearson correlation, `None` when either side has no variance.
pub fn pearson(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.sum() / n, y.sum() / n);
    let (mut sxy, mut sxx, mut syy, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
        qx += a * a;
        qy += b * b;
    }
    // deviations at rounding level of the values count as constant
    let flat = |s: f64, q: f64| s <= 1e-24 * q || s == 0.0;
    if flat(sxx, qx) || flat(syy, qy) || !(sxx.is_finite() && syy.is_finite()) {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowResult {
    pub start: usize,
    pub start_s: f64,
    /// Best correlation and its lag in frames; `None` for skipped windows.
    pub best: Option<(f64, isize)>,
}

impl WindowResult {
    pub fn corr(&self) -> Option<f64> {
        self.best.map(|b| b.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub a: usize,
    pub b: usize,
    pub a_label: String,
    pub b_label: String,
    pub windows: Vec<WindowResult>,
    pub summary: Summary,
}

/// Aggregates over retained windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub corr_mean: f64,
    pub corr_std: f64,
    /// Aggregated best lag in seconds.
    pub corr_lag: f64,
    pub retained: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedCorrelation {
    pub pairs: Vec<PairResult>,
    /// Over all pairs and retained windows.
    pub summary: Summary,
    pub grid: WindowGrid,
    pub fps: f64,
    pub pairing: Pairing,
    pub objective: LagObjective,
    pub lag_aggregate: LagAggregate,
    /// Set when the inputs had different lengths and were cut to the shorter.
    pub truncated: bool,
}

fn summarize(samples: &[(f64, f64)], skipped: usize, agg: LagAggregate) -> Summary {
    let n = samples.len() as f64;
    let corr_mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let corr_std = (samples.iter().map(|s| (s.0 - corr_mean).powi(2)).sum::<f64>() / n).sqrt();
    let corr_lag = match agg {
        LagAggregate::Mean => samples.iter().map(|s| s.1).sum::<f64>() / n,
        LagAggregate::Median => {
            let mut lags: Vec<f64> = samples.iter().map(|s| s.1).collect();
            lags.sort_by(f64::total_cmp);
            let m = lags.len() / 2;
            if lags.is_empty() {
                f64::NAN
            } else if lags.len() % 2 == 1 {
                lags[m]
            } else {
                (lags[m - 1] + lags[m]) / 2.0
            }
        }
    };
    Summary {
        corr_mean,
        corr_std,
        corr_lag,
        retained: samples.len(),
        skipped,
    }
}

fn best_lag(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    start: usize,
    grid: &WindowGrid,
    lags: &[isize],
    objective: LagObjective,
) -> Option<(f64, isize)> {
    let w = grid.width;
    let a = x.slice(ndarray::s![start..start + w]);
    let mut best: Option<(f64, f64, isize)> = None;
    for &lag in lags {
        let from = (start as isize - lag) as usize;
        let Some(r) = pearson(a, y.slice(ndarray::s![from..from + w])) else {
            continue;
        };
        let score = match objective {
            LagObjective::MaxSigned => r,
            LagObjective::MaxAbs => r.abs(),
        };
        if best.is_none_or(|(s, _, _)| score > s) {
            best = Some((score, r, lag));
        }
    }
    best.map(|(_, r, lag)| (r, lag))
}

/// Windowed, lagged cross-correlation of every configured channel pair.
pub fn windowed_lagged_xcorr(
    a: &Signal,
    b: &Signal,
    cfg: &XcorrConfig,
) -> Result<WindowedCorrelation, SocialError> {
    let aligned = align_pair(a, b)?;
    let (a, b) = (&aligned.a, &aligned.b);
    let fps = a.fps();
    let grid = cfg.frames(fps)?;
    let pairing = cfg.pairing.unwrap_or(
        if a.channels() == b.channels() && a.labels() == b.labels() {
            Pairing::Matched
        } else {
            Pairing::AllPairs
        },
    );
    let index_pairs: Vec<(usize, usize)> = match pairing {
        Pairing::Matched if a.channels() != b.channels() => {
            return Err(SocialError::Pairing {
                a: a.channels(),
                b: b.channels(),
            })
        }
        Pairing::Matched => (0..a.channels()).map(|c| (c, c)).collect(),
        Pairing::AllPairs => (0..a.channels())
            .flat_map(|i| (0..b.channels()).map(move |j| (i, j)))
            .collect(),
    };
    let starts = grid.starts(a.frames());
    if starts.is_empty() {
        return Err(SocialError::TooShort {
            required: grid.min_frames(),
            found: a.frames(),
        });
    }
    let lags = grid.lags();

    let pairs: Vec<PairResult> = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = (a.channel(i), b.channel(j));
            let windows: Vec<WindowResult> = starts
                .par_iter()
                .map(|&start| WindowResult {
                    start,
                    start_s: start as f64 / fps,
                    best: best_lag(x, y, start, &grid, &lags, cfg.objective),
                })
                .collect();
            let samples: Vec<(f64, f64)> = windows
                .iter()
                .filter_map(|w| w.best.map(|(r, lag)| (r, lag as f64 / fps)))
                .collect();
            let summary = summarize(&samples, windows.len() - samples.len(), cfg.lag_aggregate);
            PairResult {
                a: i,
                b: j,
                a_label: a.labels()[i].clone(),
                b_label: b.labels()[j].clone(),
                windows,
                summary,
            }
        })
        .collect();

    let samples: Vec<(f64, f64)> = pairs
        .iter()
        .flat_map(|p| p.windows.iter())
        .filter_map(|w| w.best.map(|(r, lag)| (r, lag as f64 / fps)))
        .collect();
    if samples.is_empty() {
        return Err(SocialError::NoValidWindows);
    }
    let skipped = pairs.iter().map(|p| p.summary.skipped).sum();
    Ok(WindowedCorrelation {
        summary: summarize(&samples, skipped, cfg.lag_aggregate),
        pairs,
        grid,
        fps,
        pairing,
        objective: cfg.objective,
        lag_aggregate: cfg.lag_aggregate,
        truncated: aligned.truncated,
    })
}

/// How closely `participant` follows `reference`. With `causality` the
/// participant may only trail; without it lags span both directions.
pub fn imitation(
    participant: &Signal,
    reference: &Signal,
    cfg: &XcorrConfig,
    causality: bool,
) -> Result<WindowedCorrelation, SocialError> {
    let cfg = XcorrConfig {
        mode: if causality {
            LagMode::Directional
        } else {
            LagMode::Bidirectional
        },
        ..*cfg
    };
    windowed_lagged_xcorr(participant, reference, &cfg)
}

/// Mutual coupling between two partners, lags in both directions.
pub fn coordination(
    a: &Signal,
    b: &Signal,
    cfg: &XcorrConfig,
) -> Result<WindowedCorrelation, SocialError> {
    let cfg = XcorrConfig {
        mode: LagMode::Bidirectional,
        ..*cfg
    };
    windowed_lagged_xcorr(a, b, &cfg)
}

/// One row per (pair, window): pair_a, pair_b, window_start_s, corr, lag_s.
/// Skipped windows have NaN correlation and lag.
pub fn windows_table(r: &WindowedCorrelation) -> Result<Signal, SocialError> {
    let rows: Vec<[f64; 5]> = r
        .pairs
        .iter()
        .flat_map(|p| {
            p.windows.iter().map(move |w| {
                let (corr, lag) = w.best.map_or((f64::NAN, f64::NAN), |(c, l)| (c, l as f64 / r.fps));
                [p.a as f64, p.b as f64, w.start_s, corr, lag]
            })
        })
        .collect();
    let data = Array2::from_shape_vec((rows.len(), 5), rows.concat()).expect("five columns");
    let labels = ["pair_a", "pair_b", "window_start_s", "corr", "lag_s"]
        .map(String::from)
        .to_vec();
    Ok(Signal::new(data, 1.0, labels, Modality::Generic)?)
}

/// One row per pair plus a final overall row with pair indices -1.
pub fn summary_table(r: &WindowedCorrelation) -> Result<Signal, SocialError> {
    let row = |a: f64, b: f64, s: &Summary| {
        [a, b, s.corr_mean, s.corr_std, s.corr_lag, s.retained as f64, s.skipped as f64]
    };
    let mut rows: Vec<[f64; 7]> = r
        .pairs
        .iter()
        .map(|p| row(p.a as f64, p.b as f64, &p.summary))
        .collect();
    rows.push(row(-1.0, -1.0, &r.summary));
    let data = Array2::from_shape_vec((rows.len(), 7), rows.concat()).expect("seven columns");
    let labels = [
        "pair_a",
        "pair_b",
        "corr_mean",
        "corr_std",
        "corr_lag",
        "windows_retained",
        "windows_skipped",
    ]
    .map(String::from)
    .to_vec();
    Ok(Signal::new(data, 1.0, labels, Modality::Generic)?)
}
