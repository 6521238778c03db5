//! Movement biomechanics: range of motion, path length, mean speed,
//! acceleration and jerk, and log dimensionless jerk.
//!
//! All metrics are computed on a [`Trajectory`], a frames × 2 or 3 matrix of
//! positions. Trajectories come from rectangle centers, pose rotation or
//! translation, or individual landmark points.
//!
//! Smoothness uses the speed-normalized log dimensionless jerk,
//!
//! ```text
//! ldlj = -ln( duration^3 / peak_speed^2 * ∫ |jerk|^2 dt )
//! ```
//!
//! with the integral taken by the trapezoidal rule over frame samples.

use ndarray::{Array2, ArrayView2, Axis};
use thiserror::Error;

use crate::model::{
    derivative, LandmarkTrack, Modality, ModelError, PoseTrack, RectTrack, Signal,
    DEFAULT_ACCURACY,
};

/// Name of the smoothness normalization, recorded in output metadata.
pub const LDLJ_NORMALIZATION: &str = "speed-normalized log dimensionless jerk, trapezoidal integral";
/// Frames needed for a third derivative.
pub const MIN_FRAMES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("trajectory has {found} frames; at least {required} are needed")]
    TooFewFrames { required: usize, found: usize },
    #[error("trajectory dimension must be 2 or 3, got {0}")]
    Dimension(usize),
    #[error("trajectories differ in shape or rate: {0}")]
    ShapeMismatch(String),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where a trajectory was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySource {
    RectCenter,
    PoseTranslation,
    PoseRotation,
    LandmarkPoint(usize),
    Generic,
}

/// Per-frame positions in 2 or 3 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    positions: Array2<f64>,
    fps: f64,
    source: TrajectorySource,
    axes: Vec<String>,
    caution_2d: bool,
}

impl Trajectory {
    pub fn new(
        positions: Array2<f64>,
        fps: f64,
        source: TrajectorySource,
    ) -> Result<Self, KinematicsError> {
        let dims = positions.ncols();
        if dims != 2 && dims != 3 {
            return Err(KinematicsError::Dimension(dims));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(ModelError::InvalidFps(fps).into());
        }
        let axes = ["x", "y", "z"][..dims].iter().map(|s| s.to_string()).collect();
        Ok(Self {
            positions,
            fps,
            source,
            axes,
            caution_2d: false,
        })
    }

    pub fn with_axes(mut self, axes: &[String]) -> Self {
        self.axes = axes.to_vec();
        self
    }

    /// Marks trajectories derived from 2D landmarks, which mix head motion
    /// and camera perspective into the measured movement.
    pub fn with_caution_2d(mut self, caution: bool) -> Self {
        self.caution_2d = caution;
        self
    }

    pub fn positions(&self) -> ArrayView2<'_, f64> {
        self.positions.view()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> usize {
        self.positions.nrows()
    }

    pub fn dims(&self) -> usize {
        self.positions.ncols()
    }

    pub fn source(&self) -> TrajectorySource {
        self.source
    }

    pub fn axes(&self) -> &[String] {
        &self.axes
    }

    pub fn caution_2d(&self) -> bool {
        self.caution_2d
    }

    /// Channels of the trajectory as a generic signal.
    pub fn to_signal(&self) -> Result<Signal, ModelError> {
        Signal::new(
            self.positions.clone(),
            self.fps,
            self.axes.clone(),
            Modality::Generic,
        )
    }
}

/// Rectangle centers `(x + w/2, y + h/2)` over time.
pub fn trajectory_from_rects(r: &RectTrack) -> Result<Trajectory, KinematicsError> {
    if r.signal().frames() == 0 {
        return Err(KinematicsError::Empty);
    }
    Trajectory::new(r.centers(), r.signal().fps(), TrajectorySource::RectCenter)
}

/// Translation (`angular = false`) or rotation (`angular = true`) channels
/// of a pose track.
pub fn trajectory_from_pose(p: &PoseTrack, angular: bool) -> Result<Trajectory, KinematicsError> {
    let fps = p.signal().fps();
    let t = if angular {
        Trajectory::new(p.rotation().to_owned(), fps, TrajectorySource::PoseRotation)?
            .with_axes(p.rotation_labels())
    } else {
        Trajectory::new(p.translation().to_owned(), fps, TrajectorySource::PoseTranslation)?
            .with_axes(p.translation_labels())
    };
    Ok(t)
}

/// One trajectory per landmark point, in template order.
pub fn trajectories_from_landmarks(l: &LandmarkTrack) -> Result<Vec<Trajectory>, KinematicsError> {
    let fps = l.signal().fps();
    (0..l.points())
        .map(|p| {
            Ok(Trajectory::new(
                l.point_series(p).to_owned(),
                fps,
                TrajectorySource::LandmarkPoint(p),
            )?
            .with_caution_2d(l.dims() == 2))
        })
        .collect()
}

/// Biomechanics of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsReport {
    /// max − min per axis.
    pub range_of_motion: Vec<f64>,
    pub total_path_length: f64,
    pub avg_speed: f64,
    pub avg_acceleration: f64,
    pub avg_jerk: f64,
    /// `None` when the trajectory never moves (zero peak speed).
    pub ldlj: Option<f64>,
    pub duration_s: f64,
    pub caution_2d: bool,
}

fn row_norms(m: &Array2<f64>) -> Vec<f64> {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]) * dt)
        .sum()
}

/// Computes every biomechanics metric for `t`.
pub fn motion_kinematics(t: &Trajectory) -> Result<KinematicsReport, KinematicsError> {
    let n = t.frames();
    if n < MIN_FRAMES {
        return Err(KinematicsError::TooFewFrames {
            required: MIN_FRAMES,
            found: n,
        });
    }
    let pos = t.positions();
    let range_of_motion = pos
        .axis_iter(Axis(1))
        .map(|c| {
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect();
    let total_path_length = (1..n)
        .map(|i| {
            pos.row(i)
                .iter()
                .zip(pos.row(i - 1))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();

    let fps = t.fps();
    let velocity = derivative(pos, fps, 1, DEFAULT_ACCURACY)?;
    let acceleration = derivative(pos, fps, 2, DEFAULT_ACCURACY)?;
    let jerk = derivative(pos, fps, 3, DEFAULT_ACCURACY)?;
    let speed = row_norms(&velocity);
    let acc = row_norms(&acceleration);
    let jerk_mag = row_norms(&jerk);

    let duration_s = (n - 1) as f64 / fps;
    let peak_speed = speed.iter().copied().fold(0.0, f64::max);
    let ldlj = (peak_speed > 0.0 && peak_speed.is_finite()).then(|| {
        let squared: Vec<f64> = jerk_mag.iter().map(|j| j * j).collect();
        let integral = trapezoid(&squared, 1.0 / fps);
        -(duration_s.powi(3) / (peak_speed * peak_speed) * integral).ln()
    });

    Ok(KinematicsReport {
        range_of_motion,
        total_path_length,
        avg_speed: mean(&speed),
        avg_acceleration: mean(&acc),
        avg_jerk: mean(&jerk_mag),
        ldlj,
        duration_s,
        caution_2d: t.caution_2d(),
    })
}

/// Reference for [`relative_motion`].
#[derive(Debug, Clone, Copy)]
pub enum RelativeTo<'a> {
    /// Subtract another trajectory frame by frame.
    Trajectory(&'a Trajectory),
    /// Subtract the trajectory's own first frame.
    FirstFrame,
}

/// Displacement of `t` relative to a reference trajectory or its first frame.
pub fn relative_motion(t: &Trajectory, reference: RelativeTo<'_>) -> Result<Trajectory, KinematicsError> {
    let positions = match reference {
        RelativeTo::Trajectory(r) => {
            if r.positions.dim() != t.positions.dim() || r.fps != t.fps {
                return Err(KinematicsError::ShapeMismatch(format!(
                    "{}×{} at {} Hz vs {}×{} at {} Hz",
                    t.frames(),
                    t.dims(),
                    t.fps,
                    r.frames(),
                    r.dims(),
                    r.fps
                )));
            }
            &t.positions - &r.positions
        }
        RelativeTo::FirstFrame => {
            if t.frames() == 0 {
                return Err(KinematicsError::Empty);
            }
            let first = t.positions.row(0).to_owned();
            &t.positions - &first
        }
    };
    Ok(Trajectory {
        positions,
        ..t.clone()
    })
}

/// Tabulates reports as a generic signal, one row per trajectory.
///
/// Columns are `range_<axis>…, path_length, avg_speed, avg_acc, avg_jerk,
/// ldlj, duration_s, caution_2d`; the compatibility view keeps only the
/// range, path length, speed and acceleration columns. Undefined smoothness
/// is written as NaN and the caution flag as 0/1. Rows are not frames, so
/// the table is stamped with a nominal rate of 1 Hz.
pub fn report_table(
    axes: &[String],
    reports: &[KinematicsReport],
    compat: bool,
) -> Result<Signal, ModelError> {
    let mut labels: Vec<String> = axes.iter().map(|a| format!("range_{a}")).collect();
    labels.extend(["path_length", "avg_speed", "avg_acc"].map(String::from));
    if !compat {
        labels.extend(["avg_jerk", "ldlj", "duration_s", "caution_2d"].map(String::from));
    }
    let rows: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| {
            let mut row = r.range_of_motion.clone();
            row.extend([r.total_path_length, r.avg_speed, r.avg_acceleration]);
            if !compat {
                row.extend([
                    r.avg_jerk,
                    r.ldlj.unwrap_or(f64::NAN),
                    r.duration_s,
                    f64::from(u8::from(r.caution_2d)),
                ]);
            }
            row
        })
        .collect();
    Signal::from_rows(&rows, labels.len(), 1.0, labels, Modality::Generic)
}
