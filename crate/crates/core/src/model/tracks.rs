//! Modality-specific views over [`Signal`].
//!
//! Each view validates the layout once at construction and then exposes
//! typed accessors. The underlying signal stays available via `signal()`.

use ndarray::{s, Array2, ArrayView2};

use super::template::LandmarkTemplate;
use super::{Modality, ModelError, Signal};

/// Canonical channel order of a pose track.
pub const POSE_LABELS: [&str; 6] = ["pitch", "yaw", "roll", "tx", "ty", "tz"];
/// Canonical channel order of a rectangle track.
pub const RECT_LABELS: [&str; 5] = ["x", "y", "w", "h", "confidence"];

fn expect_modality(signal: &Signal, expected: &[Modality]) -> Result<(), ModelError> {
    if expected.contains(&signal.modality()) {
        Ok(())
    } else {
        Err(ModelError::WrongModality {
            expected: expected
                .iter()
                .map(|m| m.as_str())
                .collect::<Vec<_>>()
                .join(" or "),
            found: signal.modality(),
        })
    }
}

/// Face rectangles: `x, y, w, h` plus optional confidence per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RectTrack {
    signal: Signal,
}

impl RectTrack {
    pub fn new(signal: Signal) -> Result<Self, ModelError> {
        expect_modality(&signal, &[Modality::Rects])?;
        signal.validate_modality()?;
        Ok(Self { signal })
    }

    /// Builds a track from `(x, y, w, h)` tuples.
    pub fn from_boxes(boxes: &[[f64; 4]], fps: f64) -> Result<Self, ModelError> {
        let rows: Vec<Vec<f64>> = boxes.iter().map(|b| b.to_vec()).collect();
        let labels = RECT_LABELS[..4].iter().map(|s| s.to_string()).collect();
        Self::new(Signal::from_rows(&rows, 4, fps, labels, Modality::Rects)?)
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn has_confidence(&self) -> bool {
        self.signal.channels() == 5
    }

    /// Per-frame rectangle centers, frames × 2.
    pub fn centers(&self) -> Array2<f64> {
        let d = self.signal.data();
        Array2::from_shape_fn((d.nrows(), 2), |(f, axis)| {
            d[[f, axis]] + d[[f, axis + 2]] / 2.0
        })
    }
}

/// Per-frame landmark positions, `points × dims` flattened point-major
/// (`x0, y0[, z0], x1, ...`).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack {
    signal: Signal,
    dims: usize,
}

impl LandmarkTrack {
    pub fn new(signal: Signal) -> Result<Self, ModelError> {
        expect_modality(&signal, &[Modality::Landmarks2d, Modality::Landmarks3d])?;
        signal.validate_modality()?;
        let dims = if signal.modality() == Modality::Landmarks2d { 2 } else { 3 };
        Ok(Self { signal, dims })
    }

    /// Creates a track from a frames × (points·dims) matrix with generated
    /// `x0, y0, z0, ...` labels.
    pub fn from_matrix(
        data: Array2<f64>,
        dims: usize,
        fps: f64,
        template_id: Option<&str>,
        canonicalized: bool,
    ) -> Result<Self, ModelError> {
        let modality = match dims {
            2 => Modality::Landmarks2d,
            3 => Modality::Landmarks3d,
            _ => return Err(ModelError::Dimensions(dims)),
        };
        let labels = landmark_labels(data.ncols() / dims, dims);
        if labels.len() != data.ncols() {
            return Err(ModelError::ModalityLayout {
                modality,
                expected: format!("a multiple of {dims}"),
                found: data.ncols(),
            });
        }
        let signal = Signal::new(data, fps, labels, modality)?.with_meta(super::TrackMeta {
            template_id: template_id.map(str::to_string),
            canonicalized,
            ..Default::default()
        });
        Self::new(signal)
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points(&self) -> usize {
        self.signal.channels() / self.dims
    }

    pub fn frames(&self) -> usize {
        self.signal.frames()
    }

    pub fn template_id(&self) -> Option<&str> {
        self.signal.meta().template_id.as_deref()
    }

    pub fn template(&self) -> Option<LandmarkTemplate> {
        self.template_id().and_then(LandmarkTemplate::lookup)
    }

    pub fn canonicalized(&self) -> bool {
        self.signal.meta().canonicalized
    }

    /// Points of one frame as a `points × dims` view.
    pub fn frame_points(&self, frame: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.points(), self.dims), self.signal.frame(frame))
            .expect("frame width is points × dims")
    }

    /// Trajectory of a single point, frames × dims.
    pub fn point_series(&self, point: usize) -> ArrayView2<'_, f64> {
        let start = point * self.dims;
        self.signal
            .data()
            .slice_move(s![.., start..start + self.dims])
    }
}

/// Channel labels `x0, y0[, z0], x1, ...`.
pub fn landmark_labels(points: usize, dims: usize) -> Vec<String> {
    let axes = ["x", "y", "z"];
    (0..points)
        .flat_map(|p| axes[..dims].iter().map(move |a| format!("{a}{p}")))
        .collect()
}

/// Head pose: three rotations (radians) followed by three translations.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTrack {
    signal: Signal,
}

impl PoseTrack {
    pub fn new(signal: Signal) -> Result<Self, ModelError> {
        expect_modality(&signal, &[Modality::Pose])?;
        signal.validate_modality()?;
        Ok(Self { signal })
    }

    /// Rows of `[pitch, yaw, roll, tx, ty, tz]`.
    pub fn from_rows(rows: &[[f64; 6]], fps: f64) -> Result<Self, ModelError> {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let labels = POSE_LABELS.iter().map(|s| s.to_string()).collect();
        Self::new(Signal::from_rows(&rows, 6, fps, labels, Modality::Pose)?)
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn rotation(&self) -> ArrayView2<'_, f64> {
        self.signal.data().slice_move(s![.., 0..3])
    }

    pub fn translation(&self) -> ArrayView2<'_, f64> {
        self.signal.data().slice_move(s![.., 3..6])
    }

    pub fn rotation_labels(&self) -> &[String] {
        &self.signal.labels()[0..3]
    }

    pub fn translation_labels(&self) -> &[String] {
        &self.signal.labels()[3..6]
    }
}

/// Expression coefficients, one channel per basis element.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTrack {
    signal: Signal,
}

impl ExpressionTrack {
    /// Accepts `expressions` signals and, for convenience, generic ones.
    pub fn new(signal: Signal) -> Result<Self, ModelError> {
        expect_modality(&signal, &[Modality::Expressions, Modality::Generic])?;
        Ok(Self { signal })
    }

    pub fn from_matrix(data: Array2<f64>, fps: f64) -> Result<Self, ModelError> {
        let labels = (0..data.ncols()).map(|i| format!("e{i}")).collect();
        Self::new(Signal::new(data, fps, labels, Modality::Expressions)?)
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn coefficients(&self) -> usize {
        self.signal.channels()
    }

    pub fn basis_id(&self) -> Option<&str> {
        self.signal.meta().basis_id.as_deref()
    }

    /// Local-basis coefficients carry a basis identifier.
    pub fn is_local(&self) -> bool {
        self.basis_id().is_some()
    }
}
