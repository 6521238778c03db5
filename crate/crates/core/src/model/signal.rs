use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::template::LandmarkTemplate;
use super::ModelError;

/// What kind of behavioral signal a [`Signal`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Rects,
    Landmarks2d,
    Landmarks3d,
    Pose,
    Expressions,
    Generic,
}

impl Modality {
    pub const ALL: [Modality; 6] = [
        Modality::Rects,
        Modality::Landmarks2d,
        Modality::Landmarks3d,
        Modality::Pose,
        Modality::Expressions,
        Modality::Generic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Rects => "rects",
            Modality::Landmarks2d => "landmarks2d",
            Modality::Landmarks3d => "landmarks3d",
            Modality::Pose => "pose",
            Modality::Expressions => "expressions",
            Modality::Generic => "generic",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Modality {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ModelError::UnknownModality(s.to_string()))
    }
}

/// Descriptive attributes carried alongside the sample matrix.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackMeta {
    /// Landmark template identifier, e.g. `ibug51`.
    pub template_id: Option<String>,
    /// Expression basis identifier.
    pub basis_id: Option<String>,
    /// Name of the backend that produced the track.
    pub source_backend: Option<String>,
    /// Free-form unit description (`radians`, `degrees`, `pixels`, ...).
    pub units: Option<String>,
    /// 3D landmarks corrected for pose and identity.
    pub canonicalized: bool,
}

/// A dense, frame-indexed, multichannel time series.
///
/// Rows are frames and columns are channels. Every constructor checks that
/// the sampling rate is positive and finite and that channel labels are
/// unique and match the column count. Modality-specific layout rules are
/// checked separately by [`Signal::validate_modality`] so that a signal can
/// be held in memory before it is committed to a typed view or to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    data: Array2<f64>,
    fps: f64,
    labels: Vec<String>,
    modality: Modality,
    meta: TrackMeta,
}

impl Signal {
    pub fn new(
        data: Array2<f64>,
        fps: f64,
        labels: Vec<String>,
        modality: Modality,
    ) -> Result<Self, ModelError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(ModelError::InvalidFps(fps));
        }
        if labels.len() != data.ncols() {
            return Err(ModelError::LabelCount {
                labels: labels.len(),
                channels: data.ncols(),
            });
        }
        if labels.is_empty() {
            return Err(ModelError::NoChannels);
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(ModelError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
            fps,
            labels,
            modality,
            meta: TrackMeta::default(),
        })
    }

    /// Builds a signal from per-frame rows. `channels` fixes the width so
    /// that an empty row list still produces a well-formed 0-frame signal.
    pub fn from_rows(
        rows: &[Vec<f64>],
        channels: usize,
        fps: f64,
        labels: Vec<String>,
        modality: Modality,
    ) -> Result<Self, ModelError> {
        let mut flat = Vec::with_capacity(rows.len() * channels);
        for (frame, row) in rows.iter().enumerate() {
            if row.len() != channels {
                return Err(ModelError::RowWidth {
                    frame,
                    expected: channels,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let data = Array2::from_shape_vec((rows.len(), channels), flat)
            .expect("row-major buffer matches shape");
        Self::new(data, fps, labels, modality)
    }

    /// Single-channel convenience constructor.
    pub fn from_channel(values: &[f64], fps: f64, label: &str) -> Result<Self, ModelError> {
        let data = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .expect("column buffer matches shape");
        Self::new(data, fps, vec![label.to_string()], Modality::Generic)
    }

    pub fn with_meta(mut self, meta: TrackMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    /// Returns a copy of this signal with different sample values but the
    /// same labels, rate and metadata.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self, ModelError> {
        Ok(Self::new(data, self.fps, self.labels.clone(), self.modality)?
            .with_meta(self.meta.clone()))
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> ArrayView1<'_, f64> {
        self.data.column(c)
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        self.data
            .row(f)
            .to_slice()
            .expect("signal data is kept in standard layout")
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn meta(&self) -> &TrackMeta {
        &self.meta
    }

    /// Duration spanned by the samples, `(frames - 1) / fps`.
    pub fn duration_s(&self) -> f64 {
        self.frames().saturating_sub(1) as f64 / self.fps
    }

    /// Keeps the first `frames` rows.
    pub fn truncated(&self, frames: usize) -> Self {
        let n = frames.min(self.frames());
        Self {
            data: self.data.slice_axis(Axis(0), (0..n).into()).to_owned(),
            fps: self.fps,
            labels: self.labels.clone(),
            modality: self.modality,
            meta: self.meta.clone(),
        }
    }

    /// Checks the channel layout rules of the declared modality.
    pub fn validate_modality(&self) -> Result<(), ModelError> {
        let channels = self.channels();
        let bad_layout = |expected: &str| ModelError::ModalityLayout {
            modality: self.modality,
            expected: expected.to_string(),
            found: channels,
        };
        match self.modality {
            Modality::Rects => {
                if channels != 4 && channels != 5 {
                    return Err(bad_layout("4 (x, y, w, h) or 5 (with confidence)"));
                }
                for (frame, row) in self.data.rows().into_iter().enumerate() {
                    let (w, h) = (row[2], row[3]);
                    // NaN fails both comparisons and is rejected as well
                    if !(w >= 0.0 && h >= 0.0) {
                        return Err(ModelError::NegativeExtent { frame, w, h });
                    }
                    if channels == 5 && !(0.0..=1.0).contains(&row[4]) {
                        return Err(ModelError::Confidence {
                            frame,
                            value: row[4],
                        });
                    }
                }
            }
            Modality::Landmarks2d | Modality::Landmarks3d => {
                let dims = if self.modality == Modality::Landmarks2d { 2 } else { 3 };
                if channels % dims != 0 {
                    return Err(bad_layout(&format!("a multiple of {dims}")));
                }
                if dims == 2 && self.meta.canonicalized {
                    return Err(ModelError::CanonicalizedIn2d);
                }
                if let Some(id) = &self.meta.template_id {
                    if let Some(template) = LandmarkTemplate::lookup(id) {
                        if template.points != channels / dims {
                            return Err(ModelError::TemplatePoints {
                                template: id.clone(),
                                expected: template.points,
                                found: channels / dims,
                            });
                        }
                    }
                }
            }
            Modality::Pose => {
                if channels != 6 {
                    return Err(bad_layout("6 (pitch, yaw, roll, tx, ty, tz)"));
                }
            }
            Modality::Expressions | Modality::Generic => {}
        }
        Ok(())
    }
}

/// Two signals cut to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub a: Signal,
    pub b: Signal,
    /// Set when either input lost frames.
    pub truncated: bool,
}

/// Truncates both signals to the shorter frame count. Signals must share a
/// sampling rate; resampling is not attempted.
pub fn align_pair(a: &Signal, b: &Signal) -> Result<AlignedPair, ModelError> {
    if a.fps() != b.fps() {
        return Err(ModelError::FpsMismatch {
            a: a.fps(),
            b: b.fps(),
        });
    }
    let n = a.frames().min(b.frames());
    Ok(AlignedPair {
        truncated: a.frames() != n || b.frames() != n,
        a: a.truncated(n),
        b: b.truncated(n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn generic(frames: usize, fps: f64) -> Signal {
        let data = Array2::from_shape_fn((frames, 2), |(i, j)| (i * 2 + j) as f64);
        Signal::new(data, fps, vec!["a".into(), "b".into()], Modality::Generic).unwrap()
    }

    #[test]
    fn rejects_bad_fps_and_labels() {
        let data = Array2::zeros((3, 2));
        for fps in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                Signal::new(data.clone(), fps, vec!["a".into(), "b".into()], Modality::Generic),
                Err(ModelError::InvalidFps(_))
            ));
        }
        assert!(matches!(
            Signal::new(data.clone(), 30.0, vec!["a".into()], Modality::Generic),
            Err(ModelError::LabelCount { .. })
        ));
        assert!(matches!(
            Signal::new(data, 30.0, vec!["a".into(), "a".into()], Modality::Generic),
            Err(ModelError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn align_identity_case() {
        let a = generic(300, 30.0);
        let b = generic(300, 30.0);
        let p = align_pair(&a, &b).unwrap();
        assert!(!p.truncated);
        assert_eq!(p.a, a);
        assert_eq!(p.b, b);
    }

    #[test]
    fn align_truncates_longer() {
        let p = align_pair(&generic(310, 30.0), &generic(300, 30.0)).unwrap();
        assert!(p.truncated);
        assert_eq!(p.a.frames(), 300);
        assert_eq!(p.b.frames(), 300);
    }

    #[test]
    fn align_rejects_rate_mismatch() {
        let err = align_pair(&generic(10, 30.0), &generic(10, 25.0)).unwrap_err();
        assert!(matches!(err, ModelError::FpsMismatch { .. }));
    }

    #[test]
    fn align_is_idempotent() {
        let once = align_pair(&generic(17, 30.0), &generic(12, 30.0)).unwrap();
        let twice = align_pair(&once.a, &once.b).unwrap();
        assert_eq!(once.a, twice.a);
        assert_eq!(once.b, twice.b);
        assert!(!twice.truncated);
    }

    #[test]
    fn pose_layout_needs_six_channels() {
        let data = Array2::zeros((2, 5));
        let labels = (0..5).map(|i| format!("c{i}")).collect();
        let s = Signal::new(data, 30.0, labels, Modality::Pose).unwrap();
        assert!(matches!(
            s.validate_modality(),
            Err(ModelError::ModalityLayout { found: 5, .. })
        ));
    }

    #[test]
    fn rect_extents_must_be_non_negative() {
        let labels = ["x", "y", "w", "h"].map(String::from).to_vec();
        let s = Signal::from_rows(&[vec![0.0, 0.0, -1.0, 2.0]], 4, 30.0, labels, Modality::Rects)
            .unwrap();
        assert!(matches!(
            s.validate_modality(),
            Err(ModelError::NegativeExtent { frame: 0, .. })
        ));
    }

    #[test]
    fn canonicalized_2d_is_rejected() {
        let labels = ["x0", "y0"].map(String::from).to_vec();
        let s = Signal::from_rows(&[vec![0.0, 0.0]], 2, 30.0, labels, Modality::Landmarks2d)
            .unwrap()
            .with_meta(TrackMeta {
                canonicalized: true,
                ..Default::default()
            });
        assert!(matches!(s.validate_modality(), Err(ModelError::CanonicalizedIn2d)));
    }
}
