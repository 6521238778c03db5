//! In-memory time-series representations shared by every measurement.

mod diff;
mod signal;
mod template;
mod tracks;

use thiserror::Error;

pub use diff::{derivative, finite_difference, min_frames, DEFAULT_ACCURACY};
pub use signal::{align_pair, AlignedPair, Modality, Signal, TrackMeta};
pub use template::{LandmarkTemplate, MirrorTemplate};
pub use tracks::{
    landmark_labels, ExpressionTrack, LandmarkTrack, PoseTrack, RectTrack, POSE_LABELS,
    RECT_LABELS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("{labels} channel labels for {channels} data columns")]
    LabelCount { labels: usize, channels: usize },
    #[error("a signal needs at least one channel")]
    NoChannels,
    #[error("duplicate channel label `{0}`")]
    DuplicateLabel(String),
    #[error("frame {frame} has {found} values, expected {expected}")]
    RowWidth {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown modality `{0}`")]
    UnknownModality(String),
    #[error("{modality} signal needs {expected} channels, found {found}")]
    ModalityLayout {
        modality: Modality,
        expected: String,
        found: usize,
    },
    #[error("expected a {expected} signal, found {found}")]
    WrongModality { expected: String, found: Modality },
    #[error("rectangle at frame {frame} has negative extent (w={w}, h={h})")]
    NegativeExtent { frame: usize, w: f64, h: f64 },
    #[error("confidence at frame {frame} is {value}, outside [0, 1]")]
    Confidence { frame: usize, value: f64 },
    #[error("2D landmarks cannot be canonicalized")]
    CanonicalizedIn2d,
    #[error("template `{template}` has {expected} points, track has {found}")]
    TemplatePoints {
        template: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown landmark template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid mirror template: {0}")]
    MirrorTemplate(String),
    #[error("landmark dimension must be 2 or 3, got {0}")]
    Dimensions(usize),
    #[error("derivative order must be at least 1")]
    DerivativeOrder,
    #[error("too few frames: need at least {required}, found {found}")]
    TooFewFrames { required: usize, found: usize },
    #[error("sampling rates differ ({a} Hz vs {b} Hz); resample before pairing")]
    FpsMismatch { a: f64, b: f64 },
}
