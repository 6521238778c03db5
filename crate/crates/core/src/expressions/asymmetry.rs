use nalgebra::{Matrix3, Vector3};
use ndarray::{Array2, ArrayView2};

use super::ExpressionError;
use crate::model::{LandmarkTemplate, LandmarkTrack, MirrorTemplate, Modality, Signal};

/// Per-frame asymmetry scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetryScores {
    /// One channel, `asymmetry`; NaN where the symmetry plane is undefined.
    pub scores: Signal,
    /// Set for 2D input, where the mirror line is only an approximation.
    pub caution_2d: bool,
}

/// Mirror image of `p` across the plane through `c` with unit normal `n`.
pub fn reflect_across_plane(p: &Vector3<f64>, c: &Vector3<f64>, n: &Vector3<f64>) -> Vector3<f64> {
    p - 2.0 * (p - c).dot(n) * n
}

fn point(frame: &ArrayView2<f64>, i: usize) -> Vector3<f64> {
    let row = frame.row(i);
    Vector3::new(row[0], row[1], if row.len() > 2 { row[2] } else { 0.0 })
}

/// Total-least-squares plane through `points`, as centroid and unit normal.
/// `None` if the points do not span a plane.
fn fit_plane(points: &[Vector3<f64>]) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if !(largest > 0.0) || middle <= largest * 1e-12 {
        return None;
    }
    let normal = eig.eigenvectors.column(order[0]).into_owned();
    Some((centroid, normal.normalize()))
}

/// Frame score: mean distance between each mirrored left point and its right
/// partner, divided by the interocular distance.
fn frame_score(frame: ArrayView2<f64>, m: &MirrorTemplate, planar: bool) -> f64 {
    let (ea, eb) = (point(&frame, m.interocular.0), point(&frame, m.interocular.1));
    let iod = (eb - ea).norm();
    if !(iod.is_finite() && iod > 0.0) {
        return f64::NAN;
    }
    let plane = if planar {
        Some(((ea + eb) / 2.0, (eb - ea) / iod))
    } else {
        let anchors: Vec<Vector3<f64>> = m
            .midline
            .iter()
            .map(|&i| point(&frame, i))
            .chain(
                m.pairs
                    .iter()
                    .map(|&(l, r)| (point(&frame, l) + point(&frame, r)) / 2.0),
            )
            .collect();
        fit_plane(&anchors)
    };
    let Some((c, n)) = plane else {
        return f64::NAN;
    };
    let total: f64 = m
        .pairs
        .iter()
        .map(|&(l, r)| (reflect_across_plane(&point(&frame, l), &c, &n) - point(&frame, r)).norm())
        .sum();
    total / m.pairs.len() as f64 / iod
}

fn same_template(track_id: &str, mirror_id: &str) -> bool {
    match (LandmarkTemplate::lookup(track_id), LandmarkTemplate::lookup(mirror_id)) {
        (Some(a), Some(b)) => a == b,
        _ => track_id == mirror_id,
    }
}

/// Per-frame facial asymmetry of a landmark track.
///
/// In 3D the symmetry plane is fitted to the midline points and the
/// midpoints of mirrored pairs. In 2D the mirror line is the perpendicular
/// bisector of the interocular segment and the result carries a caution
/// flag.
pub fn asymmetry(
    l: &LandmarkTrack,
    m: &MirrorTemplate,
) -> Result<AsymmetryScores, ExpressionError> {
    let id_mismatch = l
        .template_id()
        .is_some_and(|id| !same_template(id, &m.template_id));
    if l.points() != m.points || id_mismatch {
        return Err(ExpressionError::TemplateMismatch {
            expected: m.template_id.clone(),
            found: format!(
                "{} points, template {}",
                l.points(),
                l.template_id().unwrap_or("unset")
            ),
        });
    }
    let planar = l.dims() == 2;
    let scores: Vec<f64> = (0..l.frames())
        .map(|f| frame_score(l.frame_points(f), m, planar))
        .collect();
    let n = scores.len();
    let data = Array2::from_shape_vec((n, 1), scores).expect("one column");
    let scores = Signal::new(data, l.signal().fps(), vec!["asymmetry".into()], Modality::Generic)?;
    Ok(AsymmetryScores {
        scores,
        caution_2d: planar,
    })
}
