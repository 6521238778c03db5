use ndarray::Array2;

use super::{ExpressionError, Scale, ScaleSet};
use crate::model::{ExpressionTrack, Modality, Signal};

/// Name of the estimator, recorded alongside results.
pub const DIVERSITY_ESTIMATOR: &str = "dominant-coefficient-entropy";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleDiversity {
    pub scale: Scale,
    /// Shannon entropy of the dominant-coefficient histogram over `ln E`.
    pub entropy: f64,
    pub distinct_dominant_count: usize,
    /// Windows that entered the histogram.
    pub windows_used: usize,
    pub windows_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityScores {
    pub per_scale: Vec<ScaleDiversity>,
    pub estimator: &'static str,
}

/// Entropy of `counts` normalized by `ln categories`; 0 for an empty
/// histogram.
pub fn normalized_entropy(counts: &[usize], categories: usize) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 || categories < 2 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    // a single category gives -0.0
    (h / (categories as f64).ln()).max(0.0) + 0.0
}

/// Range of expression types over time, per scale.
///
/// Time is cut into consecutive windows of the scale length (a trailing
/// partial window is dropped). Each window votes for the coefficient with the
/// largest mean absolute activation; windows with no activation are skipped.
pub fn diversity(e: &ExpressionTrack, scales: &ScaleSet) -> Result<DiversityScores, ExpressionError> {
    let s = e.signal();
    let coefficients = s.channels();
    if coefficients < 2 {
        return Err(ExpressionError::TooFewCoefficients(coefficients));
    }
    let data = s.data();
    let per_scale = scales
        .resolve(s.fps(), s.frames())?
        .into_iter()
        .map(|scale| {
            let w = scale.frames.max(1);
            let windows_total = s.frames() / w;
            let mut counts = vec![0usize; coefficients];
            for k in 0..windows_total {
                let block = data.slice(ndarray::s![k * w..(k + 1) * w, ..]);
                let activation: Vec<f64> = block
                    .columns()
                    .into_iter()
                    .map(|col| col.iter().map(|v| v.abs()).sum::<f64>() / w as f64)
                    .collect();
                let mut best = 0;
                for (c, a) in activation.iter().enumerate() {
                    if *a > activation[best] {
                        best = c;
                    }
                }
                if activation[best] > 0.0 {
                    counts[best] += 1;
                }
            }
            ScaleDiversity {
                scale,
                entropy: normalized_entropy(&counts, coefficients),
                distinct_dominant_count: counts.iter().filter(|&&c| c > 0).count(),
                windows_used: counts.iter().sum(),
                windows_total,
            }
        })
        .collect();
    Ok(DiversityScores {
        per_scale,
        estimator: DIVERSITY_ESTIMATOR,
    })
}

/// One row per scale.
pub fn diversity_table(d: &DiversityScores) -> Result<Signal, ExpressionError> {
    let rows: Vec<f64> = d
        .per_scale
        .iter()
        .flat_map(|p| {
            [
                p.scale.seconds,
                p.entropy,
                p.distinct_dominant_count as f64,
                p.windows_used as f64,
            ]
        })
        .collect();
    let data = Array2::from_shape_vec((d.per_scale.len(), 4), rows).expect("four columns");
    let labels = ["scale_s", "entropy", "distinct_dominant_count", "windows_used"]
        .map(String::from)
        .to_vec();
    Ok(Signal::new(data, 1.0, labels, Modality::Generic)?)
}
