use ndarray::Array2;

use super::{multiscale_decompose_with, ExpressionError, PeakConfig, Scale, ScaleSet};
use crate::model::{ExpressionTrack, Modality, Signal};

/// Coefficient index used for pooled rows in tables.
pub const POOLED_COEFFICIENT: f64 = -1.0;

/// How the intensity of a component is summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntensityMeasure {
    /// Mean amplitude of detected peaks, 0 without peaks.
    #[default]
    PeakAmplitude,
    /// Root mean square of the component.
    Rms,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExpressivityConfig {
    pub peaks: PeakConfig,
    pub intensity: IntensityMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoefficientStats {
    pub intensity: f64,
    /// Population standard deviation of the component.
    pub variability: f64,
    /// Peaks per second of recording.
    pub peak_rate: f64,
    pub peaks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleStats {
    pub scale: Scale,
    pub per_coefficient: Vec<CoefficientStats>,
    /// Mean of each field across coefficients.
    pub pooled: CoefficientStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressivityStats {
    pub scales: Vec<ScaleStats>,
    pub config: ExpressivityConfig,
}

pub fn expressivity(
    e: &ExpressionTrack,
    scales: &ScaleSet,
) -> Result<ExpressivityStats, ExpressionError> {
    expressivity_with(e, scales, ExpressivityConfig::default())
}

pub fn expressivity_with(
    e: &ExpressionTrack,
    scales: &ScaleSet,
    config: ExpressivityConfig,
) -> Result<ExpressivityStats, ExpressionError> {
    let s = e.signal();
    let d = multiscale_decompose_with(s, scales, config.peaks)?;
    let recording_s = s.frames() as f64 / s.fps();
    let scales = d
        .scales
        .iter()
        .zip(&d.components)
        .zip(&d.peaks)
        .map(|((&scale, comp), peaks)| {
            let per_coefficient: Vec<CoefficientStats> = (0..comp.channels())
                .map(|c| {
                    let x = comp.channel(c);
                    let n = x.len() as f64;
                    let mean = x.sum() / n;
                    let variability = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                    let found = &peaks[c];
                    let intensity = match config.intensity {
                        IntensityMeasure::PeakAmplitude if found.is_empty() => 0.0,
                        IntensityMeasure::PeakAmplitude => {
                            found.iter().map(|p| p.amplitude).sum::<f64>() / found.len() as f64
                        }
                        IntensityMeasure::Rms => (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
                    };
                    CoefficientStats {
                        intensity,
                        variability,
                        peak_rate: found.len() as f64 / recording_s,
                        peaks: found.len(),
                    }
                })
                .collect();
            let k = per_coefficient.len() as f64;
            let pooled = CoefficientStats {
                intensity: per_coefficient.iter().map(|c| c.intensity).sum::<f64>() / k,
                variability: per_coefficient.iter().map(|c| c.variability).sum::<f64>() / k,
                peak_rate: per_coefficient.iter().map(|c| c.peak_rate).sum::<f64>() / k,
                peaks: per_coefficient.iter().map(|c| c.peaks).sum(),
            };
            ScaleStats {
                scale,
                per_coefficient,
                pooled,
            }
        })
        .collect();
    Ok(ExpressivityStats { scales, config })
}

/// One row per (scale, coefficient), followed by a pooled row per scale with
/// coefficient [`POOLED_COEFFICIENT`].
pub fn expressivity_table(stats: &ExpressivityStats) -> Result<Signal, ExpressionError> {
    let mut rows = Vec::new();
    for sc in &stats.scales {
        for (c, st) in sc.per_coefficient.iter().enumerate() {
            rows.push([sc.scale.seconds, c as f64, st.intensity, st.variability, st.peak_rate]);
        }
        let p = &sc.pooled;
        rows.push([sc.scale.seconds, POOLED_COEFFICIENT, p.intensity, p.variability, p.peak_rate]);
    }
    let n = rows.len();
    let data = Array2::from_shape_vec((n, 5), rows.concat()).expect("five columns");
    let labels = ["scale_s", "coefficient", "intensity", "variability", "peak_rate"]
        .map(String::from)
        .to_vec();
    Ok(Signal::new(data, 1.0, labels, Modality::Generic)?)
}
