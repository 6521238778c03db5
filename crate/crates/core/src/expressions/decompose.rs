use ndarray::Array2;

use super::{ExpressionError, Scale, ScaleSet};
use crate::model::Signal;

/// Peak-detection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig {
    /// A peak must reach `mean + z · std` of its component.
    pub z: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self { z: 1.0 }
    }
}

/// A detected event in one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frame: usize,
    pub amplitude: f64,
}

/// A signal split into per-scale components and a smooth residual.
///
/// With smoothing levels `M0 = s` and `Mi` the centered moving average of
/// `s` over the i-th window, component `i` is `M(i-1) − Mi` and the residual
/// is the last level, so components and residual sum back to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleDecomposition {
    pub scales: Vec<Scale>,
    pub components: Vec<Signal>,
    pub residual: Signal,
    /// `peaks[scale][channel]`, ordered by frame.
    pub peaks: Vec<Vec<Vec<Peak>>>,
    pub peak_config: PeakConfig,
}

impl MultiscaleDecomposition {
    /// Sum of all components plus the residual.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.components
            .iter()
            .fold(self.residual.data().to_owned(), |acc, c| acc + &c.data())
    }
}

/// Centered moving average with window `w`; the window covers offsets
/// `-(w/2) ..= w - w/2 - 1` and shrinks at the edges.
pub fn centered_moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    let back = (w / 2) as isize;
    (0..n as isize)
        .map(|i| {
            let lo = (i - back).clamp(0, n as isize) as usize;
            let hi = (i - back + w as isize).clamp(0, n as isize) as usize;
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Strict local maxima that are positive, reach `mean + z·std`, and lie at
/// least `min_separation` frames apart. Taller peaks win conflicts; equal
/// heights favour the earlier frame.
pub fn detect_peaks(x: &[f64], min_separation: usize, z: f64) -> Vec<Peak> {
    if x.len() < 3 {
        return Vec::new();
    }
    let (mean, std) = mean_std(x);
    let threshold = mean + z * std;
    let mut candidates: Vec<Peak> = (1..x.len() - 1)
        .filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] >= threshold && x[i] > 0.0)
        .map(|i| Peak {
            frame: i,
            amplitude: x[i],
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.amplitude
            .total_cmp(&a.amplitude)
            .then(a.frame.cmp(&b.frame))
    });
    let mut kept: Vec<Peak> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| k.frame.abs_diff(c.frame) >= min_separation) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|p| p.frame);
    kept
}

/// Decomposes `s` with the default peak threshold.
pub fn multiscale_decompose(
    s: &Signal,
    scales: &ScaleSet,
) -> Result<MultiscaleDecomposition, ExpressionError> {
    multiscale_decompose_with(s, scales, PeakConfig::default())
}

pub fn multiscale_decompose_with(
    s: &Signal,
    scales: &ScaleSet,
    peak_config: PeakConfig,
) -> Result<MultiscaleDecomposition, ExpressionError> {
    let n = s.frames();
    let resolved = scales.resolve(s.fps(), n)?;
    let whole = matches!(scales, ScaleSet::Whole);
    let required = if whole {
        1
    } else {
        2 * resolved.last().map_or(0, |sc| sc.frames)
    };
    if n < required {
        return Err(ExpressionError::TooShort { required, found: n });
    }
    if let Some(channel) = (0..s.channels()).find(|&c| s.channel(c).iter().any(|v| !v.is_finite())) {
        return Err(ExpressionError::NonFinite { channel });
    }

    let channels = s.channels();
    let mut components = vec![Array2::<f64>::zeros((n, channels)); resolved.len()];
    let mut residual = Array2::<f64>::zeros((n, channels));
    for c in 0..channels {
        let x = s.channel(c).to_vec();
        let mut previous = x.clone();
        for (i, scale) in resolved.iter().enumerate() {
            let level = if whole {
                let (mean, _) = mean_std(&x);
                vec![mean; n]
            } else {
                centered_moving_average(&x, scale.frames)
            };
            for f in 0..n {
                components[i][[f, c]] = previous[f] - level[f];
            }
            previous = level;
        }
        for f in 0..n {
            residual[[f, c]] = previous[f];
        }
    }

    let peaks = resolved
        .iter()
        .zip(&components)
        .map(|(scale, comp)| {
            // the whole-signal scale has no window to separate events by
            let separation = if whole { 1 } else { scale.frames };
            comp.columns()
                .into_iter()
                .map(|col| detect_peaks(&col.to_vec(), separation, peak_config.z))
                .collect()
        })
        .collect();

    let components = components
        .into_iter()
        .map(|data| s.with_data(data))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MultiscaleDecomposition {
        scales: resolved,
        components,
        residual: s.with_data(residual)?,
        peaks,
        peak_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_average(x: &[f64], w: usize, i: usize) -> f64 {
        let lo = i as isize - (w / 2) as isize;
        let vals: Vec<f64> = (lo..lo + w as isize)
            .filter(|&j| j >= 0 && (j as usize) < x.len())
            .map(|j| x[j as usize])
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn moving_average_matches_naive_window() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        for w in [1, 2, 5, 6, 15] {
            let fast = centered_moving_average(&x, w);
            for (i, v) in fast.iter().enumerate() {
                assert!((v - naive_average(&x, w, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn peaks_respect_threshold_and_separation() {
        let mut x = vec![0.0; 50];
        x[10] = 5.0;
        x[13] = 4.0;
        x[30] = 3.0;
        x[40] = 0.1;
        let peaks = detect_peaks(&x, 5, 1.0);
        let frames: Vec<usize> = peaks.iter().map(|p| p.frame).collect();
        assert_eq!(frames, vec![10, 30]);
        assert!(detect_peaks(&vec![0.0; 20], 1, 1.0).is_empty());
    }

    #[test]
    fn too_short_names_required_length() {
        let s = Signal::from_channel(&vec![0.0; 100], 30.0, "e").unwrap();
        let err = multiscale_decompose(&s, &ScaleSet::seconds(&[0.5, 2.0]).unwrap()).unwrap_err();
        assert_eq!(err, ExpressionError::TooShort { required: 120, found: 100 });
    }

    #[test]
    fn whole_scale_centres_the_signal() {
        let s = Signal::from_channel(&[1.0, 3.0, 2.0, 6.0], 2.0, "e").unwrap();
        let d = multiscale_decompose(&s, &ScaleSet::Whole).unwrap();
        assert_eq!(d.scales[0].seconds, 2.0);
        assert_eq!(d.residual.channel(0).to_vec(), vec![3.0; 4]);
        assert_eq!(d.components[0].channel(0).to_vec(), vec![-2.0, 0.0, -1.0, 3.0]);
    }

    #[test]
    fn nan_input_rejected() {
        let mut x = vec![0.0; 100];
        x[3] = f64::NAN;
        let s = Signal::from_channel(&x, 30.0, "e").unwrap();
        assert!(matches!(
            multiscale_decompose(&s, &ScaleSet::Whole),
            Err(ExpressionError::NonFinite { channel: 0 })
        ));
    }
}
