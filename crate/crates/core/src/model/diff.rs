//! Finite-difference time derivatives.
//!
//! Stencil weights come from Fornberg's recursion, so any derivative order
//! and even accuracy order can be served from the same code path. Interior
//! frames use centered stencils; frames too close to either end use the
//! nearest one-sided window of `order + accuracy` samples.

use ndarray::{Array2, ArrayView2};

use super::{ModelError, Signal};

/// Fornberg weights for the `order`-th derivative at 0 given sample offsets.
fn fornberg_weights(offsets: &[f64], order: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

struct Stencil {
    offsets: Vec<isize>,
    weights: Vec<f64>,
}

impl Stencil {
    fn new(offsets: Vec<isize>, order: usize) -> Self {
        let as_f: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
        let weights = fornberg_weights(&as_f, order);
        Self { offsets, weights }
    }

    fn apply(&self, column: &[f64], i: usize) -> f64 {
        // differences against the centre sample keep constants exactly zero
        let centre = column[i];
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(&o, &w)| w * (column[(i as isize + o) as usize] - centre))
            .sum()
    }
}

/// Minimum number of frames for an `order`-th derivative.
pub fn min_frames(order: usize) -> usize {
    order + 2
}

/// Differentiates every column of `data` (frames × channels).
///
/// `accuracy` is the requested even accuracy order; it is lowered to the
/// largest even value the frame count supports, never below 2.
pub fn derivative(
    data: ArrayView2<'_, f64>,
    fps: f64,
    order: usize,
    accuracy: usize,
) -> Result<Array2<f64>, ModelError> {
    if order == 0 {
        return Err(ModelError::DerivativeOrder);
    }
    let n = data.nrows();
    if n < min_frames(order) {
        return Err(ModelError::TooFewFrames {
            required: min_frames(order),
            found: n,
        });
    }
    let mut accuracy = accuracy.max(2) & !1;
    while order + accuracy > n {
        accuracy -= 2;
    }
    let half = (order + 1) / 2 - 1 + accuracy / 2;
    let window = order + accuracy;

    let central = Stencil::new((-(half as isize)..=half as isize).collect(), order);
    let stencil_at = |i: usize| -> Option<Stencil> {
        if i >= half && i + half < n {
            return None;
        }
        let start = if i < half { 0 } else { n - window };
        let offsets = (start..start + window)
            .map(|j| j as isize - i as isize)
            .collect();
        Some(Stencil::new(offsets, order))
    };
    let edges: Vec<(usize, Stencil)> = (0..n)
        .filter(|&i| i < half || i + half >= n)
        .filter_map(|i| stencil_at(i).map(|s| (i, s)))
        .collect();

    let scale = fps.powi(order as i32);
    let mut out = Array2::zeros(data.raw_dim());
    for (c, column) in data.columns().into_iter().enumerate() {
        let column = column.to_vec();
        for i in half..n.saturating_sub(half) {
            out[[i, c]] = central.apply(&column, i) * scale;
        }
        for (i, stencil) in &edges {
            out[[*i, c]] = stencil.apply(&column, *i) * scale;
        }
    }
    Ok(out)
}

/// Accuracy order used by [`finite_difference`].
pub const DEFAULT_ACCURACY: usize = 4;

/// The `order`-th time derivative of `s` in units per second^order.
///
/// Fourth-order accurate where the frame count allows, second-order on
/// inputs shorter than `order + 4` frames.
pub fn finite_difference(s: &Signal, order: usize) -> Result<Signal, ModelError> {
    let d = derivative(s.data(), s.fps(), order, DEFAULT_ACCURACY)?;
    s.with_data(d)
}
