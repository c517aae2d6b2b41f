//! Temporal decomposition and causal weighting of the residual loss.
//!
//! `[0, T]` is cut into `N_t` equal slices. Slice `i` gets weight
//! `w_i = exp(-eps * sum_{k<i} L_k)`, so a slice only contributes once every
//! earlier slice has been fitted. Weights are constants with respect to the
//! network parameters.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Equal slices `[t_{i-1}, t_i)` of `[0, T]`; `t = T` belongs to the last slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdomainPartition {
    horizon: f64,
    slices: usize,
}

impl SubdomainPartition {
    pub fn new(horizon: f64, slices: usize) -> Result<Self> {
        if slices == 0 {
            return Err(Error::InvalidArgument("need at least one time slice".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument("time horizon must be positive".into()));
        }
        Ok(Self { horizon, slices })
    }

    pub fn len(&self) -> usize {
        self.slices
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn width(&self) -> f64 {
        self.horizon / self.slices as f64
    }

    /// `N_t + 1` boundaries; the last one is exactly `T`.
    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.slices).map(|i| self.boundary(i)).collect()
    }

    pub fn boundary(&self, i: usize) -> f64 {
        if i == self.slices {
            self.horizon
        } else {
            self.horizon * i as f64 / self.slices as f64
        }
    }

    /// `[t_{i-1}, t_i]` for 0-based slice `i`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.boundary(i), self.boundary(i + 1))
    }

    /// 0-based slice containing `t`; `t` is clamped into `[0, T]`.
    pub fn slice_of(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let mut i = math::floor(t / self.horizon * self.slices as f64) as usize;
        i = i.min(self.slices - 1);
        // guard rounding at boundaries so the interval test is the ground truth
        while i > 0 && t < self.boundary(i) {
            i -= 1;
        }
        while i + 1 < self.slices && t >= self.boundary(i + 1) {
            i += 1;
        }
        i
    }
}

/// `make_partition(T, N_t)`.
pub fn make_partition(horizon: f64, slices: usize) -> Result<SubdomainPartition> {
    SubdomainPartition::new(horizon, slices)
}

/// Mean squared residual per slice. Slices without points take
/// `fallback(i)` (the probe-set loss), which is only invoked for those slices.
pub fn slice_losses(
    squared_residuals: &[f64],
    slice_of_point: &[usize],
    partition: &SubdomainPartition,
    mut fallback: impl FnMut(usize) -> f64,
) -> Result<Vec<f64>> {
    if squared_residuals.len() != slice_of_point.len() {
        return Err(Error::DimensionMismatch {
            context: "slice tags",
            expected: squared_residuals.len(),
            found: slice_of_point.len(),
        });
    }
    let n = partition.len();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (&r, &s) in squared_residuals.iter().zip(slice_of_point) {
        if s >= n {
            return Err(Error::InvalidArgument(alloc::format!("slice index {s} out of range")));
        }
        sums[s] += r;
        counts[s] += 1;
    }
    Ok((0..n)
        .map(|i| if counts[i] == 0 { fallback(i) } else { sums[i] / counts[i] as f64 })
        .collect())
}

/// Causal weights for one set of slice losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalWeights {
    pub epsilon: f64,
    pub weights: Vec<f64>,
}

impl TemporalWeights {
    pub fn uniform(slices: usize) -> Self {
        Self {
            epsilon: 0.0,
            weights: vec![1.0; slices],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// `w_1 = 1`, `w_i = exp(-eps * sum_{k<i} L_k)`.
///
/// Weights are floored at the smallest normal `f64` so they stay in `(0, 1]`
/// when the exponent underflows.
pub fn causal_weights(losses: &[f64], epsilon: f64) -> Result<TemporalWeights> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument("causal epsilon must be positive".into()));
    }
    if losses.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument("slice losses must be finite and non-negative".into()));
    }
    let mut weights = Vec::with_capacity(losses.len());
    let mut cumulative = 0.0;
    for &l in losses {
        weights.push(if cumulative == 0.0 {
            1.0
        } else {
            math::exp(-epsilon * cumulative).max(f64::MIN_POSITIVE)
        });
        cumulative += l;
    }
    Ok(TemporalWeights { epsilon, weights })
}

/// `(1 / N_t) * sum_i w_i L_i`.
pub fn causal_residual_loss(losses: &[f64], weights: &[f64]) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "causal residual loss",
            expected: losses.len(),
            found: weights.len(),
        });
    }
    if losses.is_empty() {
        return Err(Error::Empty("slice losses"));
    }
    let sum: f64 = losses.iter().zip(weights).map(|(l, w)| w * l).sum();
    Ok(sum / losses.len() as f64)
}
