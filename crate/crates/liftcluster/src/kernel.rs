//! Positive-definite kernels on point data and the bandwidth heuristic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernels supported by the embedding pipeline.
///
/// `Gaussian` admits a random feature approximation and is the default for
/// numeric data. `Discrete` (the 0/1 identity kernel) has no finite feature
/// map and is served by the exact evaluation path only; it exists to connect
/// the lifted distances with classical pair-counting ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// `exp(-||x - y||^2 / (2 * bandwidth^2))`.
    Gaussian { bandwidth: f64 },
    /// `1` if `x == y` exactly, else `0`.
    Discrete,
}

impl Kernel {
    /// Gaussian kernel with a validated bandwidth.
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::invalid_parameter(
                "bandwidth",
                format!("must be finite and positive, got {bandwidth}"),
            ));
        }
        Ok(Kernel::Gaussian { bandwidth })
    }

    /// Evaluates the kernel at a pair of points of equal dimension.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
                context: "kernel arguments".to_string(),
            });
        }
        Ok(match self {
            Kernel::Gaussian { bandwidth } => {
                let sq = sq_dist(x, y);
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
            Kernel::Discrete => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// True for kernels that admit a random feature map.
    pub fn has_feature_map(&self) -> bool {
        matches!(self, Kernel::Gaussian { .. })
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len(), "sq_dist arguments must match");
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[inline]
pub(crate) fn euclid(x: &[f64], y: &[f64]) -> f64 {
    sq_dist(x, y).sqrt()
}

/// Maximum subsample size used by [`median_bandwidth`].
pub const MEDIAN_SUBSAMPLE: usize = 1000;

/// Median pairwise Euclidean distance over a deterministic subsample of at
/// most [`MEDIAN_SUBSAMPLE`] rows (every `ceil(n / 1000)`-th row), the usual
/// default bandwidth for the Gaussian kernel.
///
/// Errors if fewer than two points are available or if every sampled pair
/// coincides (median distance zero), both of which leave the bandwidth
/// undefined.
pub fn median_bandwidth(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::EmptyInput(
            "median bandwidth needs at least two points".to_string(),
        ));
    }
    let stride = points.len().div_ceil(MEDIAN_SUBSAMPLE);
    let sample: Vec<&Vec<f64>> = points.iter().step_by(stride).collect();
    let mut dists = Vec::with_capacity(sample.len() * (sample.len() - 1) / 2);
    for i in 0..sample.len() {
        for j in (i + 1)..sample.len() {
            dists.push(euclid(sample[i], sample[j]));
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median <= 0.0 {
        // Heavily duplicated data: fall back to the smallest positive
        // distance rather than a degenerate zero bandwidth.
        match dists.iter().find(|d| **d > 0.0) {
            Some(d) => Ok(*d),
            None => Err(Error::Degenerate(
                "all sampled points coincide; bandwidth undefined".to_string(),
            )),
        }
    } else {
        Ok(median)
    }
}
