//! Random feature map: the finite-dimensional approximation of the kernel
//! lifting map, with reproducible sampling and on-disk caching.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::kernel::Kernel;

/// Constant `c` in the feature-count formula `rho = ceil(c / eps^2 * ln(n /
/// delta))`. Eight features per unit of the bound keeps the additive error
/// comfortably inside `eps` at the problem sizes this crate targets.
pub const RHO_CONSTANT: f64 = 8.0;

/// Accuracy request used to size a feature map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftConfig {
    /// Additive error `eps` on approximated pairwise distances.
    pub requested_epsilon: f64,
    /// Failure probability `delta` over the draw of the feature map.
    pub failure_probability: f64,
    /// Overrides the formula-derived feature count when set.
    pub explicit_rho: Option<usize>,
}

impl LiftConfig {
    pub fn new(requested_epsilon: f64, failure_probability: f64) -> Result<Self> {
        if !requested_epsilon.is_finite() || requested_epsilon <= 0.0 {
            return Err(Error::invalid_parameter(
                "epsilon",
                format!("must be positive, got {requested_epsilon}"),
            ));
        }
        if !failure_probability.is_finite()
            || failure_probability <= 0.0
            || failure_probability >= 1.0
        {
            return Err(Error::invalid_parameter(
                "delta",
                format!("must lie in (0, 1), got {failure_probability}"),
            ));
        }
        Ok(LiftConfig {
            requested_epsilon,
            failure_probability,
            explicit_rho: None,
        })
    }

    /// Config that pins the feature count directly.
    pub fn with_rho(rho: usize) -> Result<Self> {
        if rho == 0 {
            return Err(Error::invalid_parameter("rho", "must be at least 1".to_string()));
        }
        Ok(LiftConfig {
            // Placeholder accuracy fields; explicit_rho wins.
            requested_epsilon: 0.1,
            failure_probability: 0.05,
            explicit_rho: Some(rho),
        })
    }

    /// Feature count for a dataset of `n` points:
    /// `explicit_rho` if set, else `ceil(c / eps^2 * ln(n / delta))`.
    pub fn rho_for(&self, n: usize) -> usize {
        if let Some(rho) = self.explicit_rho {
            return rho;
        }
        let eps = self.requested_epsilon;
        let raw = RHO_CONSTANT / (eps * eps) * (n as f64 / self.failure_probability).ln();
        (raw.ceil() as usize).max(1)
    }
}

/// Sampled random feature map `z(x) = scale * cos(W x + b)` for the Gaussian
/// kernel. Immutable after construction; lifting points is pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    kernel: Kernel,
    rho: usize,
    dim: usize,
    seed: u64,
    scale: f64,
    /// Row-major `rho x dim` frequency matrix.
    frequencies: Vec<f64>,
    /// `rho` phases in `[0, 2*pi)`.
    phases: Vec<f64>,
}

/// Envelope for serialized feature maps; guards against loading foreign or
/// future files.
#[derive(Serialize, Deserialize)]
struct FeatureMapFile {
    format: String,
    version: u32,
    map: FeatureMap,
}

const FEATURE_MAP_FORMAT: &str = "liftcluster-feature-map";
const FEATURE_MAP_VERSION: u32 = 1;

/// Samples a feature map for the Gaussian kernel.
///
/// Frequencies are drawn row by row from an isotropic normal with
/// per-coordinate standard deviation `1 / bandwidth` (the Fourier transform
/// of the Gaussian kernel), then phases uniformly from `[0, 2*pi)`, all from
/// a ChaCha stream keyed by `seed`; rebuilding with equal arguments
/// reproduces the map bitwise.
pub fn build_feature_map(
    kernel: Kernel,
    dim: usize,
    cfg: &LiftConfig,
    n: usize,
    seed: u64,
) -> Result<FeatureMap> {
    let bandwidth = match kernel {
        Kernel::Gaussian { bandwidth } => bandwidth,
        Kernel::Discrete => {
            return Err(Error::invalid_parameter(
                "kernel",
                "the discrete kernel has no feature map; use the exact path".to_string(),
            ))
        }
    };
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::invalid_parameter(
            "bandwidth",
            format!("must be positive, got {bandwidth}"),
        ));
    }
    if dim == 0 {
        return Err(Error::invalid_parameter("dim", "must be at least 1".to_string()));
    }
    if n == 0 {
        return Err(Error::invalid_parameter("n", "must be at least 1".to_string()));
    }
    let rho = cfg.rho_for(n);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / bandwidth).expect("validated std");
    let mut frequencies = Vec::with_capacity(rho * dim);
    for _ in 0..rho * dim {
        frequencies.push(normal.sample(&mut rng));
    }
    let mut phases = Vec::with_capacity(rho);
    for _ in 0..rho {
        phases.push(rng.gen_range(0.0..std::f64::consts::TAU));
    }
    Ok(FeatureMap {
        kernel,
        rho,
        dim,
        seed,
        scale: (2.0 / rho as f64).sqrt(),
        frequencies,
        phases,
    })
}

impl FeatureMap {
    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Lifts one point: `scale * cos(W x + b)` componentwise. Every entry
    /// lies in `[-scale, scale]`.
    pub fn lift(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
                context: "lift_point argument".to_string(),
            });
        }
        let mut out = Vec::with_capacity(self.rho);
        for r in 0..self.rho {
            let row = &self.frequencies[r * self.dim..(r + 1) * self.dim];
            let dot: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
            out.push(self.scale * (dot + self.phases[r]).cos());
        }
        Ok(out)
    }

    /// Writes the map as self-describing JSON (atomic: temp file + rename).
    /// Reloading on the same platform reproduces identical lifts because
    /// every float round-trips exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = FeatureMapFile {
            format: FEATURE_MAP_FORMAT.to_string(),
            version: FEATURE_MAP_VERSION,
            map: self.clone(),
        };
        let bytes = serde_json::to_vec(&file)?;
        atomic_write(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<FeatureMap> {
        let bytes = std::fs::read(path)?;
        let file: FeatureMapFile = serde_json::from_slice(&bytes)?;
        if file.format != FEATURE_MAP_FORMAT {
            return Err(Error::invalid_parameter(
                "feature map file",
                format!("unrecognized format tag {:?}", file.format),
            ));
        }
        if file.version != FEATURE_MAP_VERSION {
            return Err(Error::invalid_parameter(
                "feature map file",
                format!("unsupported version {}", file.version),
            ));
        }
        if !file.map.kernel.has_feature_map() {
            return Err(Error::invalid_parameter(
                "feature map file",
                "stored kernel does not admit a feature map".to_string(),
            ));
        }
        Ok(file.map)
    }
}
