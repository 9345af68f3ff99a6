//! Cluster representatives: approximate embedding via the feature map, unit
//! normalization, and the exact kernel distance between weighted point
//! measures (the brute-force reference for everything approximate).

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::lift::FeatureMap;
use crate::partition::{DataSet, Partition, PointWeights};

/// Vectors with Euclidean norm at or below this cannot be normalized; such a
/// norm signals a degenerate bandwidth or an effectively empty cluster.
pub const NORM_FLOOR: f64 = 1e-12;

/// Provenance of a cluster vector: which input partition and which of its
/// clusters it represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterSource {
    pub partition: usize,
    pub cluster: usize,
}

/// Embedded representative of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterVector {
    /// The representative in feature space (length rho).
    pub vec: Vec<f64>,
    /// Weighted mass of the source cluster.
    pub mass: f64,
    /// Whether `vec` has been scaled to unit norm.
    pub normalized: bool,
    /// Where this vector came from. [`embed_cluster`] tags partition 0;
    /// multi-partition callers overwrite the partition slot.
    pub source: ClusterSource,
}

/// Embeds cluster `j`: `vec = sum_i w_i * p(C_j|x_i) * lift(x_i)` over the
/// cluster's support. `O(n_j * rho)`.
pub fn embed_cluster(
    fm: &FeatureMap,
    ds: &DataSet,
    p: &Partition,
    w: &PointWeights,
    j: usize,
) -> Result<ClusterVector> {
    p.validate_against(ds)?;
    let mass = p.cluster_mass(w, j)?;
    if mass <= 0.0 {
        return Err(Error::Degenerate(format!(
            "cluster {j} has zero weighted mass; nothing to embed"
        )));
    }
    let mut vec = vec![0.0; fm.rho()];
    for (i, membership) in p.members(j) {
        let coeff = w.get(i) * membership;
        if coeff == 0.0 {
            continue;
        }
        let z = fm.lift(ds.point(i))?;
        for (acc, zi) in vec.iter_mut().zip(&z) {
            *acc += coeff * zi;
        }
    }
    Ok(ClusterVector {
        vec,
        mass,
        normalized: false,
        source: ClusterSource {
            partition: 0,
            cluster: j,
        },
    })
}

/// Scales a cluster vector to unit Euclidean norm, preserving mass and
/// provenance. Already-normalized vectors pass through unchanged, which
/// makes the operation exactly idempotent.
pub fn normalize(cv: &ClusterVector) -> Result<ClusterVector> {
    if cv.normalized {
        return Ok(cv.clone());
    }
    let norm = cv.vec.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= NORM_FLOOR {
        return Err(Error::Degenerate(format!(
            "cluster vector (partition {}, cluster {}) has norm {norm} below the floor {NORM_FLOOR}",
            cv.source.partition, cv.source.cluster
        )));
    }
    Ok(ClusterVector {
        vec: cv.vec.iter().map(|v| v / norm).collect(),
        mass: cv.mass,
        normalized: true,
        source: cv.source,
    })
}

/// Euclidean distance between two embedded representatives of equal length
/// and equal normalization state.
pub fn cluster_distance_approx(a: &ClusterVector, b: &ClusterVector) -> Result<f64> {
    if a.vec.len() != b.vec.len() {
        return Err(Error::DimensionMismatch {
            expected: a.vec.len(),
            got: b.vec.len(),
            context: "cluster vector lengths".to_string(),
        });
    }
    if a.normalized != b.normalized {
        return Err(Error::invalid_parameter(
            "cluster vectors",
            "cannot mix normalized and unnormalized vectors".to_string(),
        ));
    }
    Ok(crate::kernel::euclid(&a.vec, &b.vec))
}

/// Support of a weight vector: indices and values of its nonzero entries.
fn support(dist: &[f64], name: &str) -> Result<Vec<(usize, f64)>> {
    for (i, &v) in dist.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid_parameter(
                name,
                format!("weight {v} at index {i} must be finite and nonnegative"),
            ));
        }
    }
    Ok(dist
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (i, *v))
        .collect())
}

fn kernel_double_sum(
    kernel: &Kernel,
    ds: &DataSet,
    a: &[(usize, f64)],
    b: &[(usize, f64)],
) -> Result<f64> {
    let mut sum = 0.0;
    for &(i, wi) in a {
        for &(j, wj) in b {
            sum += wi * wj * kernel.eval(ds.point(i), ds.point(j))?;
        }
    }
    Ok(sum)
}

/// Sparse support of a cluster: (point index, responsibility mass) pairs.
type Support<'a> = &'a [(usize, f64)];

/// Orders two supports deterministically so cross sums are evaluated in the
/// same order regardless of argument order, keeping `exact_gamma` exactly
/// symmetric.
fn canonical<'a>(a: Support<'a>, b: Support<'a>) -> (Support<'a>, Support<'a>) {
    let key = |s: &[(usize, f64)]| s.iter().map(|(i, w)| (*i, w.to_bits())).collect::<Vec<_>>();
    if key(a) <= key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Exact kernel distance between two nonnegative weight vectors over the
/// dataset's points:
///
/// `sqrt( S(p,p) + S(q,q) - 2 S(p,q) )` where `S(u,v) = sum_{x,y} u(x) v(y)
/// kappa(x,y)`, with the radicand clamped at zero against floating-point
/// cancellation. `O(|supp p| * |supp q|)` kernel evaluations; no kernel
/// matrix is materialized.
pub fn exact_gamma(kernel: &Kernel, ds: &DataSet, dist_p: &[f64], dist_q: &[f64]) -> Result<f64> {
    if dist_p.len() != ds.n() || dist_q.len() != ds.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            got: if dist_p.len() != ds.n() {
                dist_p.len()
            } else {
                dist_q.len()
            },
            context: "weight vector over dataset points".to_string(),
        });
    }
    let sp = support(dist_p, "dist_p")?;
    let sq = support(dist_q, "dist_q")?;
    let s_pp = kernel_double_sum(kernel, ds, &sp, &sp)?;
    let s_qq = kernel_double_sum(kernel, ds, &sq, &sq)?;
    let (first, second) = canonical(&sp, &sq);
    let s_pq = kernel_double_sum(kernel, ds, first, second)?;
    Ok((s_pp + s_qq - 2.0 * s_pq).max(0.0).sqrt())
}

/// Kernel evaluations over one dataset, cached as a dense matrix when the
/// dataset is small enough and streamed otherwise.
pub(crate) struct KernelCache<'a> {
    kernel: Kernel,
    ds: &'a DataSet,
    matrix: Option<Vec<f64>>,
}

/// Largest dataset for which [`KernelCache`] materializes the full matrix.
pub(crate) const KERNEL_CACHE_LIMIT: usize = 2000;

impl<'a> KernelCache<'a> {
    pub fn new(kernel: Kernel, ds: &'a DataSet) -> Result<Self> {
        let n = ds.n();
        let matrix = if n <= KERNEL_CACHE_LIMIT {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                m[i * n + i] = 1.0;
                for j in (i + 1)..n {
                    let v = kernel.eval(ds.point(i), ds.point(j))?;
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
            Some(m)
        } else {
            None
        };
        Ok(KernelCache { kernel, ds, matrix })
    }

    fn eval(&self, i: usize, j: usize) -> Result<f64> {
        match &self.matrix {
            Some(m) => Ok(m[i * self.ds.n() + j]),
            None => self.kernel.eval(self.ds.point(i), self.ds.point(j)),
        }
    }

    /// `S(a,b) = sum_{i in a, j in b} w_i w_j kappa(x_i, x_j)` in the given
    /// iteration order.
    pub fn cross_sum(&self, a: &[(usize, f64)], b: &[(usize, f64)]) -> Result<f64> {
        let mut sum = 0.0;
        for &(i, wi) in a {
            for &(j, wj) in b {
                sum += wi * wj * self.eval(i, j)?;
            }
        }
        Ok(sum)
    }

    /// Cross sum in canonical argument order (see [`canonical`]).
    pub fn cross_sum_canonical(&self, a: &[(usize, f64)], b: &[(usize, f64)]) -> Result<f64> {
        let (first, second) = canonical(a, b);
        self.cross_sum(first, second)
    }
}

/// Weighted support of cluster `j`: `(point index, w_i * p(C_j|x_i))` pairs.
pub(crate) fn cluster_support(p: &Partition, w: &PointWeights, j: usize) -> Vec<(usize, f64)> {
    p.members(j)
        .into_iter()
        .map(|(i, membership)| (i, w.get(i) * membership))
        .filter(|(_, c)| *c > 0.0)
        .collect()
}
