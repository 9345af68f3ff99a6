//! Distances between whole partitions, computed on their embedded clusters.
//!
//! Each partition becomes a small weighted set of unit vectors (one per
//! cluster, weighted by its share of the total point weight), and the three
//! distances compare those sets: `lift_emd` by optimal transport, `lift_h`
//! by the Hausdorff gap, and `lift_kd` by a second-level kernel distance.
//! All three see cluster geometry, so two splits that disagree on the same
//! number of points can still score differently when one split follows the
//! spatial structure and the other cuts across it.
//!
//! Every distance here is exactly symmetric in its two partition arguments
//! and exactly invariant under relabeling either partition's clusters: sums
//! are evaluated in value order and cluster lists are canonicalized by
//! content before any order-sensitive step.

use crate::embed::{
    cluster_support, embed_cluster, normalize, ClusterSource, ClusterVector, KernelCache,
    NORM_FLOOR,
};
use crate::error::{Error, Result};
use crate::kernel::{euclid, Kernel};
use crate::lift::FeatureMap;
use crate::partition::{DataSet, Partition, PointWeights};
use crate::transport::{solve_transport, value_ordered_sum, TransportPlan};

/// Each side of a [`transportation`] call must carry weights summing to 1
/// within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A finite weighted set of equal-length unit vectors: one vector per
/// cluster, weights strictly positive. A set produced per partition (see
/// [`to_weighted_set`]) carries weights summing to 1; a pool drawn from
/// several partitions keeps each partition's total, so its weights sum to
/// the partition count instead.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVectorSet {
    vectors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    sources: Vec<ClusterSource>,
}

impl WeightedVectorSet {
    pub fn new(
        vectors: Vec<Vec<f64>>,
        weights: Vec<f64>,
        sources: Vec<ClusterSource>,
    ) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyInput("weighted vector set".to_string()));
        }
        if vectors.len() != weights.len() || vectors.len() != sources.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                got: weights.len().min(sources.len()),
                context: "vectors, weights and sources must align".to_string(),
            });
        }
        let dim = vectors[0].len();
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                    context: "vector lengths in weighted set".to_string(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid_parameter(
                    "vectors",
                    "entries must be finite".to_string(),
                ));
            }
        }
        for &w in &weights {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::invalid_parameter(
                    "weights",
                    format!("weight {w} must be finite and positive"),
                ));
            }
        }
        Ok(WeightedVectorSet {
            vectors,
            weights,
            sources,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn source(&self, i: usize) -> ClusterSource {
        self.sources[i]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sources(&self) -> &[ClusterSource] {
        &self.sources
    }
}

/// Embeds every cluster of `p` through the feature map and packages the
/// normalized vectors with weights `mass_j / total mass`.
pub fn to_weighted_set(
    fm: &FeatureMap,
    ds: &DataSet,
    p: &Partition,
    w: &PointWeights,
) -> Result<WeightedVectorSet> {
    let mut vectors = Vec::with_capacity(p.k());
    let mut weights = Vec::with_capacity(p.k());
    let mut sources = Vec::with_capacity(p.k());
    let mut total = 0.0;
    for j in 0..p.k() {
        let cv = normalize(&embed_cluster(fm, ds, p, w, j)?)?;
        total += cv.mass;
        weights.push(cv.mass);
        sources.push(cv.source);
        vectors.push(cv.vec);
    }
    for w in &mut weights {
        *w /= total;
    }
    WeightedVectorSet::new(vectors, weights, sources)
}

/// Result of a transportation distance: the optimal cost and the coupling
/// that attains it, indexed by the original cluster order of both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct EmdResult {
    pub distance: f64,
    pub plan: TransportPlan,
}

/// Transportation distance between two weighted vector sets under the
/// Euclidean ground distance. Exactly symmetric and invariant to the order
/// in which either set lists its vectors.
pub fn transportation(a: &WeightedVectorSet, b: &WeightedVectorSet) -> Result<EmdResult> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
            context: "weighted vector set dimensions".to_string(),
        });
    }
    for (name, set) in [("src", a), ("dst", b)] {
        let total: f64 = set.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid_parameter(
                name,
                format!("weights must sum to 1 for transportation, got {total}"),
            ));
        }
    }
    let key_a: Vec<CanonKey> = (0..a.len()).map(|i| vector_key(a.vector(i), a.weight(i))).collect();
    let key_b: Vec<CanonKey> = (0..b.len()).map(|j| vector_key(b.vector(j), b.weight(j))).collect();
    let ground = |i: usize, j: usize| Ok(euclid(a.vector(i), b.vector(j)));
    canonical_emd(
        &(0..a.len()).map(|i| a.weight(i)).collect::<Vec<_>>(),
        &(0..b.len()).map(|j| b.weight(j)).collect::<Vec<_>>(),
        &key_a,
        &key_b,
        ground,
    )
}

/// How a [`LiftContext`] turns clusters into vectors: through a sampled
/// feature map, or exactly through kernel sums over the raw points.
enum LiftPath<'a> {
    Approx(&'a FeatureMap),
    Exact(&'a Kernel),
}

/// Shared inputs for the partition distances: the dataset the partitions
/// live on, per-point weights, and the embedding route.
pub struct LiftContext<'a> {
    ds: &'a DataSet,
    weights: &'a PointWeights,
    path: LiftPath<'a>,
}

impl<'a> LiftContext<'a> {
    /// Distances through a random feature map (fast, approximate).
    pub fn approx(
        ds: &'a DataSet,
        weights: &'a PointWeights,
        fm: &'a FeatureMap,
    ) -> Result<Self> {
        if fm.dim() != ds.dim() {
            return Err(Error::DimensionMismatch {
                expected: ds.dim(),
                got: fm.dim(),
                context: "feature map input dimension".to_string(),
            });
        }
        Self::check_weights(ds, weights)?;
        Ok(LiftContext {
            ds,
            weights,
            path: LiftPath::Approx(fm),
        })
    }

    /// Distances through exact kernel sums (`O(n_i * n_j)` per cluster
    /// pair); the reference route for validating the approximate one.
    pub fn exact(ds: &'a DataSet, weights: &'a PointWeights, kernel: &'a Kernel) -> Result<Self> {
        Self::check_weights(ds, weights)?;
        Ok(LiftContext {
            ds,
            weights,
            path: LiftPath::Exact(kernel),
        })
    }

    fn check_weights(ds: &DataSet, weights: &PointWeights) -> Result<()> {
        if weights.len() != ds.n() {
            return Err(Error::DimensionMismatch {
                expected: ds.n(),
                got: weights.len(),
                context: "point weights".to_string(),
            });
        }
        Ok(())
    }
}

/// Per-pair working data: normalized cluster masses for both sides plus
/// whatever the chosen path needs to measure distances between clusters.
struct Pair<'a> {
    masses_a: Vec<f64>,
    masses_b: Vec<f64>,
    total_weight: f64,
    geometry: Geometry<'a>,
}

enum Geometry<'a> {
    /// Normalized embedded vectors for both partitions.
    Approx {
        va: Vec<ClusterVector>,
        vb: Vec<ClusterVector>,
    },
    /// Weighted supports and raw self kernel sums for both partitions.
    Exact {
        cache: KernelCache<'a>,
        sup_a: Vec<Vec<(usize, f64)>>,
        sup_b: Vec<Vec<(usize, f64)>>,
        self_a: Vec<f64>,
        self_b: Vec<f64>,
        discrete: bool,
    },
}

/// Which side of the pair a cluster index refers to.
#[derive(Clone, Copy, PartialEq)]
enum Side {
    A,
    B,
}

impl<'a> Pair<'a> {
    fn build(ctx: &'a LiftContext<'a>, pa: &Partition, pb: &Partition) -> Result<Self> {
        pa.validate_against(ctx.ds)?;
        pb.validate_against(ctx.ds)?;
        let raw_a = pa.masses(ctx.weights)?;
        let raw_b = pb.masses(ctx.weights)?;
        if raw_a.iter().chain(raw_b.iter()).any(|&m| m <= 0.0) {
            return Err(Error::Degenerate(
                "a cluster has zero weighted mass; nothing to compare".to_string(),
            ));
        }
        let total_weight: f64 = raw_a.iter().sum();
        let normalize_masses = |raw: &[f64]| -> Vec<f64> {
            let t: f64 = raw.iter().sum();
            raw.iter().map(|m| m / t).collect()
        };
        let geometry = match ctx.path {
            LiftPath::Approx(fm) => {
                let embed_all = |p: &Partition| -> Result<Vec<ClusterVector>> {
                    (0..p.k())
                        .map(|j| normalize(&embed_cluster(fm, ctx.ds, p, ctx.weights, j)?))
                        .collect()
                };
                Geometry::Approx {
                    va: embed_all(pa)?,
                    vb: embed_all(pb)?,
                }
            }
            LiftPath::Exact(kernel) => {
                let cache = KernelCache::new(*kernel, ctx.ds)?;
                let supports = |p: &Partition| -> Vec<Vec<(usize, f64)>> {
                    (0..p.k()).map(|j| cluster_support(p, ctx.weights, j)).collect()
                };
                let sup_a = supports(pa);
                let sup_b = supports(pb);
                let self_sums = |sup: &[Vec<(usize, f64)>]| -> Result<Vec<f64>> {
                    sup.iter().map(|s| cache.cross_sum(s, s)).collect()
                };
                let self_a = self_sums(&sup_a)?;
                let self_b = self_sums(&sup_b)?;
                for (j, &s) in self_a.iter().chain(self_b.iter()).enumerate() {
                    if s <= NORM_FLOOR * NORM_FLOOR {
                        return Err(Error::Degenerate(format!(
                            "cluster {j} has kernel norm below the floor; cannot normalize"
                        )));
                    }
                }
                Geometry::Exact {
                    cache,
                    sup_a,
                    sup_b,
                    self_a,
                    self_b,
                    discrete: matches!(kernel, Kernel::Discrete),
                }
            }
        };
        Ok(Pair {
            masses_a: normalize_masses(&raw_a),
            masses_b: normalize_masses(&raw_b),
            total_weight,
            geometry,
        })
    }

    fn len(&self, side: Side) -> usize {
        match side {
            Side::A => self.masses_a.len(),
            Side::B => self.masses_b.len(),
        }
    }

    /// Squared distance between the normalized representatives of cluster
    /// `i` on `sa` and cluster `j` on `sb`. Exactly symmetric in the two
    /// (side, index) arguments.
    fn normalized_sq(&self, sa: Side, i: usize, sb: Side, j: usize) -> Result<f64> {
        match &self.geometry {
            Geometry::Approx { va, vb } => {
                let pick = |s: Side, idx: usize| match s {
                    Side::A => &va[idx],
                    Side::B => &vb[idx],
                };
                let d = euclid(&pick(sa, i).vec, &pick(sb, j).vec);
                Ok(d * d)
            }
            Geometry::Exact {
                cache,
                sup_a,
                sup_b,
                self_a,
                self_b,
                ..
            } => {
                let pick = |s: Side, idx: usize| match s {
                    Side::A => (&sup_a[idx], self_a[idx]),
                    Side::B => (&sup_b[idx], self_b[idx]),
                };
                let (su, s_uu) = pick(sa, i);
                let (sv, s_vv) = pick(sb, j);
                let s_uv = cache.cross_sum_canonical(su, sv)?;
                Ok((2.0 - 2.0 * s_uv / (s_uu * s_vv).sqrt()).max(0.0))
            }
        }
    }

    fn normalized_dist(&self, sa: Side, i: usize, sb: Side, j: usize) -> Result<f64> {
        Ok(self.normalized_sq(sa, i, sb, j)?.sqrt())
    }

    /// Ground cost for the transportation distance. On the exact discrete
    /// path this is the squared raw kernel gap scaled by `1/(W-1)`, which
    /// prices an overlap coupling at exactly the pair-counting disagreement
    /// rate; everywhere else it is the distance between normalized
    /// representatives.
    fn emd_ground(&self, i: usize, j: usize) -> Result<f64> {
        match &self.geometry {
            Geometry::Exact {
                cache,
                sup_a,
                sup_b,
                self_a,
                self_b,
                discrete: true,
            } => {
                if self.total_weight <= 1.0 {
                    return Err(Error::Degenerate(format!(
                        "discrete transportation ground needs total weight above 1, got {}",
                        self.total_weight
                    )));
                }
                let s_ab = cache.cross_sum_canonical(&sup_a[i], &sup_b[j])?;
                let gamma_sq = (self_a[i] + self_b[j] - 2.0 * s_ab).max(0.0);
                Ok(gamma_sq / (self.total_weight - 1.0))
            }
            _ => self.normalized_dist(Side::A, i, Side::B, j),
        }
    }

    /// Canonical content key of a cluster, independent of the side it sits
    /// on, used to sort clusters and order the two sides deterministically.
    fn key(&self, side: Side, idx: usize) -> CanonKey {
        let mass = match side {
            Side::A => self.masses_a[idx],
            Side::B => self.masses_b[idx],
        };
        match &self.geometry {
            Geometry::Approx { va, vb } => {
                let v = match side {
                    Side::A => &va[idx],
                    Side::B => &vb[idx],
                };
                vector_key(&v.vec, mass)
            }
            Geometry::Exact { sup_a, sup_b, .. } => {
                let sup = match side {
                    Side::A => &sup_a[idx],
                    Side::B => &sup_b[idx],
                };
                let mut key: CanonKey = sup
                    .iter()
                    .flat_map(|(i, w)| [*i as u64, w.to_bits()])
                    .collect();
                key.push(mass.to_bits());
                key
            }
        }
    }
}

type CanonKey = Vec<u64>;

fn vector_key(v: &[f64], weight: f64) -> CanonKey {
    let mut key: CanonKey = v.iter().map(|x| x.to_bits()).collect();
    key.push(weight.to_bits());
    key
}

/// Sorts both sides by content key, orders the sides themselves, solves the
/// transportation problem on the canonical instance, and maps the plan back
/// to the callers' cluster order. Relabeling clusters or swapping the two
/// sides therefore yields bit-identical distances.
fn canonical_emd<F>(
    masses_a: &[f64],
    masses_b: &[f64],
    key_a: &[CanonKey],
    key_b: &[CanonKey],
    ground: F,
) -> Result<EmdResult>
where
    F: Fn(usize, usize) -> Result<f64>,
{
    let argsort = |keys: &[CanonKey]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by(|&x, &y| keys[x].cmp(&keys[y]));
        order
    };
    let order_a = argsort(key_a);
    let order_b = argsort(key_b);
    let sorted = |order: &[usize], keys: &[CanonKey]| -> Vec<CanonKey> {
        order.iter().map(|&i| keys[i].clone()).collect()
    };
    let swap = sorted(&order_b, key_b) < sorted(&order_a, key_a);

    let (rows, cols) = if swap {
        (&order_b, &order_a)
    } else {
        (&order_a, &order_b)
    };
    let (supply, demand) = if swap {
        (masses_b, masses_a)
    } else {
        (masses_a, masses_b)
    };
    let supply_sorted: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
    let demand_sorted: Vec<f64> = cols.iter().map(|&j| demand[j]).collect();
    let mut costs = vec![0.0; rows.len() * cols.len()];
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            costs[ri * cols.len() + cj] = if swap { ground(j, i)? } else { ground(i, j)? };
        }
    }
    let plan = solve_transport(&supply_sorted, &demand_sorted, &costs)?;
    let plan = if swap { plan.transposed() } else { plan };
    let plan = plan.reindexed(&order_a, &order_b);
    Ok(EmdResult {
        distance: plan.cost(),
        plan,
    })
}

/// Transportation distance between two partitions of the same dataset: the
/// cheapest way to move each cluster's share of mass onto the other
/// partition's clusters, priced by how far apart the clusters are.
pub fn lift_emd(ctx: &LiftContext, pa: &Partition, pb: &Partition) -> Result<EmdResult> {
    let pair = Pair::build(ctx, pa, pb)?;
    let key_a: Vec<CanonKey> = (0..pair.len(Side::A)).map(|i| pair.key(Side::A, i)).collect();
    let key_b: Vec<CanonKey> = (0..pair.len(Side::B)).map(|j| pair.key(Side::B, j)).collect();
    canonical_emd(&pair.masses_a, &pair.masses_b, &key_a, &key_b, |i, j| {
        pair.emd_ground(i, j)
    })
}

/// Hausdorff distance between the two cluster sets: the largest distance
/// from any cluster to its nearest counterpart on the other side. Ignores
/// cluster masses entirely; one far-flung cluster dominates.
pub fn lift_h(ctx: &LiftContext, pa: &Partition, pb: &Partition) -> Result<f64> {
    let pair = Pair::build(ctx, pa, pb)?;
    let (ka, kb) = (pair.len(Side::A), pair.len(Side::B));
    let mut dist = vec![0.0; ka * kb];
    for i in 0..ka {
        for j in 0..kb {
            dist[i * kb + j] = pair.normalized_dist(Side::A, i, Side::B, j)?;
        }
    }
    let row_min_max = (0..ka)
        .map(|i| (0..kb).map(|j| dist[i * kb + j]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let col_min_max = (0..kb)
        .map(|j| (0..ka).map(|i| dist[i * kb + j]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(row_min_max.max(col_min_max))
}

/// Second-level kernel distance between the two weighted cluster sets: each
/// partition is treated as a weighted point set in embedding space and
/// compared with a Gaussian kernel of width `kprime_bandwidth` there.
/// Smooth in cluster positions and masses, unlike `lift_h`.
pub fn lift_kd(
    ctx: &LiftContext,
    pa: &Partition,
    pb: &Partition,
    kprime_bandwidth: f64,
) -> Result<f64> {
    if !kprime_bandwidth.is_finite() || kprime_bandwidth <= 0.0 {
        return Err(Error::invalid_parameter(
            "kprime_bandwidth",
            format!("must be positive and finite, got {kprime_bandwidth}"),
        ));
    }
    let pair = Pair::build(ctx, pa, pb)?;
    let two_sq = 2.0 * kprime_bandwidth * kprime_bandwidth;
    let kprime = |d_sq: f64| (-d_sq / two_sq).exp();
    let side_sum = |sa: Side, sb: Side| -> Result<f64> {
        let (ma, mb) = (
            match sa {
                Side::A => &pair.masses_a,
                Side::B => &pair.masses_b,
            },
            match sb {
                Side::A => &pair.masses_a,
                Side::B => &pair.masses_b,
            },
        );
        let mut terms = Vec::with_capacity(ma.len() * mb.len());
        for (i, &wa) in ma.iter().enumerate() {
            for (j, &wb) in mb.iter().enumerate() {
                let d_sq = pair.normalized_sq(sa, i, sb, j)?;
                terms.push(wa * wb * kprime(d_sq));
            }
        }
        Ok(value_ordered_sum(terms))
    };
    let s_aa = side_sum(Side::A, Side::A)?;
    let s_bb = side_sum(Side::B, Side::B)?;
    let s_ab = side_sum(Side::A, Side::B)?;
    Ok((s_aa + s_bb - 2.0 * s_ab).max(0.0).sqrt())
}
