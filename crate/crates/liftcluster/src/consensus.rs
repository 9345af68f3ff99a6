//! Consensus clustering in the lifted space.
//!
//! The pipeline: pool the normalized cluster vectors of every input
//! partition into one weighted set Q, cluster Q into k groups (weighted
//! k-means or HAC), then send every original point to the representative
//! with the largest inner product against its own normalized embedding.
//! Because clusters are compared by where they sit in space, base
//! partitions that disagree on labels but agree on geometry reinforce each
//! other instead of canceling out.
//!
//! Determinism and permutation invariance: Q is sorted by content before
//! seeding, so reordering the input partitions or relabeling their clusters
//! changes nothing about the result, including its labels.

use crate::dist::{lift_emd, EmdResult, LiftContext, WeightedVectorSet};
use crate::embed::{embed_cluster, normalize};
use crate::error::{Error, Result};
use crate::hac::{hac, Linkage};
use crate::kmeans::{weighted_kmeans, weighted_ssd, KMeansConfig};
use crate::lift::FeatureMap;
use crate::partition::{DataSet, Partition, PointWeights};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusMethod {
    KMeans,
    Hac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Hard,
    Soft,
}

#[derive(Debug, Clone)]
pub struct ConsensusConfig {
    /// Target number of consensus clusters. Chosen by the caller; no model
    /// selection happens here.
    pub k: usize,
    pub method: ConsensusMethod,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub hac_linkage: Linkage,
    pub seed: u64,
    pub output_kind: OutputKind,
}

impl ConsensusConfig {
    pub fn new(k: usize) -> Self {
        ConsensusConfig {
            k,
            method: ConsensusMethod::KMeans,
            kmeans_restarts: 8,
            kmeans_max_iters: 200,
            hac_linkage: Linkage::Average,
            seed: 0,
            output_kind: OutputKind::Hard,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid_parameter("k", "must be positive".to_string()));
        }
        if self.kmeans_restarts == 0 || self.kmeans_max_iters == 0 {
            return Err(Error::invalid_parameter(
                "config",
                "kmeans_restarts and kmeans_max_iters must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusResult {
    /// One vector per consensus group, in feature space. Kept in full even
    /// if some group ends up owning no points.
    pub representatives: Vec<Vec<f64>>,
    /// The consensus partition over the original points. Its cluster `j`
    /// corresponds to the `j`-th representative *not* listed in `dropped`.
    pub consensus: Partition,
    /// `lift_ssd` of the pool against the representatives.
    pub objective: f64,
    /// Representative index for every pooled vector, aligned with the
    /// pool's order.
    pub provenance: Vec<usize>,
    /// Objective after every Lloyd assignment step (empty for HAC).
    pub trace: Vec<f64>,
    /// Points whose soft assignment had no positive inner product and fell
    /// back to a hard argmax.
    pub soft_fallbacks: Vec<usize>,
    /// Representatives that ended up with no points and were dropped from
    /// the consensus partition.
    pub dropped: Vec<usize>,
}

/// Collects the normalized cluster vectors of every partition into one
/// weighted set. Each vector keeps its source (partition index, cluster
/// index) and weighs `cluster_mass / total point weight`, so each partition
/// contributes total weight 1 and the pool totals m.
pub fn pool(
    fm: &FeatureMap,
    ds: &DataSet,
    partitions: &[Partition],
    w: &PointWeights,
) -> Result<WeightedVectorSet> {
    if partitions.is_empty() {
        return Err(Error::EmptyInput("partitions to pool".to_string()));
    }
    let total_weight: f64 = (0..ds.n()).map(|i| w.get(i)).sum();
    if total_weight <= 0.0 {
        return Err(Error::Degenerate(
            "total point weight must be positive".to_string(),
        ));
    }
    let mut vectors = Vec::new();
    let mut weights = Vec::new();
    let mut sources = Vec::new();
    for (pi, p) in partitions.iter().enumerate() {
        p.validate_against(ds)?;
        for j in 0..p.k() {
            let mut cv = normalize(&embed_cluster(fm, ds, p, w, j)?)?;
            cv.source.partition = pi;
            weights.push(cv.mass / total_weight);
            sources.push(cv.source);
            vectors.push(cv.vec);
        }
    }
    WeightedVectorSet::new(vectors, weights, sources)
}

/// The consensus objective: weighted squared distance from every pooled
/// vector to its nearest representative.
pub fn lift_ssd(q: &WeightedVectorSet, v: &[Vec<f64>]) -> Result<f64> {
    for rep in v {
        if rep.len() != q.dim() {
            return Err(Error::DimensionMismatch {
                expected: q.dim(),
                got: rep.len(),
                context: "representative length".to_string(),
            });
        }
    }
    weighted_ssd(q.vectors(), q.weights(), v)
}

/// A clustering of the pool: representatives plus which one each pooled
/// vector belongs to.
#[derive(Debug, Clone)]
pub struct PoolClustering {
    pub representatives: Vec<Vec<f64>>,
    /// Representative index per pooled vector, in pool order.
    pub provenance: Vec<usize>,
    /// `lift_ssd` of the pool against the representatives.
    pub objective: f64,
    /// Per-iteration objective (k-means only).
    pub trace: Vec<f64>,
}

/// Sort order of the pool by content: vector bits, then weight, then
/// source. Seeding from this order makes the consensus invariant to input
/// partition order and cluster relabeling.
fn content_order(q: &WeightedVectorSet) -> Vec<usize> {
    let key = |i: usize| {
        let mut k: Vec<u64> = q.vector(i).iter().map(|x| x.to_bits()).collect();
        k.push(q.weight(i).to_bits());
        k.push(q.source(i).partition as u64);
        k.push(q.source(i).cluster as u64);
        k
    };
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by_key(|&a| key(a));
    order
}

fn check_pool_size(q: &WeightedVectorSet, k: usize) -> Result<()> {
    if q.len() < k {
        return Err(Error::invalid_parameter(
            "k",
            format!("pool holds {} vectors, cannot form {k} groups", q.len()),
        ));
    }
    Ok(())
}

/// Groups the pool with weighted k-means (best of `kmeans_restarts`).
pub fn consensus_kmeans(q: &WeightedVectorSet, cfg: &ConsensusConfig) -> Result<PoolClustering> {
    cfg.validate()?;
    check_pool_size(q, cfg.k)?;
    let order = content_order(q);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| q.vector(i).to_vec()).collect();
    let weights: Vec<f64> = order.iter().map(|&i| q.weight(i)).collect();
    let km = weighted_kmeans(
        &rows,
        &weights,
        &KMeansConfig {
            k: cfg.k,
            restarts: cfg.kmeans_restarts,
            max_iters: cfg.kmeans_max_iters,
            seed: cfg.seed,
        },
    )?;
    let mut provenance = vec![0usize; q.len()];
    for (pos, &orig) in order.iter().enumerate() {
        provenance[orig] = km.assignment[pos];
    }
    let objective = lift_ssd(q, &km.centers)?;
    Ok(PoolClustering {
        representatives: km.centers,
        provenance,
        objective,
        trace: km.trace,
    })
}

/// Groups the pool agglomeratively; representatives are the weighted means
/// of the groups.
pub fn consensus_hac(q: &WeightedVectorSet, cfg: &ConsensusConfig) -> Result<PoolClustering> {
    cfg.validate()?;
    check_pool_size(q, cfg.k)?;
    let order = content_order(q);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| q.vector(i).to_vec()).collect();
    let res = hac(&rows, cfg.k, cfg.hac_linkage)?;
    let mut representatives = vec![vec![0.0; q.dim()]; cfg.k];
    let mut mass = vec![0.0; cfg.k];
    let mut provenance = vec![0usize; q.len()];
    for (pos, &orig) in order.iter().enumerate() {
        let g = res.assignment[pos];
        provenance[orig] = g;
        let wgt = q.weight(orig);
        mass[g] += wgt;
        for (acc, x) in representatives[g].iter_mut().zip(q.vector(orig)) {
            *acc += wgt * x;
        }
    }
    for (rep, m) in representatives.iter_mut().zip(&mass) {
        debug_assert!(*m > 0.0, "every group owns at least one pooled vector");
        for x in rep.iter_mut() {
            *x /= m;
        }
    }
    let objective = lift_ssd(q, &representatives)?;
    Ok(PoolClustering {
        representatives,
        provenance,
        objective,
        trace: Vec::new(),
    })
}

/// Outcome of sending points to representatives.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub partition: Partition,
    /// Points whose soft row had no positive inner product.
    pub soft_fallbacks: Vec<usize>,
    /// Representatives no point chose, dropped from the partition.
    pub dropped: Vec<usize>,
}

/// Sends every point to the representatives: hard output takes the argmax
/// inner product between the point's normalized embedding and each
/// representative (ties to the lowest index); soft output distributes
/// proportionally to the positive inner products. Representatives that end
/// up empty are dropped and reported.
pub fn assign_points(
    fm: &FeatureMap,
    ds: &DataSet,
    representatives: &[Vec<f64>],
    output_kind: OutputKind,
) -> Result<Assignment> {
    if representatives.is_empty() {
        return Err(Error::EmptyInput("representatives".to_string()));
    }
    let k = representatives.len();
    for rep in representatives {
        if rep.len() != fm.rho() {
            return Err(Error::DimensionMismatch {
                expected: fm.rho(),
                got: rep.len(),
                context: "representative length".to_string(),
            });
        }
    }
    let mut fallbacks = Vec::new();
    let mut hard_labels = vec![0usize; ds.n()];
    let mut soft_rows: Vec<Vec<f64>> = Vec::new();
    for (i, slot) in hard_labels.iter_mut().enumerate() {
        let z = fm.lift(ds.point(i))?;
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= crate::embed::NORM_FLOOR {
            return Err(Error::Degenerate(format!(
                "point {i} lifts to a vector of norm {norm}; cannot normalize"
            )));
        }
        let ips: Vec<f64> = representatives
            .iter()
            .map(|rep| rep.iter().zip(&z).map(|(r, v)| r * v / norm).sum::<f64>())
            .collect();
        let argmax = ips
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (j, &v)| {
                if v > bv {
                    (j, v)
                } else {
                    (bi, bv)
                }
            })
            .0;
        *slot = argmax;
        if matches!(output_kind, OutputKind::Soft) {
            let clamped: Vec<f64> = ips.iter().map(|&v| v.max(0.0)).collect();
            let total: f64 = clamped.iter().sum();
            if total > 0.0 {
                soft_rows.push(clamped.iter().map(|v| v / total).collect());
            } else {
                fallbacks.push(i);
                let mut row = vec![0.0; k];
                row[argmax] = 1.0;
                soft_rows.push(row);
            }
        }
    }

    match output_kind {
        OutputKind::Hard => {
            let used: Vec<bool> = (0..k).map(|j| hard_labels.contains(&j)).collect();
            let dropped: Vec<usize> = (0..k).filter(|&j| !used[j]).collect();
            let mut compact = vec![0usize; k];
            let mut next = 0;
            for j in 0..k {
                if used[j] {
                    compact[j] = next;
                    next += 1;
                }
            }
            let labels: Vec<usize> = hard_labels.iter().map(|&l| compact[l]).collect();
            let partition = Partition::from_labels(&labels, Some(next))?;
            Ok(Assignment {
                partition,
                soft_fallbacks: fallbacks,
                dropped,
            })
        }
        OutputKind::Soft => {
            let col_sums: Vec<f64> = (0..k)
                .map(|j| soft_rows.iter().map(|row| row[j]).sum())
                .collect();
            let dropped: Vec<usize> = (0..k).filter(|&j| col_sums[j] == 0.0).collect();
            let rows: Vec<Vec<f64>> = soft_rows
                .iter()
                .map(|row| {
                    (0..k)
                        .filter(|j| col_sums[*j] > 0.0)
                        .map(|j| row[j])
                        .collect()
                })
                .collect();
            let partition = Partition::from_rows(&rows)?;
            Ok(Assignment {
                partition,
                soft_fallbacks: fallbacks,
                dropped,
            })
        }
    }
}

/// The full consensus pipeline: pool, cluster the pool, assign points.
pub fn run_consensus(
    fm: &FeatureMap,
    ds: &DataSet,
    partitions: &[Partition],
    w: &PointWeights,
    cfg: &ConsensusConfig,
) -> Result<ConsensusResult> {
    let q = pool(fm, ds, partitions, w)?;
    let clustering = match cfg.method {
        ConsensusMethod::KMeans => consensus_kmeans(&q, cfg)?,
        ConsensusMethod::Hac => consensus_hac(&q, cfg)?,
    };
    let assignment = assign_points(fm, ds, &clustering.representatives, cfg.output_kind)?;
    assignment.partition.validate_against(ds)?;
    Ok(ConsensusResult {
        representatives: clustering.representatives,
        consensus: assignment.partition,
        objective: clustering.objective,
        provenance: clustering.provenance,
        trace: clustering.trace,
        soft_fallbacks: assignment.soft_fallbacks,
        dropped: assignment.dropped,
    })
}

/// Transportation distance between a consensus result and another partition
/// of the same dataset, a convenience for evaluating consensus quality in
/// the lifted space.
pub fn consensus_distance(
    ctx: &LiftContext,
    result: &ConsensusResult,
    other: &Partition,
) -> Result<EmdResult> {
    lift_emd(ctx, &result.consensus, other)
}
