//! Dataset and partition data model: hard and soft assignments, validation,
//! hardening and cluster masses.

use crate::error::{Error, Result};

/// Row sums of a soft partition must equal 1 within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// An immutable n x d set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl DataSet {
    /// Builds a dataset, rejecting empty, ragged or non-finite input.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("dataset has no points".to_string()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::EmptyInput("points have zero dimension".to_string()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                    context: format!("point {i}"),
                });
            }
            if let Some(c) = p.iter().find(|c| !c.is_finite()) {
                return Err(Error::invalid_parameter(
                    "points",
                    format!("non-finite coordinate {c} at point {i}"),
                ));
            }
        }
        Ok(DataSet { points, dim })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Per-point weights in `[0, 1]`; default all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PointWeights(Vec<f64>);

impl PointWeights {
    pub fn uniform(n: usize) -> Self {
        PointWeights(vec![1.0; n])
    }

    pub fn new(w: Vec<f64>) -> Result<Self> {
        for (i, v) in w.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(Error::invalid_parameter(
                    "weights",
                    format!("weight {v} at index {i} is outside [0, 1]"),
                ));
            }
        }
        Ok(PointWeights(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Assignment {
    /// One cluster index per point.
    Hard(Vec<usize>),
    /// Row-major n x k membership weights.
    Soft(Vec<f64>),
}

/// A hard or soft assignment of n points to k clusters.
///
/// Soft rows are row-stochastic (sum to 1 within [`ROW_SUM_TOL`]); hard rows
/// are standard basis vectors, stored as labels. Every cluster must have at
/// least one point with positive weight: empty clusters are rejected on
/// construction. Operations that can legitimately empty a cluster
/// ([`Partition::harden`], consensus assignment) drop it and report the drop.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    n: usize,
    k: usize,
    assignment: Assignment,
}

impl Partition {
    /// Hard partition from per-point labels. `k` defaults to `max(label)+1`;
    /// when given explicitly, every cluster in `0..k` must be used.
    pub fn from_labels(labels: &[usize], k: Option<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("partition has no rows".to_string()));
        }
        let k = match k {
            Some(k) => k,
            None => labels.iter().max().unwrap() + 1,
        };
        if k == 0 {
            return Err(Error::InvalidPartition("k must be at least 1".to_string()));
        }
        let mut seen = vec![false; k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidPartition(format!(
                    "label {l} at row {i} exceeds k={k}"
                )));
            }
            seen[l] = true;
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("cluster {j} is empty")));
        }
        Ok(Partition {
            n: labels.len(),
            k,
            assignment: Assignment::Hard(labels.to_vec()),
        })
    }

    /// Partition from explicit membership rows. Rows consisting exactly of
    /// one `1.0` and zeros are recognized as hard; any other valid input
    /// yields a soft partition.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("partition has no rows".to_string()));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::InvalidPartition("k must be at least 1".to_string()));
        }
        let mut labels = Vec::with_capacity(rows.len());
        let mut all_hard = true;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: row.len(),
                    context: format!("partition row {i}"),
                });
            }
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidPartition(format!(
                        "weight {v} at row {i}, column {j} is invalid"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidPartition(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
            match hard_label(row) {
                Some(l) if all_hard => labels.push(l),
                _ => all_hard = false,
            }
        }
        let assignment = if all_hard {
            Assignment::Hard(labels)
        } else {
            Assignment::Soft(rows.iter().flatten().copied().collect())
        };
        let p = Partition {
            n: rows.len(),
            k,
            assignment,
        };
        p.check_no_empty_cluster()?;
        Ok(p)
    }

    fn check_no_empty_cluster(&self) -> Result<()> {
        let mut mass = vec![0.0; self.k];
        for i in 0..self.n {
            for (j, v) in self.nonzero(i) {
                mass[j] += v;
            }
        }
        if let Some(j) = mass.iter().position(|m| *m <= 0.0) {
            return Err(Error::InvalidPartition(format!("cluster {j} is empty")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_hard(&self) -> bool {
        matches!(self.assignment, Assignment::Hard(_))
    }

    /// Labels of a hard partition; `None` for soft ones.
    pub fn labels(&self) -> Option<&[usize]> {
        match &self.assignment {
            Assignment::Hard(l) => Some(l),
            Assignment::Soft(_) => None,
        }
    }

    /// Membership weight of point `i` in cluster `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.assignment {
            Assignment::Hard(l) => {
                if l[i] == j {
                    1.0
                } else {
                    0.0
                }
            }
            Assignment::Soft(m) => m[i * self.k + j],
        }
    }

    /// Nonzero memberships of row `i` as `(cluster, weight)` pairs.
    pub fn nonzero(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (label, row): (Option<usize>, &[f64]) = match &self.assignment {
            Assignment::Hard(l) => (Some(l[i]), &[]),
            Assignment::Soft(m) => (None, &m[i * self.k..(i + 1) * self.k]),
        };
        label
            .into_iter()
            .map(|l| (l, 1.0))
            .chain(row.iter().copied().enumerate().filter(|(_, v)| *v > 0.0))
    }

    /// Members of cluster `j` as `(point, membership)` pairs with positive
    /// membership.
    pub fn members(&self, j: usize) -> Vec<(usize, f64)> {
        (0..self.n)
            .filter_map(|i| {
                let w = self.weight(i, j);
                (w > 0.0).then_some((i, w))
            })
            .collect()
    }

    /// Checks shape compatibility with a dataset.
    pub fn validate_against(&self, ds: &DataSet) -> Result<()> {
        if self.n != ds.n() {
            return Err(Error::DimensionMismatch {
                expected: ds.n(),
                got: self.n,
                context: "partition rows vs dataset points".to_string(),
            });
        }
        Ok(())
    }

    /// Weighted mass of cluster `j`: `sum_i w_i * p(C_j | x_i)`.
    pub fn cluster_mass(&self, w: &PointWeights, j: usize) -> Result<f64> {
        if j >= self.k {
            return Err(Error::invalid_parameter(
                "cluster index",
                format!("{j} out of range for k={}", self.k),
            ));
        }
        if w.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: w.len(),
                context: "point weights vs partition rows".to_string(),
            });
        }
        Ok((0..self.n).map(|i| w.get(i) * self.weight(i, j)).sum())
    }

    /// All cluster masses at once.
    pub fn masses(&self, w: &PointWeights) -> Result<Vec<f64>> {
        (0..self.k).map(|j| self.cluster_mass(w, j)).collect()
    }

    /// Rounds every row to a basis vector at its argmax, ties to the lowest
    /// cluster index. Clusters emptied by the rounding are dropped (k
    /// shrinks) and reported by their original index.
    pub fn harden(&self) -> Hardened {
        let labels: Vec<usize> = match &self.assignment {
            Assignment::Hard(l) => l.clone(),
            Assignment::Soft(_) => (0..self.n)
                .map(|i| {
                    let mut best = 0usize;
                    let mut best_w = self.weight(i, 0);
                    for j in 1..self.k {
                        let w = self.weight(i, j);
                        if w > best_w {
                            best = j;
                            best_w = w;
                        }
                    }
                    best
                })
                .collect(),
        };
        let mut used = vec![false; self.k];
        for &l in &labels {
            used[l] = true;
        }
        let dropped: Vec<usize> = (0..self.k).filter(|j| !used[*j]).collect();
        let mut remap = vec![0usize; self.k];
        let mut next = 0usize;
        for j in 0..self.k {
            if used[j] {
                remap[j] = next;
                next += 1;
            }
        }
        let compacted: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
        Hardened {
            partition: Partition {
                n: self.n,
                k: next,
                assignment: Assignment::Hard(compacted),
            },
            dropped_clusters: dropped,
        }
    }

    /// Relabels clusters by `perm`, where new cluster `j` is old cluster
    /// `perm[j]`. `perm` must be a permutation of `0..k`.
    pub fn permute_clusters(&self, perm: &[usize]) -> Result<Partition> {
        if perm.len() != self.k {
            return Err(Error::invalid_parameter(
                "perm",
                format!("length {} does not match k={}", perm.len(), self.k),
            ));
        }
        let mut inverse = vec![usize::MAX; self.k];
        for (new_j, &old_j) in perm.iter().enumerate() {
            if old_j >= self.k || inverse[old_j] != usize::MAX {
                return Err(Error::invalid_parameter(
                    "perm",
                    "not a permutation of 0..k".to_string(),
                ));
            }
            inverse[old_j] = new_j;
        }
        let assignment = match &self.assignment {
            Assignment::Hard(l) => Assignment::Hard(l.iter().map(|&c| inverse[c]).collect()),
            Assignment::Soft(m) => {
                let mut out = vec![0.0; m.len()];
                for i in 0..self.n {
                    for new_j in 0..self.k {
                        out[i * self.k + new_j] = m[i * self.k + perm[new_j]];
                    }
                }
                Assignment::Soft(out)
            }
        };
        Ok(Partition {
            n: self.n,
            k: self.k,
            assignment,
        })
    }
}

/// Result of [`Partition::harden`]: the hard partition plus the original
/// indices of clusters that lost all their points.
#[derive(Debug, Clone)]
pub struct Hardened {
    pub partition: Partition,
    pub dropped_clusters: Vec<usize>,
}

/// `Some(j)` if `row` is exactly the `j`-th standard basis vector.
fn hard_label(row: &[f64]) -> Option<usize> {
    let mut label = None;
    for (j, &v) in row.iter().enumerate() {
        if v == 1.0 {
            if label.is_some() {
                return None;
            }
            label = Some(j);
        } else if v != 0.0 {
            return None;
        }
    }
    label
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_hard_partition_is_valid() {
        let labels: Vec<usize> = (0..5).collect();
        let p = Partition::from_labels(&labels, None).unwrap();
        assert_eq!(p.k(), 5);
        assert!(p.is_hard());
    }

    #[test]
    fn bad_row_sum_is_rejected() {
        let rows = vec![vec![0.4, 0.5], vec![0.5, 0.5]];
        let err = Partition::from_rows(&rows).unwrap_err();
        assert!(
            err.to_string().contains("row 0"),
            "violation must name the row, got: {err}"
        );
    }

    #[test]
    fn empty_cluster_is_rejected() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert!(Partition::from_rows(&rows).is_err(), "column of zeros");
        assert!(Partition::from_labels(&[0, 0, 1], Some(3)).is_err());
    }

    #[test]
    fn negative_weight_is_rejected() {
        let rows = vec![vec![1.2, -0.2], vec![0.5, 0.5]];
        assert!(Partition::from_rows(&rows).is_err());
    }

    #[test]
    fn basis_rows_are_recognized_as_hard() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = Partition::from_rows(&rows).unwrap();
        assert!(p.is_hard());
        assert_eq!(p.labels(), Some(&[0usize, 1][..]));
    }

    #[test]
    fn harden_takes_argmax_with_lowest_index_ties() {
        let rows = vec![vec![0.2, 0.8], vec![0.5, 0.5]];
        let h = Partition::from_rows(&rows).unwrap().harden();
        assert_eq!(h.partition.labels().unwrap(), &[1, 0]);
        assert!(h.dropped_clusters.is_empty());
    }

    #[test]
    fn harden_is_idempotent() {
        let rows = vec![vec![0.3, 0.7], vec![0.6, 0.4], vec![0.5, 0.5]];
        let once = Partition::from_rows(&rows).unwrap().harden().partition;
        let twice = once.harden().partition;
        assert_eq!(once, twice);
    }

    #[test]
    fn harden_drops_emptied_cluster_and_reports_it() {
        // Cluster 1 never wins an argmax.
        let rows = vec![
            vec![0.6, 0.4, 0.0],
            vec![0.0, 0.4, 0.6],
            vec![0.5, 0.2, 0.3],
        ];
        let h = Partition::from_rows(&rows).unwrap().harden();
        assert_eq!(h.dropped_clusters, vec![1]);
        assert_eq!(h.partition.k(), 2);
        assert_eq!(h.partition.labels().unwrap(), &[0, 1, 0]);
    }

    #[test]
    fn cluster_mass_counts_hard_members() {
        let p = Partition::from_labels(&[0, 0, 0, 0, 0, 0, 0, 1, 1, 1], None).unwrap();
        let w = PointWeights::uniform(10);
        assert_eq!(p.cluster_mass(&w, 0).unwrap(), 7.0);
        assert_eq!(p.cluster_mass(&w, 1).unwrap(), 3.0);
    }

    #[test]
    fn cluster_mass_sums_soft_column() {
        let rows = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 1.0]];
        let p = Partition::from_rows(&rows).unwrap();
        let w = PointWeights::uniform(3);
        assert!((p.cluster_mass(&w, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn masses_sum_to_n_for_unit_weights() {
        let rows = vec![
            vec![0.25, 0.25, 0.5],
            vec![0.1, 0.6, 0.3],
            vec![0.7, 0.1, 0.2],
            vec![0.3, 0.3, 0.4],
        ];
        let p = Partition::from_rows(&rows).unwrap();
        let total: f64 = p.masses(&PointWeights::uniform(4)).unwrap().iter().sum();
        assert!((total - 4.0).abs() < 1e-9, "masses must sum to n, got {total}");
    }

    #[test]
    fn zero_weights_give_zero_mass() {
        let p = Partition::from_labels(&[0, 1], None).unwrap();
        let w = PointWeights::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(p.cluster_mass(&w, 0).unwrap(), 0.0);
    }

    #[test]
    fn permute_clusters_round_trips() {
        let p = Partition::from_labels(&[0, 1, 2, 1], None).unwrap();
        let q = p.permute_clusters(&[2, 0, 1]).unwrap();
        assert_eq!(q.labels().unwrap(), &[1, 2, 0, 2]);
        let back = q.permute_clusters(&[1, 2, 0]).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn dataset_rejects_ragged_and_nonfinite() {
        assert!(DataSet::new(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(DataSet::new(vec![vec![f64::NAN]]).is_err());
        assert!(DataSet::new(vec![]).is_err());
    }
}
