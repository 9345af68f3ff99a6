//! Hierarchical agglomerative clustering over small vector sets.
//!
//! Bottom-up merging with Lance-Williams updates for single, complete and
//! average linkage on Euclidean distances. Everything is deterministic:
//! distance ties merge the lexicographically smallest cluster-id pair, and
//! a merged cluster keeps the smaller id. Average linkage weighs by vector
//! counts (UPGMA), so duplicated pooled vectors count twice, matching the
//! no-dedup pooling contract.

use crate::error::{Error, Result};
use crate::kernel::euclid;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Average,
    Complete,
    Single,
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(Error::invalid_parameter(
                "linkage",
                format!("unknown linkage {other:?}; expected average, complete or single"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HacResult {
    /// Group index (0..k) per input row; groups are numbered by their
    /// smallest member row.
    pub assignment: Vec<usize>,
    /// Each merge as (kept id, absorbed id, linkage distance), in order.
    pub merges: Vec<(usize, usize, f64)>,
}

/// Agglomerates `rows` until `k` groups remain.
pub fn hac(rows: &[Vec<f64>], k: usize, linkage: Linkage) -> Result<HacResult> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::EmptyInput("hac rows".to_string()));
    }
    let dim = rows[0].len();
    for row in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
                context: "hac row lengths".to_string(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_parameter(
                "rows",
                "entries must be finite".to_string(),
            ));
        }
    }
    if k == 0 || k > m {
        return Err(Error::invalid_parameter(
            "k",
            format!("group count must be in 1..={m}, got {k}"),
        ));
    }

    // Dense symmetric distance matrix over cluster ids; id = original row
    // until merged away.
    let mut dist = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = euclid(&rows[i], &rows[j]);
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }
    }
    let mut active: Vec<bool> = vec![true; m];
    let mut sizes: Vec<f64> = vec![1.0; m];
    let mut members: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    let mut merges = Vec::with_capacity(m - k);

    for _ in 0..(m - k) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..m {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..m {
                if !active[j] {
                    continue;
                }
                let d = dist[i * m + j];
                let closer = match best {
                    None => true,
                    Some((_, _, bd)) => d < bd,
                };
                if closer {
                    best = Some((i, j, d));
                }
            }
        }
        let (i, j, d) = best.expect("at least two active clusters remain");
        for l in 0..m {
            if !active[l] || l == i || l == j {
                continue;
            }
            let dil = dist[i * m + l];
            let djl = dist[j * m + l];
            let updated = match linkage {
                Linkage::Single => dil.min(djl),
                Linkage::Complete => dil.max(djl),
                Linkage::Average => (sizes[i] * dil + sizes[j] * djl) / (sizes[i] + sizes[j]),
            };
            dist[i * m + l] = updated;
            dist[l * m + i] = updated;
        }
        sizes[i] += sizes[j];
        active[j] = false;
        let absorbed = std::mem::take(&mut members[j]);
        members[i].extend(absorbed);
        merges.push((i, j, d));
    }

    let mut assignment = vec![0usize; m];
    let mut group_ids: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
    group_ids.sort_unstable();
    for (label, &id) in group_ids.iter().enumerate() {
        for &row in &members[id] {
            assignment[row] = label;
        }
    }
    Ok(HacResult { assignment, merges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows_1d(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn far_separated_pairs_merge_first() {
        let rows = rows_1d(&[0.0, 0.25, 10.0, 10.25]);
        let res = hac(&rows, 2, Linkage::Average).unwrap();
        assert_eq!(res.assignment, vec![0, 0, 1, 1]);
        assert_eq!(res.merges.len(), 2);
        // Both pair gaps are exactly 0.25 (representable); the
        // lexicographically smaller pair merges first.
        assert_eq!((res.merges[0].0, res.merges[0].1), (0, 1));
        assert!((res.merges[0].2 - 0.25).abs() < 1e-12);
        assert_eq!((res.merges[1].0, res.merges[1].1), (2, 3));
    }

    #[test]
    fn k_equal_rows_leaves_singletons() {
        let rows = rows_1d(&[3.0, 1.0, 2.0]);
        let res = hac(&rows, 3, Linkage::Single).unwrap();
        assert_eq!(res.assignment, vec![0, 1, 2]);
        assert!(res.merges.is_empty());
    }

    #[test]
    fn single_and_complete_disagree_on_a_chain() {
        // 0-1-2-3-4 chain plus a point at 4.6. Single linkage chains the
        // run of unit gaps; complete linkage peels off the right block.
        let rows = rows_1d(&[0.0, 1.0, 2.0, 3.0, 4.0, 4.6]);
        let single = hac(&rows, 2, Linkage::Single).unwrap();
        let complete = hac(&rows, 2, Linkage::Complete).unwrap();
        assert_eq!(single.assignment, vec![0, 0, 0, 0, 1, 1]);
        assert_eq!(complete.assignment, vec![0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn average_linkage_follows_the_upgma_formula() {
        // Points 0, 2, 5: after merging {0,2} (gap 2), the average distance
        // to 5 is (5 + 3) / 2 = 4.
        let rows = rows_1d(&[0.0, 2.0, 5.0]);
        let res = hac(&rows, 1, Linkage::Average).unwrap();
        assert_eq!(res.merges.len(), 2);
        assert!((res.merges[0].2 - 2.0).abs() < 1e-12);
        assert!((res.merges[1].2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(hac(&[], 1, Linkage::Average).is_err());
        let rows = rows_1d(&[0.0, 1.0]);
        assert!(hac(&rows, 0, Linkage::Average).is_err());
        assert!(hac(&rows, 3, Linkage::Average).is_err());
        assert!(hac(&[vec![0.0], vec![0.0, 1.0]], 1, Linkage::Average).is_err());
    }

    #[test]
    fn linkage_parses_from_strings() {
        assert_eq!("average".parse::<Linkage>().unwrap(), Linkage::Average);
        assert_eq!("complete".parse::<Linkage>().unwrap(), Linkage::Complete);
        assert_eq!("single".parse::<Linkage>().unwrap(), Linkage::Single);
        assert!("ward".parse::<Linkage>().is_err());
    }
}
