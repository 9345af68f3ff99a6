//! Set-based comparison metrics between hard partitions: Rand distance and
//! best-assignment accuracy, plus Jaccard / NMI / VI baselines.
//!
//! All of these depend only on the contingency table of the two partitions,
//! so they are blind to where clusters sit in space; the lifted distances
//! exist precisely to fix that. They remain the standard yardsticks.

use crate::assignment::max_value_assignment;
use crate::error::{Error, Result};
use crate::partition::Partition;

fn require_hard<'a>(p: &'a Partition, name: &str) -> Result<&'a [usize]> {
    p.labels().ok_or_else(|| {
        Error::invalid_parameter(
            name,
            "metric requires a hard partition; call harden() first".to_string(),
        )
    })
}

fn check_same_n(pa: &Partition, pb: &Partition) -> Result<()> {
    if pa.n() != pb.n() {
        return Err(Error::DimensionMismatch {
            expected: pa.n(),
            got: pb.n(),
            context: "partition sizes".to_string(),
        });
    }
    Ok(())
}

/// Contingency table of two hard partitions: entry `(i, j)` counts points in
/// cluster `i` of `pa` and cluster `j` of `pb`. Row-major `pa.k() x pb.k()`.
pub fn contingency(pa: &Partition, pb: &Partition) -> Result<Vec<u64>> {
    check_same_n(pa, pb)?;
    let la = require_hard(pa, "pa")?;
    let lb = require_hard(pb, "pb")?;
    let mut table = vec![0u64; pa.k() * pb.k()];
    for (&a, &b) in la.iter().zip(lb) {
        table[a * pb.k() + b] += 1;
    }
    Ok(table)
}

/// Rand distance: the fraction of point pairs on which the partitions
/// disagree (same cluster in one, different in the other). Computed from
/// the contingency table in `O(k * k' + n)`; 0 for `n < 2` (no pairs).
pub fn rand_distance(pa: &Partition, pb: &Partition) -> Result<f64> {
    let table = contingency(pa, pb)?;
    let n = pa.n() as u64;
    if n < 2 {
        return Ok(0.0);
    }
    let (row_sums, col_sums) = table_margins(&table, pa.k(), pb.k());
    let sq = |v: &[u64]| v.iter().map(|&x| x * x).sum::<u64>();
    let cells_sq: u64 = table.iter().map(|&x| x * x).sum();
    // Ordered disagreeing pairs = sum a_i^2 + sum b_j^2 - 2 sum n_ij^2;
    // dividing by n(n-1) ordered pairs equals the displayed
    // 1 - (R_S + R_D) / C(n,2).
    let num = sq(&row_sums) + sq(&col_sums) - 2 * cells_sq;
    Ok(num as f64 / (n * (n - 1)) as f64)
}

/// Accuracy: the best fraction of points whose cluster maps to their true
/// class over injective cluster-to-class assignments. Requires
/// `pa.k() <= truth.k()`; exact via the assignment solver on the overlap
/// matrix.
pub fn accuracy(pa: &Partition, truth: &Partition) -> Result<f64> {
    if pa.k() > truth.k() {
        return Err(Error::invalid_parameter(
            "accuracy",
            format!(
                "clusters ({}) must not exceed classes ({})",
                pa.k(),
                truth.k()
            ),
        ));
    }
    let table = contingency(pa, truth)?;
    let values: Vec<f64> = table.iter().map(|&v| v as f64).collect();
    let assignment = max_value_assignment(&values, pa.k(), truth.k())?;
    let matched: u64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| table[i * truth.k() + j])
        .sum();
    Ok(matched as f64 / pa.n() as f64)
}

/// Jaccard distance on co-clustered pairs: `1 - s11 / (s11 + s10 + s01)`.
/// When no pair is co-clustered in either partition the distance is 0.
pub fn jaccard_distance(pa: &Partition, pb: &Partition) -> Result<f64> {
    let table = contingency(pa, pb)?;
    let (row_sums, col_sums) = table_margins(&table, pa.k(), pb.k());
    let choose2 = |v: u64| v * v.saturating_sub(1) / 2;
    let s11: u64 = table.iter().map(|&v| choose2(v)).sum();
    let sa: u64 = row_sums.iter().map(|&v| choose2(v)).sum();
    let sb: u64 = col_sums.iter().map(|&v| choose2(v)).sum();
    let denom = sa + sb - s11;
    if denom == 0 {
        return Ok(0.0);
    }
    Ok(1.0 - s11 as f64 / denom as f64)
}

/// Mutual information and entropies in nats from a contingency table.
fn information(table: &[u64], ka: usize, kb: usize, n: u64) -> (f64, f64, f64) {
    let (row_sums, col_sums) = table_margins(table, ka, kb);
    let nf = n as f64;
    let entropy = |v: &[u64]| -> f64 {
        -v.iter()
            .filter(|&&x| x > 0)
            .map(|&x| {
                let p = x as f64 / nf;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let nij = table[i * kb + j];
            if nij > 0 {
                let p = nij as f64 / nf;
                mi += p * (nf * nij as f64 / (row_sums[i] as f64 * col_sums[j] as f64)).ln();
            }
        }
    }
    (entropy(&row_sums), entropy(&col_sums), mi)
}

/// Normalized mutual information, `I / sqrt(H_a * H_b)`, in [0, 1]. When a
/// partition has a single cluster its entropy is 0; two such trivial
/// partitions score 1, a trivial against a non-trivial scores 0.
pub fn nmi(pa: &Partition, pb: &Partition) -> Result<f64> {
    let table = contingency(pa, pb)?;
    let (ha, hb, mi) = information(&table, pa.k(), pb.k(), pa.n() as u64);
    if ha == 0.0 || hb == 0.0 {
        return Ok(if ha == 0.0 && hb == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Variation of information, `H_a + H_b - 2I`, in nats; 0 iff the
/// partitions are identical as set partitions.
pub fn vi(pa: &Partition, pb: &Partition) -> Result<f64> {
    let table = contingency(pa, pb)?;
    let (ha, hb, mi) = information(&table, pa.k(), pb.k(), pa.n() as u64);
    Ok((ha + hb - 2.0 * mi).max(0.0))
}

fn table_margins(table: &[u64], ka: usize, kb: usize) -> (Vec<u64>, Vec<u64>) {
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for i in 0..ka {
        for j in 0..kb {
            row[i] += table[i * kb + j];
            col[j] += table[i * kb + j];
        }
    }
    (row, col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn hard(labels: &[usize]) -> Partition {
        Partition::from_labels(labels, None).unwrap()
    }

    /// O(n^2) reference: walk every pair and count disagreements.
    fn rand_by_pair_loop(la: &[usize], lb: &[usize]) -> f64 {
        let n = la.len();
        let mut disagree = 0u64;
        let mut pairs = 0u64;
        for i in 0..n {
            for j in (i + 1)..n {
                let same_a = la[i] == la[j];
                let same_b = lb[i] == lb[j];
                if same_a != same_b {
                    disagree += 1;
                }
                pairs += 1;
            }
        }
        disagree as f64 / pairs as f64
    }

    #[test]
    fn rand_distance_of_identical_partitions_is_zero() {
        let p = hard(&[0, 1, 0, 2, 1]);
        assert_eq!(rand_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn rand_distance_of_crossed_quartet_is_two_thirds() {
        // {ab|cd} vs {ac|bd}: 4 of the 6 pairs disagree.
        let pa = hard(&[0, 0, 1, 1]);
        let pb = hard(&[0, 1, 0, 1]);
        let got = rand_distance(&pa, &pb).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-15, "expected 2/3, got {got}");
        assert_eq!(got, rand_by_pair_loop(&[0, 0, 1, 1], &[0, 1, 0, 1]));
    }

    #[test]
    fn rand_distance_singletons_vs_one_cluster_is_one() {
        let pa = hard(&[0, 1, 2, 3]);
        let pb = hard(&[0, 0, 0, 0]);
        assert_eq!(rand_distance(&pa, &pb).unwrap(), 1.0);
    }

    #[test]
    fn contingency_path_matches_pair_loop_on_random_partitions() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..100 {
            let n = rng.gen_range(2..=60);
            let ka = rng.gen_range(1..=5.min(n));
            let kb = rng.gen_range(1..=5.min(n));
            let la: Vec<usize> = (0..n).map(|i| if i < ka { i } else { rng.gen_range(0..ka) }).collect();
            let lb: Vec<usize> = (0..n).map(|i| if i < kb { i } else { rng.gen_range(0..kb) }).collect();
            let fast = rand_distance(&hard(&la), &hard(&lb)).unwrap();
            let slow = rand_by_pair_loop(&la, &lb);
            assert!(
                (fast - slow).abs() < 1e-12,
                "contingency {fast} vs pair loop {slow}"
            );
        }
    }

    #[test]
    fn rand_distance_is_invariant_to_relabeling() {
        let pa = hard(&[0, 1, 2, 1, 0, 2]);
        let pb = hard(&[1, 1, 0, 0, 2, 2]);
        let relabeled = pb.permute_clusters(&[2, 0, 1]).unwrap();
        assert_eq!(
            rand_distance(&pa, &pb).unwrap(),
            rand_distance(&pa, &relabeled).unwrap()
        );
    }

    #[test]
    fn soft_partitions_are_refused() {
        let soft = Partition::from_rows(&[vec![0.5, 0.5], vec![0.4, 0.6]]).unwrap();
        let p = hard(&[0, 1]);
        assert!(rand_distance(&soft, &p).is_err());
        assert!(accuracy(&soft, &p).is_err());
    }

    #[test]
    fn accuracy_of_identical_partitions_is_one() {
        let p = hard(&[0, 1, 1, 0, 2]);
        assert_eq!(accuracy(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_after_moving_one_point() {
        // Two clusters of n/2; moving one point costs exactly 1/n.
        let truth = hard(&[0, 0, 0, 1, 1, 1]);
        let moved = hard(&[0, 0, 1, 1, 1, 1]);
        let got = accuracy(&moved, &truth).unwrap();
        assert!((got - (1.0 - 1.0 / 6.0)).abs() < 1e-15, "got {got}");
    }

    #[test]
    fn accuracy_matches_permutation_enumeration_on_3x3() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for _ in 0..50 {
            let n = rng.gen_range(6..=40);
            let mut la: Vec<usize> = (0..n).map(|i| if i < 3 { i } else { rng.gen_range(0..3) }).collect();
            let mut lb: Vec<usize> = (0..n).map(|i| if i < 3 { i } else { rng.gen_range(0..3) }).collect();
            la.rotate_left(1);
            lb.rotate_right(1);
            let pa = hard(&la);
            let truth = hard(&lb);
            let table = contingency(&pa, &truth).unwrap();
            let best = perms
                .iter()
                .map(|perm| {
                    (0..3)
                        .map(|i| table[i * 3 + perm[i]] as f64)
                        .sum::<f64>()
                        / n as f64
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let got = accuracy(&pa, &truth).unwrap();
            assert!(
                (got - best).abs() < 1e-12,
                "solver {got} vs enumerated {best}"
            );
        }
    }

    #[test]
    fn accuracy_rejects_more_clusters_than_classes() {
        let pa = hard(&[0, 1, 2]);
        let truth = hard(&[0, 1, 1]);
        assert!(accuracy(&pa, &truth).is_err());
    }

    #[test]
    fn jaccard_basics() {
        let p = hard(&[0, 0, 1, 1]);
        assert_eq!(jaccard_distance(&p, &p).unwrap(), 0.0);
        let q = hard(&[0, 1, 0, 1]);
        // No co-clustered pair survives in both: s11 = 0, distance 1.
        assert_eq!(jaccard_distance(&p, &q).unwrap(), 1.0);
        // Two all-singleton partitions have no pairs at all.
        let s = hard(&[0, 1, 2, 3]);
        assert_eq!(jaccard_distance(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn vi_of_crossed_quartet_is_two_ln_two() {
        let pa = hard(&[0, 0, 1, 1]);
        let pb = hard(&[0, 1, 0, 1]);
        let got = vi(&pa, &pb).unwrap();
        let want = 2.0 * (2.0f64).ln();
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        assert_eq!(vi(&pa, &pa).unwrap(), 0.0);
    }

    #[test]
    fn nmi_identity_and_trivial_conventions() {
        let p = hard(&[0, 0, 1, 1, 2]);
        assert!((nmi(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let one = hard(&[0, 0, 0, 0, 0]);
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
        assert_eq!(nmi(&p, &one).unwrap(), 0.0);
        let q = hard(&[0, 1, 0, 1, 0]);
        let independent = nmi(&p, &q).unwrap();
        assert!((0.0..=1.0).contains(&independent));
    }
}
