//! Weighted Lloyd k-means over small vector sets.
//!
//! This is the engine behind the consensus step: the rows are pooled
//! cluster vectors (a few dozen at most), the weights are cluster masses.
//! Determinism matters more than speed here, so seeding, tie-breaking and
//! restart selection are all fully specified: ties in assignment go to the
//! lowest center index, seeding failures fall back to the lowest unchosen
//! row, and equal restart objectives keep the earliest restart.

use crate::error::{Error, Result};
use crate::kernel::sq_dist;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Objective decreases are allowed to wobble upward by at most this between
/// Lloyd iterations before we call it a bug.
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KMeansConfig {
    /// Number of centers.
    pub k: usize,
    /// Independent seeded runs; the best final objective wins.
    pub restarts: usize,
    /// Iteration cap per run.
    pub max_iters: usize,
    /// Seed for the whole procedure (all restarts draw from one stream).
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Final centers, `k` rows.
    pub centers: Vec<Vec<f64>>,
    /// Index of the center owning each input row.
    pub assignment: Vec<usize>,
    /// Weighted sum of squared distances to owned centers.
    pub objective: f64,
    /// Objective after each assignment step of the winning restart,
    /// nonincreasing within [`MONOTONE_TOL`].
    pub trace: Vec<f64>,
    /// Final objective of every restart, in run order.
    pub restart_objectives: Vec<f64>,
}

/// Weighted sum of squared distances from each row to its nearest center.
pub fn weighted_ssd(rows: &[Vec<f64>], weights: &[f64], centers: &[Vec<f64>]) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::EmptyInput("centers".to_string()));
    }
    let mut total = 0.0;
    for (row, &w) in rows.iter().zip(weights) {
        let nearest = centers
            .iter()
            .map(|c| sq_dist(row, c))
            .fold(f64::INFINITY, f64::min);
        total += w * nearest;
    }
    Ok(total)
}

fn validate(rows: &[Vec<f64>], weights: &[f64], cfg: &KMeansConfig) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("k-means rows".to_string()));
    }
    if weights.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: weights.len(),
            context: "k-means row weights".to_string(),
        });
    }
    let dim = rows[0].len();
    for row in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
                context: "k-means row lengths".to_string(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_parameter(
                "rows",
                "entries must be finite".to_string(),
            ));
        }
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid_parameter(
            "weights",
            "must be finite and nonnegative".to_string(),
        ));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Degenerate(
            "total row weight must be positive".to_string(),
        ));
    }
    if cfg.k == 0 || cfg.restarts == 0 || cfg.max_iters == 0 {
        return Err(Error::invalid_parameter(
            "config",
            "k, restarts and max_iters must all be positive".to_string(),
        ));
    }
    if cfg.k > rows.len() {
        return Err(Error::invalid_parameter(
            "k",
            format!("cannot place {} centers on {} rows", cfg.k, rows.len()),
        ));
    }
    Ok(())
}

/// Seeds `k` centers k-means++ style: the first by weight, the rest with
/// probability proportional to `weight * D^2` where `D` is the distance to
/// the nearest already-chosen center. When every remaining row sits on a
/// chosen center (duplicates), falls back to the lowest unchosen row index.
fn seed_centers(
    rows: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let first = WeightedIndex::new(weights.iter().map(|w| w.max(0.0)))
        .map(|d| d.sample(rng))
        .unwrap_or(0);
    chosen.push(first);
    let mut d_sq: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while chosen.len() < k {
        let scores: Vec<f64> = weights
            .iter()
            .zip(&d_sq)
            .map(|(w, d)| (w * d).max(0.0))
            .collect();
        let next = match WeightedIndex::new(scores.iter().copied()) {
            Ok(dist) => dist.sample(rng),
            // All mass sits on chosen centers; take the lowest fresh index.
            Err(_) => (0..rows.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= rows checked"),
        };
        chosen.push(next);
        for (d, row) in d_sq.iter_mut().zip(rows) {
            *d = d.min(sq_dist(row, &rows[next]));
        }
    }
    chosen
}

fn assign(rows: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    rows.iter()
        .map(|row| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = sq_dist(row, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn update_centers(
    rows: &[Vec<f64>],
    weights: &[f64],
    assignment: &[usize],
    centers: &mut [Vec<f64>],
) {
    let dim = rows[0].len();
    let k = centers.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut mass = vec![0.0; k];
    for ((row, &w), &a) in rows.iter().zip(weights).zip(assignment) {
        mass[a] += w;
        for (s, x) in sums[a].iter_mut().zip(row) {
            *s += w * x;
        }
    }
    for j in 0..k {
        if mass[j] > 0.0 {
            for (c, s) in centers[j].iter_mut().zip(&sums[j]) {
                *c = s / mass[j];
            }
        }
        // Zero-mass centers keep their position; the relocation pass deals
        // with them.
    }
}

/// Moves each center that owns no weight onto the row currently paying the
/// most (by `weight * distance^2`), one center per distinct row. Never
/// increases the assignment objective: an unused center gains a closer
/// option for some row and loses nothing.
fn relocate_empty(
    rows: &[Vec<f64>],
    weights: &[f64],
    assignment: &[usize],
    centers: &mut [Vec<f64>],
) {
    let k = centers.len();
    let mut mass = vec![0.0; k];
    for (&a, &w) in assignment.iter().zip(weights) {
        mass[a] += w;
    }
    let empties: Vec<usize> = (0..k).filter(|&j| mass[j] == 0.0).collect();
    if empties.is_empty() {
        return;
    }
    let mut contributions: Vec<(usize, f64)> = rows
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (row, &w))| (i, w * sq_dist(row, &centers[assignment[i]])))
        .collect();
    contributions.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (slot, &j) in empties.iter().enumerate() {
        if let Some(&(i, contribution)) = contributions.get(slot) {
            if contribution > 0.0 {
                centers[j] = rows[i].clone();
            }
        }
    }
}

/// Weighted k-means, deterministic in `cfg.seed`. Runs `cfg.restarts`
/// seeded Lloyd descents and keeps the one with the smallest final
/// objective (earliest run on ties).
pub fn weighted_kmeans(
    rows: &[Vec<f64>],
    weights: &[f64],
    cfg: &KMeansConfig,
) -> Result<KMeansResult> {
    validate(rows, weights, cfg)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult> = None;
    let mut restart_objectives = Vec::with_capacity(cfg.restarts);
    for _ in 0..cfg.restarts {
        let run = lloyd(rows, weights, cfg, &mut rng);
        restart_objectives.push(run.objective);
        let improves = match &best {
            None => true,
            Some(b) => run.objective < b.objective,
        };
        if improves {
            best = Some(run);
        }
    }
    let mut best = best.expect("restarts >= 1 checked");
    best.restart_objectives = restart_objectives;
    Ok(best)
}

fn lloyd(
    rows: &[Vec<f64>],
    weights: &[f64],
    cfg: &KMeansConfig,
    rng: &mut ChaCha12Rng,
) -> KMeansResult {
    let seeds = seed_centers(rows, weights, cfg.k, rng);
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&i| rows[i].clone()).collect();
    let mut assignment = assign(rows, &centers);
    let mut trace = Vec::new();
    let mut objective = objective_of(rows, weights, &assignment, &centers);
    trace.push(objective);
    for _ in 0..cfg.max_iters {
        update_centers(rows, weights, &assignment, &mut centers);
        relocate_empty(rows, weights, &assignment, &mut centers);
        let next_assignment = assign(rows, &centers);
        let next_objective = objective_of(rows, weights, &next_assignment, &centers);
        debug_assert!(
            next_objective <= objective + MONOTONE_TOL,
            "objective rose from {objective} to {next_objective}"
        );
        let stable = next_assignment == assignment;
        assignment = next_assignment;
        objective = next_objective;
        trace.push(objective);
        if stable {
            break;
        }
    }
    KMeansResult {
        centers,
        assignment,
        objective,
        trace,
        restart_objectives: Vec::new(),
    }
}

fn objective_of(
    rows: &[Vec<f64>],
    weights: &[f64],
    assignment: &[usize],
    centers: &[Vec<f64>],
) -> f64 {
    rows.iter()
        .zip(weights)
        .zip(assignment)
        .map(|((row, &w), &a)| w * sq_dist(row, &centers[a]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            restarts: 4,
            max_iters: 100,
            seed,
        }
    }

    #[test]
    fn recovers_two_separated_groups() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![10.0, 10.0],
            vec![10.1, 10.0],
        ];
        let weights = vec![1.0; 5];
        let res = weighted_kmeans(&rows, &weights, &cfg(2, 1)).unwrap();
        assert_eq!(res.assignment[0], res.assignment[1]);
        assert_eq!(res.assignment[0], res.assignment[2]);
        assert_eq!(res.assignment[3], res.assignment[4]);
        assert_ne!(res.assignment[0], res.assignment[3]);
        // Centers are the group means at the fixed point.
        let left = res.assignment[0];
        let want_left = [0.1 / 3.0, 0.1 / 3.0];
        for (c, w) in res.centers[left].iter().zip(want_left) {
            assert!((c - w).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_shift_the_center() {
        // One cluster; the center is the weighted mean, not the plain mean.
        let rows = vec![vec![0.0], vec![1.0]];
        let weights = vec![3.0, 1.0];
        let res = weighted_kmeans(&rows, &weights, &cfg(1, 5)).unwrap();
        assert!((res.centers[0][0] - 0.25).abs() < 1e-12);
        let want = 3.0 * 0.0625 + 1.0 * 0.5625;
        assert!((res.objective - want).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_rows_do_not_pull_centers() {
        let rows = vec![vec![0.0], vec![0.2], vec![100.0]];
        let weights = vec![1.0, 1.0, 0.0];
        let res = weighted_kmeans(&rows, &weights, &cfg(1, 2)).unwrap();
        assert!((res.centers[0][0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn trace_is_monotone_nonincreasing() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i % 7) as f64, (i % 3) as f64])
            .collect();
        let weights: Vec<f64> = (0..20).map(|i| 1.0 + (i % 4) as f64).collect();
        let res = weighted_kmeans(&rows, &weights, &cfg(3, 9)).unwrap();
        for pair in res.trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + MONOTONE_TOL,
                "trace rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert_eq!(res.objective, *res.trace.last().unwrap());
        assert_eq!(res.restart_objectives.len(), 4);
        assert!(res
            .restart_objectives
            .iter()
            .all(|o| *o >= res.objective - MONOTONE_TOL));
    }

    #[test]
    fn k_equal_to_rows_reaches_zero_objective() {
        let rows = vec![vec![0.0], vec![1.0], vec![5.0]];
        let weights = vec![1.0; 3];
        let res = weighted_kmeans(&rows, &weights, &cfg(3, 3)).unwrap();
        assert_eq!(res.objective, 0.0);
    }

    #[test]
    fn duplicate_rows_with_excess_k_terminate() {
        let rows = vec![vec![1.0], vec![1.0], vec![1.0]];
        let weights = vec![1.0; 3];
        let res = weighted_kmeans(&rows, &weights, &cfg(2, 4)).unwrap();
        assert_eq!(res.objective, 0.0);
    }

    #[test]
    fn same_seed_same_result_different_seed_may_differ() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i * i % 13) as f64]).collect();
        let weights = vec![1.0; 12];
        let a = weighted_kmeans(&rows, &weights, &cfg(3, 7)).unwrap();
        let b = weighted_kmeans(&rows, &weights, &cfg(3, 7)).unwrap();
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn rejects_bad_inputs() {
        let rows = vec![vec![0.0], vec![1.0]];
        let w = vec![1.0, 1.0];
        assert!(weighted_kmeans(&[], &[], &cfg(1, 0)).is_err());
        assert!(weighted_kmeans(&rows, &[1.0], &cfg(1, 0)).is_err());
        assert!(weighted_kmeans(&rows, &w, &cfg(3, 0)).is_err());
        assert!(weighted_kmeans(&rows, &w, &cfg(0, 0)).is_err());
        assert!(weighted_kmeans(&rows, &[0.0, 0.0], &cfg(1, 0)).is_err());
        assert!(weighted_kmeans(&rows, &[1.0, -1.0], &cfg(1, 0)).is_err());
    }

    #[test]
    fn weighted_ssd_matches_plain_loops() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 0.0]];
        let weights = vec![0.5, 1.5, 2.0];
        let centers = vec![vec![0.0, 0.0], vec![3.0, 3.0]];
        let mut want = 0.0;
        for (row, w) in rows.iter().zip(&weights) {
            let mut nearest = f64::INFINITY;
            for c in &centers {
                let d: f64 = row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                nearest = nearest.min(d);
            }
            want += w * nearest;
        }
        let got = weighted_ssd(&rows, &weights, &centers).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!(weighted_ssd(&rows, &weights, &[]).is_err());
    }
}
