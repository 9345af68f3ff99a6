//! Seeded synthetic datasets for experiments and tests.
//!
//! The two-cluster and three-cluster generators also emit a pair of
//! perturbed partitions, FP and SP, built so that both disagree with the
//! reference partition RP on exactly the same contingency table (hence
//! exactly the same Rand distance) while differing sharply in geometry: FP
//! reassigns the points a y-axis projection would strand next to the
//! neighboring cluster, SP reassigns points from the far end of the x
//! spread. Set-based metrics cannot tell FP from SP; spatially aware ones
//! should.

use crate::error::{Error, Result};
use crate::partition::{DataSet, Partition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// A generated dataset with its reference partition and, for the paired
/// generators, the equal-Rand perturbations.
#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: DataSet,
    /// RP, the generative truth.
    pub truth: Partition,
    /// Perturbation adjacent to the neighboring cluster (y-projection
    /// flavor), when the generator defines one.
    pub fp: Option<Partition>,
    /// Perturbation far from the cluster it joins (x-projection flavor).
    pub sp: Option<Partition>,
}

fn trunc_normal(rng: &mut ChaCha12Rng, bound: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= bound {
            return z;
        }
    }
}

/// Indices of cluster `target` ordered by a coordinate score.
fn ranked_members<F>(labels: &[usize], target: usize, points: &[Vec<f64>], score: F) -> Vec<usize>
where
    F: Fn(&[f64]) -> f64,
{
    let mut idx: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == target)
        .map(|(i, _)| i)
        .collect();
    idx.sort_by(|&a, &b| score(&points[a]).total_cmp(&score(&points[b])).then(a.cmp(&b)));
    idx
}

fn flipped(labels: &[usize], victims: &[usize], to: usize) -> Result<Partition> {
    let mut out = labels.to_vec();
    for &i in victims {
        out[i] = to;
    }
    Partition::from_labels(&out, None)
}

/// Two vertically stacked Gaussian clusters (default n = 45), elongated
/// along x. RP separates top from bottom. FP moves the `t` lowest-y top
/// points into the bottom cluster; SP instead moves the `t` largest-x top
/// points. Both disagree with RP on the same table, so their Rand distances
/// are identical; FP's moved points sit just across the gap while SP's sit
/// a full cluster height away.
pub fn two_gauss(n: usize, seed: u64) -> Result<Generated> {
    if n < 8 {
        return Err(Error::invalid_parameter(
            "n",
            format!("two_gauss needs at least 8 points, got {n}"),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let na = n.div_ceil(2);
    let nb = n - na;
    let t = (n / 9).max(1);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (label, (count, cy)) in [(na, 1.1), (nb, -1.1)].into_iter().enumerate() {
        for _ in 0..count {
            let x = 1.2 * trunc_normal(&mut rng, 2.3);
            let y = cy + 0.45 * trunc_normal(&mut rng, 2.1);
            points.push(vec![x, y]);
            labels.push(label);
        }
    }
    let low_y = ranked_members(&labels, 0, &points, |p| p[1]);
    let high_x = ranked_members(&labels, 0, &points, |p| -p[0]);
    let dataset = DataSet::new(points)?;
    Ok(Generated {
        truth: Partition::from_labels(&labels, None)?,
        fp: Some(flipped(&labels, &low_y[..t], 1)?),
        sp: Some(flipped(&labels, &high_x[..t], 1)?),
        dataset,
    })
}

/// Three visibly separate clusters (default n = 24): one high, one at the
/// origin, one far right. Cluster sizes are chosen with the last two equal
/// so that FP (moves the `t` lowest-y top points into the middle cluster)
/// and SP (moves the `t` largest-x top points into the far-right cluster)
/// have exactly equal Rand distance to RP.
pub fn three_cluster(n: usize, seed: u64) -> Result<Generated> {
    if n < 9 {
        return Err(Error::invalid_parameter(
            "n",
            format!("three_cluster needs at least 9 points, got {n}"),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n2 = n / 3;
    let n3 = n2;
    let n1 = n - n2 - n3;
    let t = (n / 12).max(1);
    let centers = [(0.0, 2.4), (0.0, 0.0), (6.0, 0.0)];
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (label, &count) in [n1, n2, n3].iter().enumerate() {
        let (cx, cy) = centers[label];
        for _ in 0..count {
            let x = cx + 0.5 * trunc_normal(&mut rng, 1.8);
            let y = cy + 0.5 * trunc_normal(&mut rng, 1.8);
            points.push(vec![x, y]);
            labels.push(label);
        }
    }
    let low_y = ranked_members(&labels, 0, &points, |p| p[1]);
    let high_x = ranked_members(&labels, 0, &points, |p| -p[0]);
    let dataset = DataSet::new(points)?;
    Ok(Generated {
        truth: Partition::from_labels(&labels, None)?,
        fp: Some(flipped(&labels, &low_y[..t], 1)?),
        sp: Some(flipped(&labels, &high_x[..t], 2)?),
        dataset,
    })
}

/// `g` unit-variance Gaussian blobs with centers `sep` apart along a line,
/// `n` points split as evenly as possible. No FP/SP pair.
pub fn blobs(g: usize, sep: f64, n: usize, seed: u64) -> Result<Generated> {
    if g == 0 {
        return Err(Error::invalid_parameter("g", "need at least one blob".to_string()));
    }
    if n < g {
        return Err(Error::invalid_parameter(
            "n",
            format!("cannot spread {n} points over {g} blobs"),
        ));
    }
    if !sep.is_finite() || sep <= 0.0 {
        return Err(Error::invalid_parameter(
            "sep",
            format!("separation must be positive, got {sep}"),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for label in 0..g {
        let count = n / g + usize::from(label < n % g);
        let cx = label as f64 * sep;
        for _ in 0..count {
            points.push(vec![
                cx + trunc_normal(&mut rng, 3.0),
                trunc_normal(&mut rng, 3.0),
            ]);
            labels.push(label);
        }
    }
    Ok(Generated {
        dataset: DataSet::new(points)?,
        truth: Partition::from_labels(&labels, None)?,
        fp: None,
        sp: None,
    })
}

/// Copies a hard partition with `floor(fraction * n)` points flipped to a
/// uniformly random other cluster. Flips that would empty a cluster pick a
/// different victim, so the result keeps all k clusters.
pub fn flip_labels(p: &Partition, fraction: f64, seed: u64) -> Result<Partition> {
    let labels = p.labels().ok_or_else(|| {
        Error::invalid_parameter("p", "can only flip labels of a hard partition".to_string())
    })?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid_parameter(
            "fraction",
            format!("must lie in [0, 1], got {fraction}"),
        ));
    }
    if p.k() < 2 {
        return Err(Error::invalid_parameter(
            "p",
            "need at least two clusters to flip between".to_string(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = labels.to_vec();
    let mut sizes = vec![0usize; p.k()];
    for &l in &out {
        sizes[l] += 1;
    }
    let wanted = (fraction * p.n() as f64).floor() as usize;
    let mut touched = vec![false; p.n()];
    let mut flipped_count = 0;
    let mut guard = 0;
    while flipped_count < wanted && guard < 1000 * wanted.max(1) {
        guard += 1;
        let i = rng.gen_range(0..p.n());
        if touched[i] || sizes[out[i]] <= 1 {
            continue;
        }
        let mut to = rng.gen_range(0..p.k() - 1);
        if to >= out[i] {
            to += 1;
        }
        sizes[out[i]] -= 1;
        sizes[to] += 1;
        out[i] = to;
        touched[i] = true;
        flipped_count += 1;
    }
    Partition::from_labels(&out, Some(p.k()))
}
