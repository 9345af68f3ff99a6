//! Property-based tests: format round-trips, metric axioms, plan
//! feasibility, and invariance under relabeling, over randomized inputs.

use liftcluster::dist::EmdResult;
use liftcluster::io::{dataset_to_string, parse_dataset, parse_partition, partition_to_string};
use liftcluster::{
    embed_cluster, exact_gamma, lift_emd, normalize, pool, rand_distance, to_weighted_set,
    transportation, vi, build_feature_map, DataSet, Kernel, LiftConfig, LiftContext, Partition,
    PointWeights,
};
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

/// Hard labels over `n` points using every label in `0..k` for some k >= 1.
/// Raw draws may leave gaps; compacting guarantees a valid partition.
fn hard_labels(n: usize, kmax: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..kmax, n).prop_map(|raw| {
        let mut distinct: Vec<usize> = raw.clone();
        distinct.sort_unstable();
        distinct.dedup();
        raw.iter()
            .map(|l| distinct.binary_search(l).unwrap())
            .collect()
    })
}

/// Soft membership rows with strictly positive entries (no empty clusters),
/// each row normalized to sum exactly-as-computed to ~1.
fn soft_rows(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.05f64..1.0, k), n).prop_map(|rows| {
        rows.into_iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.into_iter().map(|v| v / s).collect()
            })
            .collect()
    })
}

fn small_points(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n)
}

fn unit_dataset(n: usize) -> DataSet {
    DataSet::new((0..n).map(|i| vec![i as f64, (i * i % 7) as f64]).collect()).unwrap()
}

fn discrete_ctx<'a>(ds: &'a DataSet, w: &'a PointWeights, kernel: &'a Kernel) -> LiftContext<'a> {
    LiftContext::exact(ds, w, kernel).unwrap()
}

// ---------------------------------------------------------------------------
// Round-trips
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hard_partition_files_round_trip(labels in hard_labels(12, 4)) {
        let ds = unit_dataset(12);
        let p = Partition::from_labels(&labels, None).unwrap();
        let text = partition_to_string(&p);
        let loaded = parse_partition(&text, &ds).unwrap();
        prop_assert!(loaded.relabeled.is_empty());
        prop_assert_eq!(loaded.partition.labels().unwrap(), &labels[..]);
    }

    #[test]
    fn soft_partition_files_round_trip(rows in soft_rows(9, 3)) {
        let ds = unit_dataset(9);
        let p = Partition::from_rows(&rows).unwrap();
        let text = partition_to_string(&p);
        let loaded = parse_partition(&text, &ds).unwrap();
        prop_assert_eq!(loaded.partition.n(), p.n());
        prop_assert_eq!(loaded.partition.k(), p.k());
        for i in 0..p.n() {
            for j in 0..p.k() {
                let a = p.weight(i, j);
                let b = loaded.partition.weight(i, j);
                prop_assert!((a - b).abs() <= 1e-12, "weight drifted: {} vs {}", a, b);
            }
        }
    }

    #[test]
    fn dataset_files_round_trip_bit_exactly(pts in small_points(10, 3)) {
        let ds = DataSet::new(pts).unwrap();
        let text = dataset_to_string(&ds);
        let back = parse_dataset(&text).unwrap();
        prop_assert_eq!(back.n(), ds.n());
        prop_assert_eq!(back.dim(), ds.dim());
        for i in 0..ds.n() {
            for (a, b) in ds.point(i).iter().zip(back.point(i)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Distance axioms and plan feasibility on the exact discrete path
// ---------------------------------------------------------------------------

fn check_marginals(res: &EmdResult, masses_a: &[f64], masses_b: &[f64], total: f64) {
    let plan = &res.plan;
    for (i, &m) in masses_a.iter().enumerate() {
        let row: f64 = (0..masses_b.len()).map(|j| plan.flow(i, j)).sum();
        assert!(
            (row - m / total).abs() <= 1e-9,
            "row {i} marginal {row} vs {}",
            m / total
        );
    }
    for (j, &m) in masses_b.iter().enumerate() {
        let col: f64 = (0..masses_a.len()).map(|i| plan.flow(i, j)).sum();
        assert!(
            (col - m / total).abs() <= 1e-9,
            "col {j} marginal {col} vs {}",
            m / total
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lift_emd_is_bitwise_symmetric_and_relabel_invariant(
        la in hard_labels(14, 4),
        lb in hard_labels(14, 3),
    ) {
        let ds = unit_dataset(14);
        let w = PointWeights::uniform(14);
        let kernel = Kernel::Discrete;
        let ctx = discrete_ctx(&ds, &w, &kernel);
        let pa = Partition::from_labels(&la, None).unwrap();
        let pb = Partition::from_labels(&lb, None).unwrap();

        let ab = lift_emd(&ctx, &pa, &pb).unwrap();
        let ba = lift_emd(&ctx, &pb, &pa).unwrap();
        prop_assert_eq!(ab.distance.to_bits(), ba.distance.to_bits());

        // Relabel pb's clusters by a rotation; the distance must not move
        // by a single bit.
        let k = pb.k();
        let perm: Vec<usize> = (0..k).map(|j| (j + 1) % k).collect();
        let pb_rot = pb.permute_clusters(&perm).unwrap();
        let rot = lift_emd(&ctx, &pa, &pb_rot).unwrap();
        prop_assert_eq!(ab.distance.to_bits(), rot.distance.to_bits());
    }

    #[test]
    fn lift_emd_plans_are_feasible_and_price_the_distance(
        la in hard_labels(12, 4),
        lb in hard_labels(12, 4),
    ) {
        let ds = unit_dataset(12);
        let w = PointWeights::uniform(12);
        let kernel = Kernel::Discrete;
        let ctx = discrete_ctx(&ds, &w, &kernel);
        let pa = Partition::from_labels(&la, None).unwrap();
        let pb = Partition::from_labels(&lb, None).unwrap();
        let res = lift_emd(&ctx, &pa, &pb).unwrap();

        let masses_a = pa.masses(&w).unwrap();
        let masses_b = pb.masses(&w).unwrap();
        check_marginals(&res, &masses_a, &masses_b, 12.0);
        prop_assert!(res.distance >= 0.0);
    }

    #[test]
    fn lift_emd_stays_below_rand_distance(
        la in hard_labels(16, 5),
        lb in hard_labels(16, 5),
    ) {
        let ds = unit_dataset(16);
        let w = PointWeights::uniform(16);
        let kernel = Kernel::Discrete;
        let ctx = discrete_ctx(&ds, &w, &kernel);
        let pa = Partition::from_labels(&la, None).unwrap();
        let pb = Partition::from_labels(&lb, None).unwrap();
        let emd = lift_emd(&ctx, &pa, &pb).unwrap().distance;
        let rand = rand_distance(&pa, &pb).unwrap();
        prop_assert!(emd <= rand + 1e-9, "emd {} > rand {}", emd, rand);
    }

    #[test]
    fn exact_gamma_is_symmetric_and_zero_on_self(
        la in hard_labels(10, 3),
        lb in hard_labels(10, 3),
    ) {
        let ds = unit_dataset(10);
        let pa = Partition::from_labels(&la, None).unwrap();
        let pb = Partition::from_labels(&lb, None).unwrap();
        let indicator = |p: &Partition, j: usize| -> Vec<f64> {
            (0..p.n()).map(|i| p.weight(i, j)).collect()
        };
        let kernel = Kernel::gaussian(1.5).unwrap();
        let u = indicator(&pa, 0);
        let v = indicator(&pb, 0);
        let uv = exact_gamma(&kernel, &ds, &u, &v).unwrap();
        let vu = exact_gamma(&kernel, &ds, &v, &u).unwrap();
        prop_assert_eq!(uv.to_bits(), vu.to_bits());
        let uu = exact_gamma(&kernel, &ds, &u, &u).unwrap();
        prop_assert!(uu.abs() <= 1e-7, "gamma(C, C) = {}", uu);
        prop_assert!(uv >= 0.0);
    }
}

// ---------------------------------------------------------------------------
// Clustering-comparison metrics
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rand_and_vi_are_symmetric_and_bounded(
        la in hard_labels(15, 4),
        lb in hard_labels(15, 4),
    ) {
        let pa = Partition::from_labels(&la, None).unwrap();
        let pb = Partition::from_labels(&lb, None).unwrap();
        let r_ab = rand_distance(&pa, &pb).unwrap();
        let r_ba = rand_distance(&pb, &pa).unwrap();
        prop_assert_eq!(r_ab.to_bits(), r_ba.to_bits());
        prop_assert!((0.0..=1.0).contains(&r_ab));
        let v_ab = vi(&pa, &pb).unwrap();
        let v_ba = vi(&pb, &pa).unwrap();
        prop_assert!((v_ab - v_ba).abs() <= 1e-12);
        prop_assert!(v_ab >= 0.0);
        prop_assert_eq!(rand_distance(&pa, &pa).unwrap(), 0.0);
        prop_assert!(vi(&pa, &pa).unwrap() <= 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Embedding, pooling and transportation under the feature map
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalization_is_idempotent_and_unit_norm(labels in hard_labels(10, 3)) {
        let ds = unit_dataset(10);
        let w = PointWeights::uniform(10);
        let p = Partition::from_labels(&labels, None).unwrap();
        let cfg = LiftConfig::with_rho(32).unwrap();
        let fm = build_feature_map(Kernel::gaussian(2.0).unwrap(), 2, &cfg, 10, 7).unwrap();
        for j in 0..p.k() {
            let raw = embed_cluster(&fm, &ds, &p, &w, j).unwrap();
            let once = normalize(&raw).unwrap();
            let norm: f64 = once.vec.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-12, "norm {}", norm);
            let twice = normalize(&once).unwrap();
            for (a, b) in once.vec.iter().zip(&twice.vec) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn pooled_weights_sum_to_one_per_partition(
        la in hard_labels(10, 3),
        lb in hard_labels(10, 4),
    ) {
        let ds = unit_dataset(10);
        let w = PointWeights::uniform(10);
        let cfg = LiftConfig::with_rho(16).unwrap();
        let fm = build_feature_map(Kernel::gaussian(2.0).unwrap(), 2, &cfg, 10, 3).unwrap();
        let pa = Partition::from_labels(&la, None).unwrap();
        let pb = Partition::from_labels(&lb, None).unwrap();
        let parts = [pa, pb];
        let q = pool(&fm, &ds, &parts, &w).unwrap();
        let mut per = [0.0f64; 2];
        for i in 0..q.len() {
            per[q.source(i).partition] += q.weight(i);
        }
        for (pi, s) in per.iter().enumerate() {
            prop_assert!((s - 1.0).abs() <= 1e-9, "partition {} pools mass {}", pi, s);
        }
        let total: f64 = q.weights().iter().sum();
        prop_assert!((total - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn transportation_is_symmetric_with_transposed_plans(
        la in hard_labels(10, 3),
        lb in hard_labels(10, 3),
    ) {
        let ds = unit_dataset(10);
        let w = PointWeights::uniform(10);
        let cfg = LiftConfig::with_rho(16).unwrap();
        let fm = build_feature_map(Kernel::gaussian(2.0).unwrap(), 2, &cfg, 10, 5).unwrap();
        let pa = Partition::from_labels(&la, None).unwrap();
        let pb = Partition::from_labels(&lb, None).unwrap();
        let a = to_weighted_set(&fm, &ds, &pa, &w).unwrap();
        let b = to_weighted_set(&fm, &ds, &pb, &w).unwrap();
        let ab = transportation(&a, &b).unwrap();
        let ba = transportation(&b, &a).unwrap();
        prop_assert_eq!(ab.distance.to_bits(), ba.distance.to_bits());
        for i in 0..a.len() {
            for j in 0..b.len() {
                prop_assert_eq!(ab.plan.flow(i, j).to_bits(), ba.plan.flow(j, i).to_bits());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Exact-path consistency: exact_gamma agrees with a direct double sum
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_gamma_matches_a_direct_double_sum(pts in small_points(8, 2)) {
        let ds = DataSet::new(pts).unwrap();
        let kernel = Kernel::gaussian(1.0).unwrap();
        let p: Vec<f64> = (0..8).map(|i| if i < 5 { 1.0 + i as f64 } else { 0.0 }).collect();
        let q: Vec<f64> = (0..8).map(|i| if i >= 3 { 0.5 } else { 0.0 }).collect();
        let got = exact_gamma(&kernel, &ds, &p, &q).unwrap();
        let s = |u: &[f64], v: &[f64]| -> f64 {
            let mut acc = 0.0;
            for (i, &ui) in u.iter().enumerate() {
                for (j, &vj) in v.iter().enumerate() {
                    if ui > 0.0 && vj > 0.0 {
                        acc += ui * vj * kernel.eval(ds.point(i), ds.point(j)).unwrap();
                    }
                }
            }
            acc
        };
        let want = (s(&p, &p) + s(&q, &q) - 2.0 * s(&p, &q)).max(0.0).sqrt();
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
    }
}
