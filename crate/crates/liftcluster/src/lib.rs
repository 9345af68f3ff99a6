//! Spatially aware comparison and aggregation of clusterings.
//!
//! Classical partition metrics (Rand, Jaccard, VI, ...) only count label
//! agreements, so they cannot tell a split that follows the data's spatial
//! structure from one that cuts across it. This crate lifts every cluster
//! to a vector in a kernel feature space — either exactly, through kernel
//! sums, or approximately, through seeded random Fourier features — and
//! compares whole partitions there:
//!
//! - [`dist::lift_emd`]: transportation distance between the weighted sets
//!   of cluster vectors (with the discrete kernel it is bounded by the Rand
//!   distance);
//! - [`dist::lift_h`]: Hausdorff gap between the cluster sets;
//! - [`dist::lift_kd`]: second-level kernel distance between them.
//!
//! The same lifted view drives consensus clustering
//! ([`consensus::run_consensus`]): pool every input partition's cluster
//! vectors, group them with weighted k-means or HAC, and reassign points to
//! the group representatives.
//!
//! The classical metrics live in [`metrics`] for comparison, synthetic
//! benchmark generators in [`synth`], and plain-text dataset/partition file
//! formats in [`io`].

pub mod assignment;
pub mod consensus;
pub mod dist;
pub mod embed;
pub mod error;
pub mod hac;
pub mod io;
pub mod kernel;
pub mod kmeans;
pub mod lift;
pub mod metrics;
pub mod partition;
pub mod synth;
pub mod transport;

pub use consensus::{
    assign_points, consensus_hac, consensus_kmeans, lift_ssd, pool, run_consensus,
    ConsensusConfig, ConsensusMethod, ConsensusResult, OutputKind,
};
pub use dist::{lift_emd, lift_h, lift_kd, to_weighted_set, transportation, LiftContext};
pub use embed::{embed_cluster, exact_gamma, normalize, ClusterSource, ClusterVector};
pub use error::{Error, Result};
pub use hac::Linkage;
pub use kernel::{median_bandwidth, Kernel};
pub use lift::{build_feature_map, FeatureMap, LiftConfig};
pub use metrics::{accuracy, jaccard_distance, nmi, rand_distance, vi};
pub use partition::{DataSet, Partition, PointWeights};
