//! Command-line surface: synthetic data generation, distance tables,
//! consensus clustering, feature-count sweeps and feature-map caching.
//!
//! Every command resolves its parameters (bandwidth, feature count, seeds),
//! hashes its inputs and writes a JSON run manifest next to its outputs, so
//! any stochastic result can be reproduced bit-identically on the same
//! platform. All randomness flows from the single `--seed` flag, expanded
//! into per-component seeds by [`component_seed`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use liftcluster::consensus::{ConsensusMethod, OutputKind};
use liftcluster::hac::Linkage;
use liftcluster::io::{atomic_write, load_dataset, load_partition, save_dataset, save_partition};
use liftcluster::lift::FeatureMap;
use liftcluster::synth::{blobs, three_cluster, two_gauss, Generated};
use liftcluster::{
    accuracy, build_feature_map, jaccard_distance, lift_emd, lift_h, lift_kd, median_bandwidth,
    nmi, rand_distance, run_consensus, vi, ConsensusConfig, DataSet, Error as LibError, Kernel,
    LiftConfig, LiftContext, Partition, PointWeights,
};

const SEED_DOC: &str = "\
Seed expansion: each command takes one --seed S. Component i draws its own \
seed as splitmix64(S xor (i + 1) * 0x9E3779B97F4A7C15). Components: \
0 = synthetic data generation, 1 = feature-map sampling, 2 = consensus \
center seeding. rho-sweep replicate t samples its map with component seed 1 \
plus t, so replicates are paired across feature counts.";

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

/// CLI failure classes. Exit codes: 0 success, 2 usage, 3 data/validation,
/// 4 numerical degeneracy.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Lib(LibError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Lib(e) => match e {
                LibError::InvalidParameter { .. } => 2,
                LibError::Degenerate(_) => 4,
                _ => 3,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

// ---------------------------------------------------------------------------
// Seed expansion
// ---------------------------------------------------------------------------

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Documented counter scheme turning the master `--seed` into independent
/// per-component seeds (see `SEED_DOC` / `--help`).
fn component_seed(master: u64, component: u64) -> u64 {
    splitmix64(master ^ (component + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const COMPONENT_GEN: u64 = 0;
const COMPONENT_FEATURE_MAP: u64 = 1;
const COMPONENT_CONSENSUS: u64 = 2;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "liftcluster",
    version,
    about = "Spatially aware clustering distances and consensus via kernel embeddings",
    long_about = None,
    after_help = SEED_DOC,
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset plus truth (and perturbed) partitions.
    Gen(GenArgs),
    /// Print a table of distances between partition pairs.
    Distance(DistanceArgs),
    /// Compute a consensus partition from several base partitions.
    Consensus(ConsensusArgs),
    /// Report approximation error of the lifted transport distance
    /// against the exact kernel path across feature counts.
    RhoSweep(RhoSweepArgs),
    /// Sample a feature map once and persist it for reuse.
    LiftCache(LiftCacheArgs),
}

#[derive(Args)]
struct KernelOpts {
    /// Kernel family: `gaussian` or `discrete` (exact point-identity
    /// kernel; admits no feature map).
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Gaussian bandwidth: a positive number, or `median` for the median
    /// pairwise-distance heuristic on the loaded data.
    #[arg(long, default_value = "median")]
    bandwidth: String,
}

#[derive(Args)]
struct AccuracyOpts {
    /// Explicit feature count, overriding the accuracy-driven formula.
    #[arg(long, conflicts_with_all = ["epsilon", "delta"])]
    rho: Option<usize>,
    /// Additive error bound on lifted distances (default 0.1).
    #[arg(long, requires = "delta")]
    epsilon: Option<f64>,
    /// Failure probability of the accuracy bound (default 0.05).
    #[arg(long, requires = "epsilon")]
    delta: Option<f64>,
}

impl AccuracyOpts {
    fn lift_config(&self) -> CliResult<LiftConfig> {
        if let Some(rho) = self.rho {
            return Ok(LiftConfig::with_rho(rho)?);
        }
        let eps = self.epsilon.unwrap_or(0.1);
        let delta = self.delta.unwrap_or(0.05);
        Ok(LiftConfig::new(eps, delta)?)
    }
}

#[derive(Args)]
struct GenArgs {
    /// Generator: two_gauss | three_cluster | blobs.
    #[arg(long)]
    spec: String,
    /// Point count (defaults: two_gauss 45, three_cluster 24; required
    /// for blobs).
    #[arg(long)]
    n: Option<usize>,
    /// Number of blobs (blobs only).
    #[arg(long)]
    g: Option<usize>,
    /// Center separation (blobs only).
    #[arg(long)]
    sep: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes <prefix>.points.txt, <prefix>.truth.txt and,
    /// when the generator defines them, <prefix>.fp.txt / <prefix>.sp.txt.
    #[arg(long)]
    out: PathBuf,
    /// Manifest path (default <prefix>.manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceArgs {
    /// Points file.
    #[arg(long)]
    data: PathBuf,
    /// Two or more partition files; the table covers every unordered pair.
    #[arg(long, num_args = 2.., required = true)]
    partitions: Vec<PathBuf>,
    /// Comma-separated subset of:
    /// liftemd,liftkd,lifth,rand,accuracy,jaccard,nmi,vi.
    #[arg(long, value_delimiter = ',', default_value = "liftemd,rand")]
    metrics: Vec<String>,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    accuracy: AccuracyOpts,
    /// Reuse a persisted feature map instead of sampling one.
    #[arg(long, conflicts_with_all = ["rho", "epsilon", "delta"])]
    lift_cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the table as RFC-4180 CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Manifest path (default: next to --csv, else liftcluster-manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ConsensusArgs {
    /// Points file.
    #[arg(long)]
    data: PathBuf,
    /// One or more base partition files.
    #[arg(long, num_args = 1.., required = true)]
    partitions: Vec<PathBuf>,
    /// Number of consensus clusters.
    #[arg(long)]
    k: usize,
    /// Grouping in the lifted space: kmeans | hac.
    #[arg(long, default_value = "kmeans")]
    method: String,
    /// Linkage for --method hac: average | complete | single.
    #[arg(long, default_value = "average")]
    linkage: String,
    /// Emit a soft consensus partition instead of hard labels.
    #[arg(long)]
    soft: bool,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    accuracy: AccuracyOpts,
    /// Reuse a persisted feature map instead of sampling one.
    #[arg(long, conflicts_with_all = ["rho", "epsilon", "delta"])]
    lift_cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// K-means restarts (kmeans method only).
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Iteration cap per k-means run.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Output partition file.
    #[arg(long)]
    out: PathBuf,
    /// Truth labels to evaluate against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write the evaluation report as RFC-4180 CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Manifest path (default <out>.manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RhoSweepArgs {
    /// Points file (at most 5000 points; the exact reference path is
    /// quadratic in n).
    #[arg(long)]
    data: PathBuf,
    /// First partition file.
    #[arg(long)]
    pa: PathBuf,
    /// Second partition file.
    #[arg(long)]
    pb: PathBuf,
    /// Comma-separated feature counts to test.
    #[arg(long, value_delimiter = ',', required = true)]
    rhos: Vec<usize>,
    /// Independent feature-map draws per feature count.
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the table as RFC-4180 CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Manifest path (default: next to --csv, else liftcluster-manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct LiftCacheArgs {
    /// Points file the map will be used with (fixes dimension and the
    /// accuracy-driven feature count).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    kernel: KernelOpts,
    #[command(flatten)]
    accuracy: AccuracyOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to store the serialized feature map (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Manifest path (default <out>.manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Manifest plumbing
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    /// Fully resolved parameters: explicit flags plus every derived value
    /// (numeric bandwidth, feature count, component seeds).
    parameters: serde_json::Value,
    /// SHA-256 of every input file.
    input_digests: BTreeMap<String, String>,
    /// Files this run wrote (besides the manifest itself).
    outputs: Vec<String>,
}

fn sha256_hex(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(LibError::from)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn digest_inputs(paths: &[&Path]) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths {
        out.insert(p.display().to_string(), sha256_hex(p)?);
    }
    Ok(out)
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest).map_err(LibError::from)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)?;
    Ok(())
}

fn default_manifest_path(primary_output: Option<&Path>) -> PathBuf {
    match primary_output {
        Some(p) => {
            let mut name = p.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            p.with_file_name(name)
        }
        None => PathBuf::from("liftcluster-manifest.json"),
    }
}

// ---------------------------------------------------------------------------
// CSV (RFC-4180 style: CRLF records, quotes doubled, fields quoted when
// they contain commas, quotes or line breaks)
// ---------------------------------------------------------------------------

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = String::new();
    let encode = |fields: &[String]| -> String {
        fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
    };
    out.push_str(&encode(header));
    out.push_str("\r\n");
    for row in rows {
        out.push_str(&encode(row));
        out.push_str("\r\n");
    }
    atomic_write(path, out.as_bytes())?;
    Ok(())
}

/// Prints rows as an aligned text table with a header.
fn print_table(header: &[String], rows: &[Vec<String>]) {
    let cols = header.len();
    let mut width = vec![0usize; cols];
    for (c, h) in header.iter().enumerate() {
        width[c] = h.len();
    }
    for row in rows {
        for (c, v) in row.iter().enumerate() {
            width[c] = width[c].max(v.len());
        }
    }
    let fmt_row = |row: &[String]| {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| format!("{:<w$}", v, w = width[c]))
            .collect();
        cells.join("  ").trim_end().to_string()
    };
    println!("{}", fmt_row(header));
    for row in rows {
        println!("{}", fmt_row(row));
    }
}

// ---------------------------------------------------------------------------
// Kernel/bandwidth resolution
// ---------------------------------------------------------------------------

/// The bandwidth flag, resolved against the data. The numeric value is kept
/// even for the discrete kernel because the cluster-level comparison kernel
/// still needs one.
fn resolve_bandwidth(opts: &KernelOpts, points: &[Vec<f64>]) -> CliResult<f64> {
    if opts.bandwidth == "median" {
        return Ok(median_bandwidth(points)?);
    }
    let bw: f64 = opts
        .bandwidth
        .parse()
        .map_err(|_| CliError::Usage(format!("--bandwidth must be `median` or a number, got {:?}", opts.bandwidth)))?;
    if !bw.is_finite() || bw <= 0.0 {
        return Err(CliError::Usage(format!("--bandwidth must be positive, got {bw}")));
    }
    Ok(bw)
}

fn resolve_kernel(opts: &KernelOpts, bandwidth: f64) -> CliResult<Kernel> {
    match opts.kernel.as_str() {
        "gaussian" => Ok(Kernel::gaussian(bandwidth)?),
        "discrete" => Ok(Kernel::Discrete),
        other => Err(CliError::Usage(format!(
            "--kernel must be `gaussian` or `discrete`, got {other:?}"
        ))),
    }
}

/// Loads a cached map or samples a fresh one for `ds`.
fn obtain_feature_map(
    cache: Option<&Path>,
    kernel: Kernel,
    ds: &DataSet,
    cfg: &LiftConfig,
    seed: u64,
) -> CliResult<FeatureMap> {
    if let Some(path) = cache {
        let fm = FeatureMap::load(path)?;
        if fm.dim() != ds.dim() {
            return Err(CliError::Data(format!(
                "cached feature map expects dimension {}, data has {}",
                fm.dim(),
                ds.dim()
            )));
        }
        return Ok(fm);
    }
    match kernel {
        Kernel::Gaussian { .. } => Ok(build_feature_map(kernel, ds.dim(), cfg, ds.n(), seed)?),
        Kernel::Discrete => Err(CliError::Usage(
            "the discrete kernel admits no feature map; this command needs --kernel gaussian"
                .to_string(),
        )),
    }
}

fn file_label(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn run_gen(args: &GenArgs) -> CliResult<()> {
    let seed = component_seed(args.seed, COMPONENT_GEN);
    let forbid = |name: &str, set: bool| -> CliResult<()> {
        if set {
            Err(CliError::Usage(format!(
                "--{name} only applies to --spec blobs"
            )))
        } else {
            Ok(())
        }
    };
    let generated: Generated = match args.spec.as_str() {
        "two_gauss" => {
            forbid("g", args.g.is_some())?;
            forbid("sep", args.sep.is_some())?;
            two_gauss(args.n.unwrap_or(45), seed)?
        }
        "three_cluster" => {
            forbid("g", args.g.is_some())?;
            forbid("sep", args.sep.is_some())?;
            three_cluster(args.n.unwrap_or(24), seed)?
        }
        "blobs" => {
            let n = args.n.ok_or_else(|| {
                CliError::Usage("--spec blobs requires --n".to_string())
            })?;
            let g = args.g.ok_or_else(|| {
                CliError::Usage("--spec blobs requires --g".to_string())
            })?;
            let sep = args.sep.ok_or_else(|| {
                CliError::Usage("--spec blobs requires --sep".to_string())
            })?;
            blobs(g, sep, n, seed)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "--spec must be two_gauss, three_cluster or blobs, got {other:?}"
            )))
        }
    };

    let prefix = args.out.display();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let points_path = PathBuf::from(format!("{prefix}.points.txt"));
    save_dataset(&generated.dataset, &points_path)?;
    outputs.push(points_path);
    let truth_path = PathBuf::from(format!("{prefix}.truth.txt"));
    save_partition(&generated.truth, &truth_path)?;
    outputs.push(truth_path);
    for (tag, part) in [("fp", &generated.fp), ("sp", &generated.sp)] {
        if let Some(p) = part {
            let path = PathBuf::from(format!("{prefix}.{tag}.txt"));
            save_partition(p, &path)?;
            outputs.push(path);
        }
    }

    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{prefix}.manifest.json")));
    let manifest = RunManifest {
        tool: "liftcluster",
        version: env!("CARGO_PKG_VERSION"),
        command: "gen",
        parameters: serde_json::json!({
            "spec": args.spec,
            "n": generated.dataset.n(),
            "dim": generated.dataset.dim(),
            "g": args.g,
            "sep": args.sep,
            "seed": args.seed,
            "component_seed_gen": seed,
        }),
        input_digests: BTreeMap::new(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    write_manifest(&manifest_path, &manifest)?;

    println!(
        "generated {} ({} points, {} clusters) -> {}.*",
        args.spec,
        generated.dataset.n(),
        generated.truth.k(),
        prefix
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// distance
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
enum Metric {
    LiftEmd,
    LiftKd,
    LiftH,
    Rand,
    Accuracy,
    Jaccard,
    Nmi,
    Vi,
}

impl Metric {
    fn parse(name: &str) -> CliResult<Metric> {
        Ok(match name {
            "liftemd" => Metric::LiftEmd,
            "liftkd" => Metric::LiftKd,
            "lifth" => Metric::LiftH,
            "rand" => Metric::Rand,
            "accuracy" => Metric::Accuracy,
            "jaccard" => Metric::Jaccard,
            "nmi" => Metric::Nmi,
            "vi" => Metric::Vi,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown metric {other:?}; choose from \
                     liftemd,liftkd,lifth,rand,accuracy,jaccard,nmi,vi"
                )))
            }
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Metric::LiftEmd => "liftemd",
            Metric::LiftKd => "liftkd",
            Metric::LiftH => "lifth",
            Metric::Rand => "rand",
            Metric::Accuracy => "accuracy",
            Metric::Jaccard => "jaccard",
            Metric::Nmi => "nmi",
            Metric::Vi => "vi",
        }
    }

    fn needs_lift(&self) -> bool {
        matches!(self, Metric::LiftEmd | Metric::LiftKd | Metric::LiftH)
    }
}

fn run_distance(args: &DistanceArgs) -> CliResult<()> {
    let metrics: Vec<Metric> = args
        .metrics
        .iter()
        .map(|m| Metric::parse(m.trim()))
        .collect::<CliResult<_>>()?;
    if metrics.is_empty() {
        return Err(CliError::Usage("--metrics must name at least one metric".to_string()));
    }

    let ds = load_dataset(&args.data)?;
    let parts: Vec<Partition> = args
        .partitions
        .iter()
        .map(|p| Ok(load_partition(p, &ds)?.partition))
        .collect::<CliResult<_>>()?;
    let w = PointWeights::uniform(ds.n());

    // The discrete kernel has no bandwidth of its own; resolve one only when
    // the cluster-level comparison kernel (liftkd) needs it, so purely
    // discrete runs work on data too small for the median heuristic.
    let needs_bandwidth =
        args.kernel.kernel != "discrete" || metrics.contains(&Metric::LiftKd);
    let bandwidth: Option<f64> = if needs_bandwidth {
        Some(resolve_bandwidth(&args.kernel, ds.points())?)
    } else {
        None
    };
    let kernel = resolve_kernel(&args.kernel, bandwidth.unwrap_or(1.0))?;
    let cfg = args.accuracy.lift_config()?;
    let fm_seed = component_seed(args.seed, COMPONENT_FEATURE_MAP);

    // Lifted metrics go through the feature map for the Gaussian kernel and
    // through exact kernel sums for the discrete one.
    let needs_lift = metrics.iter().any(Metric::needs_lift);
    let fm: Option<FeatureMap> = if needs_lift && matches!(kernel, Kernel::Gaussian { .. }) {
        Some(obtain_feature_map(
            args.lift_cache.as_deref(),
            kernel,
            &ds,
            &cfg,
            fm_seed,
        )?)
    } else {
        None
    };
    let ctx: Option<LiftContext> = if needs_lift {
        Some(match &fm {
            Some(map) => LiftContext::approx(&ds, &w, map)?,
            None => LiftContext::exact(&ds, &w, &kernel)?,
        })
    } else {
        None
    };

    let mut header: Vec<String> = vec!["a".to_string(), "b".to_string()];
    header.extend(metrics.iter().map(|m| m.name().to_string()));
    let mut text_rows: Vec<Vec<String>> = Vec::new();
    let mut csv_rows: Vec<Vec<String>> = Vec::new();
    for i in 0..parts.len() {
        for j in (i + 1)..parts.len() {
            let (pa, pb) = (&parts[i], &parts[j]);
            let mut values: Vec<f64> = Vec::with_capacity(metrics.len());
            for m in &metrics {
                let v = match m {
                    Metric::LiftEmd => lift_emd(ctx.as_ref().unwrap(), pa, pb)?.distance,
                    Metric::LiftKd => {
                        lift_kd(ctx.as_ref().unwrap(), pa, pb, bandwidth.unwrap())?
                    }
                    Metric::LiftH => lift_h(ctx.as_ref().unwrap(), pa, pb)?,
                    Metric::Rand => rand_distance(pa, pb)?,
                    Metric::Accuracy => accuracy(pa, pb)?,
                    Metric::Jaccard => jaccard_distance(pa, pb)?,
                    Metric::Nmi => nmi(pa, pb)?,
                    Metric::Vi => vi(pa, pb)?,
                };
                values.push(v);
            }
            let names = vec![file_label(&args.partitions[i]), file_label(&args.partitions[j])];
            let mut text = names.clone();
            text.extend(values.iter().map(|v| format!("{v:.4}")));
            text_rows.push(text);
            let mut csv = names;
            csv.extend(values.iter().map(|v| format!("{v}")));
            csv_rows.push(csv);
        }
    }

    print_table(&header, &text_rows);
    if let Some(csv_path) = &args.csv {
        write_csv(csv_path, &header, &csv_rows)?;
    }

    let mut inputs: Vec<&Path> = vec![&args.data];
    inputs.extend(args.partitions.iter().map(PathBuf::as_path));
    if let Some(cache) = &args.lift_cache {
        inputs.push(cache);
    }
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(args.csv.as_deref()));
    let manifest = RunManifest {
        tool: "liftcluster",
        version: env!("CARGO_PKG_VERSION"),
        command: "distance",
        parameters: serde_json::json!({
            "metrics": metrics.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "kernel": args.kernel.kernel,
            "bandwidth_flag": args.kernel.bandwidth,
            "bandwidth": bandwidth,
            "rho": fm.as_ref().map(FeatureMap::rho),
            "epsilon": args.accuracy.epsilon,
            "delta": args.accuracy.delta,
            "lift_cache": args.lift_cache.as_ref().map(|p| p.display().to_string()),
            "seed": args.seed,
            "component_seed_feature_map": fm_seed,
        }),
        input_digests: digest_inputs(&inputs)?,
        outputs: args
            .csv
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    write_manifest(&manifest_path, &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// consensus
// ---------------------------------------------------------------------------

fn run_consensus_cmd(args: &ConsensusArgs) -> CliResult<()> {
    let ds = load_dataset(&args.data)?;
    let parts: Vec<Partition> = args
        .partitions
        .iter()
        .map(|p| Ok(load_partition(p, &ds)?.partition))
        .collect::<CliResult<_>>()?;
    let w = PointWeights::uniform(ds.n());

    let method = match args.method.as_str() {
        "kmeans" => ConsensusMethod::KMeans,
        "hac" => ConsensusMethod::Hac,
        other => {
            return Err(CliError::Usage(format!(
                "--method must be `kmeans` or `hac`, got {other:?}"
            )))
        }
    };
    let linkage: Linkage = args
        .linkage
        .parse()
        .map_err(|_| CliError::Usage(format!(
            "--linkage must be average, complete or single, got {:?}",
            args.linkage
        )))?;

    let bandwidth = resolve_bandwidth(&args.kernel, ds.points())?;
    let kernel = resolve_kernel(&args.kernel, bandwidth)?;
    let cfg = args.accuracy.lift_config()?;
    let fm_seed = component_seed(args.seed, COMPONENT_FEATURE_MAP);
    let fm = obtain_feature_map(args.lift_cache.as_deref(), kernel, &ds, &cfg, fm_seed)?;

    let mut ccfg = ConsensusConfig::new(args.k);
    ccfg.method = method;
    ccfg.hac_linkage = linkage;
    ccfg.kmeans_restarts = args.restarts;
    ccfg.kmeans_max_iters = args.max_iters;
    ccfg.seed = component_seed(args.seed, COMPONENT_CONSENSUS);
    ccfg.output_kind = if args.soft { OutputKind::Soft } else { OutputKind::Hard };

    let result = run_consensus(&fm, &ds, &parts, &w, &ccfg)?;
    save_partition(&result.consensus, &args.out)?;
    // Rand comparisons need hard labels; a soft consensus is evaluated
    // through its argmax labeling.
    let eval_partition = if result.consensus.is_hard() {
        result.consensus.clone()
    } else {
        result.consensus.harden().partition
    };

    println!("consensus objective (pooled sum of squares): {:.6}", result.objective);
    println!(
        "consensus partition: {} clusters ({}), {} dropped representatives, {} soft fallbacks",
        result.consensus.k(),
        if result.consensus.is_hard() { "hard" } else { "soft" },
        result.dropped.len(),
        result.soft_fallbacks.len()
    );
    let mut eval_header = vec!["comparison".to_string(), "rand_distance".to_string()];
    let mut eval_rows: Vec<Vec<String>> = Vec::new();
    let mut csv_rows: Vec<Vec<String>> = Vec::new();
    for (path, p) in args.partitions.iter().zip(&parts) {
        let r = rand_distance(&eval_partition, p)?;
        eval_rows.push(vec![format!("input {}", file_label(path)), format!("{r:.4}")]);
        csv_rows.push(vec![format!("input {}", file_label(path)), format!("{r}")]);
    }
    let truth = args
        .truth
        .as_ref()
        .map(|p| Ok::<_, CliError>(load_partition(p, &ds)?.partition))
        .transpose()?;
    if let (Some(path), Some(t)) = (&args.truth, &truth) {
        let r = rand_distance(&eval_partition, t)?;
        eval_rows.push(vec![format!("truth {}", file_label(path)), format!("{r:.4}")]);
        csv_rows.push(vec![format!("truth {}", file_label(path)), format!("{r}")]);
    }
    print_table(&eval_header, &eval_rows);
    if let Some(csv_path) = &args.csv {
        eval_header[0] = "comparison".to_string();
        write_csv(csv_path, &eval_header, &csv_rows)?;
    }

    let mut inputs: Vec<&Path> = vec![&args.data];
    inputs.extend(args.partitions.iter().map(PathBuf::as_path));
    if let Some(t) = &args.truth {
        inputs.push(t);
    }
    if let Some(cache) = &args.lift_cache {
        inputs.push(cache);
    }
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(Some(&args.out)));
    let manifest = RunManifest {
        tool: "liftcluster",
        version: env!("CARGO_PKG_VERSION"),
        command: "consensus",
        parameters: serde_json::json!({
            "k": args.k,
            "method": args.method,
            "linkage": args.linkage,
            "soft": args.soft,
            "kernel": args.kernel.kernel,
            "bandwidth_flag": args.kernel.bandwidth,
            "bandwidth": bandwidth,
            "rho": fm.rho(),
            "epsilon": args.accuracy.epsilon,
            "delta": args.accuracy.delta,
            "lift_cache": args.lift_cache.as_ref().map(|p| p.display().to_string()),
            "restarts": args.restarts,
            "max_iters": args.max_iters,
            "seed": args.seed,
            "component_seed_feature_map": fm_seed,
            "component_seed_consensus": ccfg.seed,
            "objective": result.objective,
        }),
        input_digests: digest_inputs(&inputs)?,
        outputs: {
            let mut o = vec![args.out.display().to_string()];
            o.extend(args.csv.iter().map(|p| p.display().to_string()));
            o
        },
    };
    write_manifest(&manifest_path, &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// rho-sweep
// ---------------------------------------------------------------------------

/// Largest dataset the exact reference path accepts: the kernel double sums
/// are quadratic in n, so bigger inputs are refused rather than left to
/// crawl.
const RHO_SWEEP_MAX_N: usize = 5000;

fn run_rho_sweep(args: &RhoSweepArgs) -> CliResult<()> {
    let ds = load_dataset(&args.data)?;
    if ds.n() > RHO_SWEEP_MAX_N {
        return Err(CliError::Data(format!(
            "dataset has {} points; the exact reference path is refused above {RHO_SWEEP_MAX_N}",
            ds.n()
        )));
    }
    if args.rhos.is_empty() {
        return Err(CliError::Usage("--rhos must list at least one feature count".to_string()));
    }
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".to_string()));
    }
    let pa = load_partition(&args.pa, &ds)?.partition;
    let pb = load_partition(&args.pb, &ds)?.partition;
    let w = PointWeights::uniform(ds.n());

    let bandwidth = resolve_bandwidth(&args.kernel, ds.points())?;
    let kernel = resolve_kernel(&args.kernel, bandwidth)?;
    if matches!(kernel, Kernel::Discrete) {
        return Err(CliError::Usage(
            "rho-sweep compares the feature map against exact Gaussian sums; \
             use --kernel gaussian"
                .to_string(),
        ));
    }
    let exact_ctx = LiftContext::exact(&ds, &w, &kernel)?;
    let exact = lift_emd(&exact_ctx, &pa, &pb)?.distance;
    let base_seed = component_seed(args.seed, COMPONENT_FEATURE_MAP);

    let header: Vec<String> = ["rho", "mean_abs_err", "max_abs_err"]
        .map(String::from)
        .to_vec();
    let mut text_rows = Vec::new();
    let mut csv_rows = Vec::new();
    for &rho in &args.rhos {
        let cfg = LiftConfig::with_rho(rho)?;
        let mut sum = 0.0f64;
        let mut max = 0.0f64;
        for t in 0..args.replicates as u64 {
            let fm = build_feature_map(kernel, ds.dim(), &cfg, ds.n(), base_seed.wrapping_add(t))?;
            let ctx = LiftContext::approx(&ds, &w, &fm)?;
            let approx = lift_emd(&ctx, &pa, &pb)?.distance;
            let err = (approx - exact).abs();
            sum += err;
            max = max.max(err);
        }
        let mean = sum / args.replicates as f64;
        text_rows.push(vec![rho.to_string(), format!("{mean:.4}"), format!("{max:.4}")]);
        csv_rows.push(vec![rho.to_string(), format!("{mean}"), format!("{max}")]);
    }

    println!("exact reference distance: {exact:.6}");
    print_table(&header, &text_rows);
    if let Some(csv_path) = &args.csv {
        write_csv(csv_path, &header, &csv_rows)?;
    }

    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(args.csv.as_deref()));
    let manifest = RunManifest {
        tool: "liftcluster",
        version: env!("CARGO_PKG_VERSION"),
        command: "rho-sweep",
        parameters: serde_json::json!({
            "rhos": args.rhos,
            "replicates": args.replicates,
            "kernel": args.kernel.kernel,
            "bandwidth_flag": args.kernel.bandwidth,
            "bandwidth": bandwidth,
            "seed": args.seed,
            "component_seed_feature_map_base": base_seed,
            "exact_distance": exact,
        }),
        input_digests: digest_inputs(&[&args.data, &args.pa, &args.pb])?,
        outputs: args.csv.iter().map(|p| p.display().to_string()).collect(),
    };
    write_manifest(&manifest_path, &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// lift-cache
// ---------------------------------------------------------------------------

fn run_lift_cache(args: &LiftCacheArgs) -> CliResult<()> {
    let ds = load_dataset(&args.data)?;
    let bandwidth = resolve_bandwidth(&args.kernel, ds.points())?;
    let kernel = resolve_kernel(&args.kernel, bandwidth)?;
    let cfg = args.accuracy.lift_config()?;
    let fm_seed = component_seed(args.seed, COMPONENT_FEATURE_MAP);
    let fm = match kernel {
        Kernel::Gaussian { .. } => build_feature_map(kernel, ds.dim(), &cfg, ds.n(), fm_seed)?,
        Kernel::Discrete => {
            return Err(CliError::Usage(
                "the discrete kernel admits no feature map; lift-cache needs --kernel gaussian"
                    .to_string(),
            ))
        }
    };
    fm.save(&args.out)?;
    println!(
        "feature map: rho={}, dim={}, bandwidth={:.6}, saved to {}",
        fm.rho(),
        fm.dim(),
        bandwidth,
        args.out.display()
    );

    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| default_manifest_path(Some(&args.out)));
    let manifest = RunManifest {
        tool: "liftcluster",
        version: env!("CARGO_PKG_VERSION"),
        command: "lift-cache",
        parameters: serde_json::json!({
            "kernel": args.kernel.kernel,
            "bandwidth_flag": args.kernel.bandwidth,
            "bandwidth": bandwidth,
            "rho": fm.rho(),
            "epsilon": args.accuracy.epsilon,
            "delta": args.accuracy.delta,
            "seed": args.seed,
            "component_seed_feature_map": fm_seed,
        }),
        input_digests: digest_inputs(&[&args.data])?,
        outputs: vec![args.out.display().to_string()],
    };
    write_manifest(&manifest_path, &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.cmd {
        Cmd::Gen(a) => run_gen(a),
        Cmd::Distance(a) => run_distance(a),
        Cmd::Consensus(a) => run_consensus_cmd(a),
        Cmd::RhoSweep(a) => run_rho_sweep(a),
        Cmd::LiftCache(a) => run_lift_cache(a),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
