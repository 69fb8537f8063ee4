//! Command-line harness for the clustering library: build trees over
//! vector files, evaluate them, run the approximation ablation ladder,
//! sweep adversarial arrival orders, and trace per-insert purity.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use grinch::{
    build, dendrogram_purity_exact, dendrogram_purity_sampled, flatten_by_threshold,
    gen_synthetic, order_points, pairwise_prf, Algorithm, ArrivalOrder, ClusterTree, DataPoint,
    GroundTruth, IncrementalBuilder, Linkage, NnMode, OrderScheme, RunConfig, RunMetrics,
    SyntheticSpec, VectorFormat,
};

/// Leaf count above which purity is estimated by sampling.
const SAMPLED_DP_THRESHOLD: usize = 5000;
const SAMPLED_DP_PAIRS: usize = 100_000;

#[derive(Parser)]
#[command(name = "grinch", version, about = "Incremental hierarchical clustering harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a cluster tree over a vector file and evaluate it.
    Cluster(ClusterArgs),
    /// Generate a windowed-binary synthetic dataset.
    Synth(SynthArgs),
    /// Run the cumulative approximation ladder and report purity, wall
    /// time, and rearrangement counters per rung.
    Ablate(AblateArgs),
    /// Compare an algorithm under round-robin and sorted arrival orders.
    Robust(RobustArgs),
    /// Trace per-insert purity before and after the graft phase.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Tsv,
    Grvc,
}

impl From<FormatArg> for VectorFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tsv => VectorFormat::Tsv,
            FormatArg::Grvc => VectorFormat::Grvc,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Grinch,
    Online,
    Rotate,
    Hac,
    Mbhac,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LinkageArg {
    Avg,
    Cosine,
}

impl From<LinkageArg> for Linkage {
    fn from(l: LinkageArg) -> Self {
        match l {
            LinkageArg::Avg => Linkage::Average,
            LinkageArg::Cosine => Linkage::Cosine,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderArg {
    Given,
    Random,
    Roundrobin,
    Sorted,
}

impl From<OrderArg> for OrderScheme {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Given => OrderScheme::AsGiven,
            OrderArg::Random => OrderScheme::Random,
            OrderArg::Roundrobin => OrderScheme::RoundRobin,
            OrderArg::Sorted => OrderScheme::Sorted,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NnArg {
    Exact,
    Nsw,
}

/// Flags shared by every command that ingests a vector file.
#[derive(Args)]
struct InputArgs {
    /// Vector file to cluster.
    #[arg(long)]
    input: PathBuf,
    /// File format of --input.
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
    /// Linkage function.
    #[arg(long, value_enum, default_value = "cosine")]
    linkage: LinkageArg,
    /// Arrival order applied before building.
    #[arg(long, value_enum, default_value = "given")]
    order: OrderArg,
    /// Seed for arrival shuffling and all run-internal randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl InputArgs {
    fn load(&self) -> Result<(Vec<DataPoint>, Option<GroundTruth>)> {
        let (points, gt) = grinch::load_vectors(&self.input, self.format.into())
            .with_context(|| format!("reading {}", self.input.display()))?;
        let ordered = order_points(
            &points,
            gt.as_ref(),
            ArrivalOrder {
                scheme: self.order.into(),
                seed: self.seed,
            },
        )?;
        Ok((ordered, gt))
    }
}

#[derive(Args)]
struct ApproxArgs {
    /// Height cap for rotations.
    #[arg(long, default_value_t = 100)]
    rotate_cap: u32,
    /// Height cap for graft attempts.
    #[arg(long, default_value_t = 100)]
    graft_cap: u32,
    /// Height cap for restructure walks.
    #[arg(long, default_value_t = 100)]
    restruct_cap: u32,
    /// Stop the graft ladder after the first mutual rejection.
    #[arg(long, default_value_t = true)]
    single_elim: bool,
    /// One k-candidate search per insert, reused by every graft.
    #[arg(long)]
    knn: Option<usize>,
    /// Nearest-neighbor backend.
    #[arg(long, value_enum, default_value = "exact")]
    nn: NnArg,
}

impl ApproxArgs {
    fn config(&self, seed: u64) -> RunConfig {
        RunConfig {
            rotate_cap: Some(self.rotate_cap),
            graft_cap: Some(self.graft_cap),
            restruct_cap: Some(self.restruct_cap),
            single_elimination: self.single_elim,
            knn_budget: self.knn,
            nn_mode: match self.nn {
                NnArg::Exact => NnMode::Exact,
                NnArg::Nsw => NnMode::Nsw,
            },
            seed,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Tree construction algorithm.
    #[arg(long, value_enum, default_value = "grinch")]
    algo: AlgoArg,
    /// Buffer size for mbhac.
    #[arg(long)]
    buffer: Option<usize>,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Threshold for flat-cluster extraction; enables precision/recall/F1.
    #[arg(long)]
    tau: Option<f64>,
    /// Write the tree as JSON.
    #[arg(long)]
    out_tree: Option<PathBuf>,
    /// Write the tree in Newick form.
    #[arg(long)]
    out_newick: Option<PathBuf>,
    /// Write evaluation metrics as JSON.
    #[arg(long)]
    out_metrics: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    clusters: usize,
    #[arg(long, default_value_t = 25)]
    per_cluster: usize,
    #[arg(long, default_value_t = 100)]
    window: usize,
    #[arg(long, default_value_t = 0.1)]
    prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "grvc")]
    format: FormatArg,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Candidate budget used at the single-search rung.
    #[arg(long, default_value_t = 25)]
    knn: usize,
    /// Write one JSON record per rung.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobustArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "grinch")]
    algo: AlgoArg,
    #[arg(long)]
    buffer: Option<usize>,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Number of seeds to sweep.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Write one JSON record per (seed, order) run.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    approx: ApproxArgs,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Use sampled purity above this leaf count.
    #[arg(long, default_value_t = 2000)]
    sample_threshold: usize,
    /// Sample size for the per-insert purity estimate.
    #[arg(long, default_value_t = 2000)]
    sample_pairs: usize,
}

#[derive(Serialize)]
struct MetricsReport {
    algorithm: String,
    linkage: String,
    num_points: usize,
    seed: u64,
    dp: Option<f64>,
    dp_mode: Option<String>,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
    rotations: u64,
    grafts_attempted: u64,
    grafts_accepted: u64,
    restructs: u64,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Cluster(args) => cmd_cluster(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Robust(args) => cmd_robust(args),
        Command::Trace(args) => cmd_trace(args),
    }
}

fn algorithm_of(algo: AlgoArg, buffer: Option<usize>) -> Result<Algorithm> {
    Ok(match algo {
        AlgoArg::Grinch => Algorithm::Grinch,
        AlgoArg::Online => Algorithm::Online,
        AlgoArg::Rotate => Algorithm::Rotate,
        AlgoArg::Hac => Algorithm::Hac,
        AlgoArg::Mbhac => Algorithm::MbHac {
            buffer: buffer.context("--algo mbhac requires --buffer")?,
        },
    })
}

fn evaluate_dp(tree: &ClusterTree, gt: &GroundTruth, seed: u64) -> Result<(f64, &'static str)> {
    if tree.num_leaves() > SAMPLED_DP_THRESHOLD {
        Ok((
            dendrogram_purity_sampled(tree, gt, SAMPLED_DP_PAIRS, seed)?,
            "sampled",
        ))
    } else {
        Ok((dendrogram_purity_exact(tree, gt)?, "exact"))
    }
}

fn write_and_check_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    let reread = fs::read_to_string(path)?;
    serde_json::from_str::<serde_json::Value>(&reread)
        .with_context(|| format!("verifying {}", path.display()))?;
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let (points, gt) = args.input.load()?;
    let linkage: Linkage = args.input.linkage.into();
    let algorithm = algorithm_of(args.algo, args.buffer)?;
    let cfg = args.approx.config(args.input.seed);
    let (tree, metrics) = build(&points, algorithm, &linkage, &cfg)?;

    let (dp, dp_mode) = match &gt {
        Some(gt) => {
            let (dp, mode) = evaluate_dp(&tree, gt, args.input.seed)?;
            (Some(dp), Some(mode.to_string()))
        }
        None => (None, None),
    };
    let prf = match (&gt, args.tau) {
        (Some(gt), Some(tau)) => {
            let flat = flatten_by_threshold(&tree, &linkage, tau);
            Some(pairwise_prf(&flat, gt))
        }
        _ => None,
    };
    let report = MetricsReport {
        algorithm: format!("{algorithm:?}").to_lowercase(),
        linkage: format!("{:?}", linkage).to_lowercase(),
        num_points: points.len(),
        seed: args.input.seed,
        dp,
        dp_mode,
        precision: prf.map(|s| s.precision),
        recall: prf.map(|s| s.recall),
        f1: prf.map(|s| s.f1),
        rotations: metrics.rotations,
        grafts_attempted: metrics.grafts_attempted,
        grafts_accepted: metrics.grafts_accepted,
        restructs: metrics.restructs,
    };

    if let Some(path) = &args.out_tree {
        write_and_check_json(path, &tree.to_json())?;
    }
    if let Some(path) = &args.out_newick {
        fs::write(path, tree.to_newick()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.out_metrics {
        write_and_check_json(path, &serde_json::to_value(&report)?)?;
    }

    println!(
        "{} points, {} leaves | dp = {} | wall {:.2}s | rotations {} grafts {}/{} restructs {}",
        points.len(),
        tree.num_leaves(),
        report
            .dp
            .map(|d| format!("{d:.4} ({})", report.dp_mode.as_deref().unwrap_or("")))
            .unwrap_or_else(|| "n/a (no labels)".to_string()),
        metrics.wall_time,
        metrics.rotations,
        metrics.grafts_accepted,
        metrics.grafts_attempted,
        metrics.restructs,
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        clusters: args.clusters,
        per_cluster: args.per_cluster,
        window: args.window,
        bit_probability: args.prob,
        seed: args.seed,
    };
    let (points, _) = gen_synthetic(&spec);
    grinch::save_vectors(&args.out, args.format.into(), &points)?;
    println!(
        "wrote {} points of dimension {} to {}",
        points.len(),
        spec.dim(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct AblateRecord {
    rung: String,
    dp: f64,
    wall_time: f64,
    rotations: u64,
    grafts_attempted: u64,
    grafts_accepted: u64,
    restructs: u64,
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let (points, gt) = args.input.load()?;
    let gt = gt.context("the ablation ladder needs ground-truth labels")?;
    let linkage: Linkage = args.input.linkage.into();
    let seed = args.input.seed;
    let base = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let capped = RunConfig {
        rotate_cap: Some(100),
        graft_cap: Some(100),
        restruct_cap: Some(100),
        ..base.clone()
    };
    let rungs: Vec<(&str, RunConfig)> = vec![
        ("none", base),
        ("cap100", capped.clone()),
        (
            "single-elim",
            RunConfig {
                single_elimination: true,
                ..capped.clone()
            },
        ),
        (
            "single-nn",
            RunConfig {
                single_elimination: true,
                knn_budget: Some(args.knn),
                ..capped.clone()
            },
        ),
        (
            "no-restruct",
            RunConfig {
                single_elimination: true,
                knn_budget: Some(args.knn),
                enable_restructs: false,
                ..capped.clone()
            },
        ),
        (
            "no-graft",
            RunConfig {
                single_elimination: true,
                knn_budget: Some(args.knn),
                enable_restructs: false,
                enable_grafts: false,
                ..capped.clone()
            },
        ),
        (
            "no-rotate",
            RunConfig {
                single_elimination: true,
                knn_budget: Some(args.knn),
                enable_restructs: false,
                enable_grafts: false,
                enable_rotations: false,
                ..capped
            },
        ),
    ];
    let mut records = Vec::new();
    println!(
        "{:<12} {:>8} {:>9} {:>9} {:>9} {:>9}",
        "rung", "dp", "time(s)", "rotate", "graft", "restruct"
    );
    for (name, cfg) in rungs {
        let (tree, metrics) = build(&points, Algorithm::Grinch, &linkage, &cfg)?;
        let (dp, _) = evaluate_dp(&tree, &gt, seed)?;
        println!(
            "{name:<12} {dp:>8.4} {:>9.2} {:>9} {:>9} {:>9}",
            metrics.wall_time, metrics.rotations, metrics.grafts_accepted, metrics.restructs
        );
        records.push(AblateRecord {
            rung: name.to_string(),
            dp,
            wall_time: metrics.wall_time,
            rotations: metrics.rotations,
            grafts_attempted: metrics.grafts_attempted,
            grafts_accepted: metrics.grafts_accepted,
            restructs: metrics.restructs,
        });
    }
    if let Some(path) = &args.out {
        write_jsonl(path, &records)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RobustRecord {
    algorithm: String,
    order: String,
    seed: u64,
    dp: f64,
}

fn cmd_robust(args: RobustArgs) -> Result<()> {
    let (points, gt) = grinch::load_vectors(&args.input.input, args.input.format.into())?;
    let gt = gt.context("the robustness sweep needs ground-truth labels")?;
    let linkage: Linkage = args.input.linkage.into();
    let algorithm = algorithm_of(args.algo, args.buffer)?;
    let mut records = Vec::new();
    println!("{:<6} {:>12} {:>10}", "seed", "round-robin", "sorted");
    for seed in 1..=args.seeds {
        let mut row = Vec::new();
        for scheme in [OrderScheme::RoundRobin, OrderScheme::Sorted] {
            let arrived = order_points(&points, Some(&gt), ArrivalOrder { scheme, seed })?;
            let cfg = args.approx.config(seed);
            let (tree, _) = build(&arrived, algorithm, &linkage, &cfg)?;
            let (dp, _) = evaluate_dp(&tree, &gt, seed)?;
            records.push(RobustRecord {
                algorithm: format!("{algorithm:?}").to_lowercase(),
                order: format!("{scheme:?}").to_lowercase(),
                seed,
                dp,
            });
            row.push(dp);
        }
        println!("{seed:<6} {:>12.4} {:>10.4}", row[0], row[1]);
    }
    if let Some(path) = &args.out {
        write_jsonl(path, &records)?;
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    let (points, gt) = args.input.load()?;
    let gt = gt.context("purity tracing needs ground-truth labels")?;
    let linkage: Linkage = args.input.linkage.into();
    let cfg = args.approx.config(args.input.seed);
    if points.is_empty() {
        bail!("input contains no points");
    }
    let mut prepared = points;
    if linkage.normalizes_inputs() {
        grinch::normalize_unit(&mut prepared);
    }
    let dim = prepared[0].vector.len();
    let mut builder = IncrementalBuilder::new(dim, &linkage, cfg);
    builder.enable_purity_trace(gt, args.sample_threshold, args.sample_pairs);
    for p in &prepared {
        builder.insert(p)?;
    }
    let (_, metrics): (ClusterTree, RunMetrics) = builder.finish();
    let trace = metrics.purity_trace.expect("tracing was enabled");
    let mut out = fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    writeln!(out, "insert_index,dp_before_grafts,dp_after_grafts,cumulative_delta")?;
    let mut cumulative = 0.0;
    for sample in &trace {
        cumulative += sample.dp_after_grafts - sample.dp_before_grafts;
        writeln!(
            out,
            "{},{},{},{}",
            sample.insert_index, sample.dp_before_grafts, sample.dp_after_grafts, cumulative
        )?;
    }
    println!(
        "traced {} inserts; cumulative graft purity delta {:.6}",
        trace.len(),
        cumulative
    );
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for record in records {
        writeln!(out, "{}", serde_json::to_string(record)?)?;
    }
    Ok(())
}
