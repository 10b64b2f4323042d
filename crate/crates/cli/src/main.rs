//! Command-line front end for the alignment pipeline: align a graph pair,
//! generate perturbed benchmark copies, evaluate couplings, and sweep
//! perturbation levels into plot-ready CSV tables.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rayon::prelude::*;

use manifest::{file_digest, Manifest};
use slotalign::{
    derive_seed, hit_at_k, load_anchors, load_graph, make_target, perturb_edges, run,
    save_anchors, save_graph, write_matches, write_metrics, write_trace, AlignConfig,
    AlignmentResult, Direction, FeatureOp, InitMode, PerturbSpec,
};

const EXIT_CONFIG: i32 = 2;
const EXIT_INPUT: i32 = 3;
const EXIT_NOT_CONVERGED: i32 = 4;

const MATCH_DEPTH: usize = 30;
const HIT_KS: [usize; 4] = [1, 5, 10, 30];

type Failure = (i32, String);
type CmdResult = Result<i32, Failure>;

#[derive(Parser)]
#[command(name = "slotalign", version, about = "Unsupervised attributed-graph alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align two graphs and write matches, metrics, trace, and manifest.
    Align(AlignArgs),
    /// Relabel and perturb a graph into a semi-synthetic alignment target.
    Perturb(PerturbArgs),
    /// Score a dumped coupling against ground-truth anchors.
    Eval(EvalArgs),
    /// Sweep perturbation levels and tabulate Hit@k per level.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Uniform,
    Featsim,
}

impl InitArg {
    fn mode(self) -> InitMode {
        match self {
            InitArg::Uniform => InitMode::Uniform,
            InitArg::Featsim => InitMode::FeatureSimilarity,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeatureOpArg {
    None,
    Permute,
    Truncate,
    Compress,
}

impl FeatureOpArg {
    fn op(self, ratio: f64) -> FeatureOp {
        match self {
            FeatureOpArg::None => FeatureOp::None,
            FeatureOpArg::Permute => FeatureOp::Permute(ratio),
            FeatureOpArg::Truncate => FeatureOp::Truncate(ratio),
            FeatureOpArg::Compress => FeatureOp::Compress(ratio),
        }
    }

    fn name(self) -> &'static str {
        match self {
            FeatureOpArg::None => "none",
            FeatureOpArg::Permute => "permute",
            FeatureOpArg::Truncate => "truncate",
            FeatureOpArg::Compress => "compress",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    Edge,
    Permute,
    Truncate,
    Compress,
}

impl SweepArg {
    fn name(self) -> &'static str {
        match self {
            SweepArg::Edge => "edge",
            SweepArg::Permute => "permute",
            SweepArg::Truncate => "truncate",
            SweepArg::Compress => "compress",
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Number of structure bases per graph.
    #[arg(short = 'K', long)]
    num_bases: Option<usize>,
    /// Step size of the weight update.
    #[arg(long)]
    tau: Option<f64>,
    /// Step size of the coupling update.
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Outer iteration budget.
    #[arg(long, default_value_t = 500)]
    kmax: usize,
    /// Convergence threshold on the weight step.
    #[arg(long, default_value_t = 1e-6)]
    eps1: f64,
    /// Convergence threshold on the coupling step.
    #[arg(long, default_value_t = 1e-6)]
    eps2: f64,
    /// Initial coupling.
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Keep the uniform basis mixture fixed.
    #[arg(long)]
    freeze_weights: bool,
}

impl SolverArgs {
    fn config(&self, default_bases: usize, default_tau: f64) -> AlignConfig {
        AlignConfig {
            num_bases: self.num_bases.unwrap_or(default_bases),
            tau: self.tau.unwrap_or(default_tau),
            eta: self.eta,
            max_outer_iters: self.kmax,
            eps_alpha: self.eps1,
            eps_pi: self.eps2,
            init: self.init.unwrap_or(InitArg::Featsim).mode(),
            freeze_weights: self.freeze_weights,
            ..AlignConfig::real_world()
        }
    }
}

#[derive(Args)]
struct AlignArgs {
    /// Source edge list.
    #[arg(long, required_unless_present = "manifest")]
    source_edges: Option<PathBuf>,
    /// Target edge list.
    #[arg(long, required_unless_present = "manifest")]
    target_edges: Option<PathBuf>,
    /// Source feature table.
    #[arg(long)]
    source_feats: Option<PathBuf>,
    /// Target feature table.
    #[arg(long)]
    target_feats: Option<PathBuf>,
    /// Ground-truth anchors for Hit@k evaluation.
    #[arg(long)]
    anchors: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Also write the dense coupling matrix.
    #[arg(long)]
    dump_coupling: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Recorded in the manifest; alignment itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Re-run a previous align run from its manifest, verifying input digests.
    #[arg(long, conflicts_with_all = [
        "source_edges", "target_edges", "source_feats", "target_feats", "anchors",
        "dump_coupling", "out_dir", "seed", "num_bases", "tau", "eta", "kmax",
        "eps1", "eps2", "init", "freeze_weights",
    ])]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    /// Edge list of the graph to perturb.
    #[arg(long)]
    edges: PathBuf,
    /// Feature table of the graph to perturb.
    #[arg(long)]
    feats: Option<PathBuf>,
    /// Fraction of edges moved to previously unconnected positions.
    #[arg(long, default_value_t = 0.0)]
    edge_ratio: f64,
    /// Feature-space inconsistency applied after the edge moves.
    #[arg(long, value_enum, default_value_t = FeatureOpArg::None)]
    feature_op: FeatureOpArg,
    /// Ratio driving the feature operation.
    #[arg(long, default_value_t = 0.0)]
    feature_ratio: f64,
    /// Seed fixing the relabeling and every perturbation draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Dense coupling matrix CSV, one source row per line.
    #[arg(long)]
    coupling: PathBuf,
    /// Ground-truth anchors.
    #[arg(long)]
    anchors: PathBuf,
    /// Comma-separated k values.
    #[arg(long, default_value = "1,5,10,30")]
    ks: String,
    /// Also write the metrics to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Edge list of the source graph.
    #[arg(long)]
    edges: PathBuf,
    /// Feature table of the source graph.
    #[arg(long)]
    feats: Option<PathBuf>,
    /// Which inconsistency to sweep.
    #[arg(long, value_enum)]
    sweep: SweepArg,
    /// Comma-separated perturbation percentages.
    #[arg(long, default_value = "0,10,20,30,40,50,60,70")]
    levels: String,
    /// Edge perturbation percentage held fixed during feature sweeps.
    #[arg(long, default_value_t = 25.0)]
    fixed_edge_ratio: f64,
    /// Concurrent level runs; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed fixing the relabeling and every perturbation draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Align(args) => cmd_align(&args),
        Command::Perturb(args) => cmd_perturb(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(code);
        }
    }
}

fn code_for(e: &slotalign::Error) -> i32 {
    use slotalign::Error;
    match e {
        Error::InvalidConfig(_) => EXIT_CONFIG,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::IndexOutOfRange { .. }
        | Error::DimensionMismatch(_)
        | Error::EmptyAnchors => EXIT_INPUT,
        Error::SinkhornDidNotConverge { .. } => EXIT_NOT_CONVERGED,
    }
}

fn core(e: slotalign::Error) -> Failure {
    (code_for(&e), e.to_string())
}

fn input_io(path: &Path, e: std::io::Error) -> Failure {
    (EXIT_INPUT, format!("{}: {e}", path.display()))
}

struct ResolvedAlign {
    source_edges: PathBuf,
    source_feats: Option<PathBuf>,
    target_edges: PathBuf,
    target_feats: Option<PathBuf>,
    anchors: Option<PathBuf>,
    cfg: AlignConfig,
    dump_coupling: bool,
    out_dir: PathBuf,
    seed: u64,
}

fn mode_name(cfg: &AlignConfig) -> &'static str {
    if cfg.num_bases == 1 && cfg.freeze_weights {
        "gwd"
    } else {
        "slotalign"
    }
}

fn init_name(init: InitMode) -> &'static str {
    match init {
        InitMode::Uniform => "uniform",
        InitMode::FeatureSimilarity => "featsim",
    }
}

fn need<'a>(m: &'a Manifest, key: &str, path: &Path) -> Result<&'a str, Failure> {
    m.get(key)
        .ok_or_else(|| (EXIT_INPUT, format!("{}: manifest is missing {key}", path.display())))
}

fn parse_key<T: std::str::FromStr>(m: &Manifest, key: &str, path: &Path) -> Result<T, Failure> {
    let raw = need(m, key, path)?;
    raw.parse().map_err(|_| {
        (
            EXIT_INPUT,
            format!("{}: cannot parse {key} value {raw:?}", path.display()),
        )
    })
}

fn optional_path(m: &Manifest, key: &str, path: &Path) -> Result<Option<PathBuf>, Failure> {
    let raw = need(m, key, path)?;
    Ok((raw != "-").then(|| PathBuf::from(raw)))
}

fn resolve_from_manifest(path: &Path) -> Result<ResolvedAlign, Failure> {
    let m = Manifest::read(path).map_err(|e| input_io(path, e))?;
    let command = need(&m, "command", path)?;
    if command != "align" {
        return Err((
            EXIT_INPUT,
            format!("{}: manifest records a {command} run, not align", path.display()),
        ));
    }
    let init = match need(&m, "init", path)? {
        "uniform" => InitMode::Uniform,
        "featsim" => InitMode::FeatureSimilarity,
        other => {
            return Err((
                EXIT_INPUT,
                format!("{}: unknown init {other:?}", path.display()),
            ))
        }
    };
    let cfg = AlignConfig {
        num_bases: parse_key(&m, "num_bases", path)?,
        tau: parse_key(&m, "tau", path)?,
        eta: parse_key(&m, "eta", path)?,
        max_outer_iters: parse_key(&m, "max_outer_iters", path)?,
        eps_alpha: parse_key(&m, "eps_alpha", path)?,
        eps_pi: parse_key(&m, "eps_pi", path)?,
        init,
        freeze_weights: parse_key(&m, "freeze_weights", path)?,
        normalize_features: parse_key(&m, "normalize_features", path)?,
        dense_threshold: parse_key(&m, "dense_threshold", path)?,
        sinkhorn: slotalign::SinkhornSettings {
            max_iters: parse_key(&m, "sinkhorn_max_iters", path)?,
            tolerance: parse_key(&m, "sinkhorn_tolerance", path)?,
            log_domain: parse_key(&m, "sinkhorn_log_domain", path)?,
            floor: parse_key(&m, "sinkhorn_floor", path)?,
        },
    };
    let resolved = ResolvedAlign {
        source_edges: PathBuf::from(need(&m, "source_edges", path)?),
        source_feats: optional_path(&m, "source_feats", path)?,
        target_edges: PathBuf::from(need(&m, "target_edges", path)?),
        target_feats: optional_path(&m, "target_feats", path)?,
        anchors: optional_path(&m, "anchors", path)?,
        cfg,
        dump_coupling: parse_key(&m, "dump_coupling", path)?,
        out_dir: PathBuf::from(need(&m, "out_dir", path)?),
        seed: parse_key(&m, "seed", path)?,
    };
    for (key, recorded) in m.entries() {
        let Some(name) = key.strip_prefix("digest.") else {
            continue;
        };
        let file = PathBuf::from(need(&m, name, path)?);
        let found = file_digest(&file).map_err(|e| input_io(&file, e))?;
        if &found != recorded {
            return Err((
                EXIT_INPUT,
                format!(
                    "{}: digest mismatch, expected {recorded} but found {found}",
                    file.display()
                ),
            ));
        }
    }
    Ok(resolved)
}

fn cmd_align(args: &AlignArgs) -> CmdResult {
    let resolved = match &args.manifest {
        Some(path) => resolve_from_manifest(path)?,
        None => ResolvedAlign {
            source_edges: args.source_edges.clone().expect("required by clap"),
            source_feats: args.source_feats.clone(),
            target_edges: args.target_edges.clone().expect("required by clap"),
            target_feats: args.target_feats.clone(),
            anchors: args.anchors.clone(),
            cfg: args.solver.config(4, 1.0),
            dump_coupling: args.dump_coupling,
            out_dir: args.out_dir.clone(),
            seed: args.seed,
        },
    };

    let mut digests: Vec<(String, String)> = Vec::new();
    let mut digest = |name: &str, path: Option<&Path>| -> Result<(), Failure> {
        if let Some(path) = path {
            let hex = file_digest(path).map_err(|e| input_io(path, e))?;
            digests.push((format!("digest.{name}"), hex));
        }
        Ok(())
    };
    digest("source_edges", Some(&resolved.source_edges))?;
    digest("source_feats", resolved.source_feats.as_deref())?;
    digest("target_edges", Some(&resolved.target_edges))?;
    digest("target_feats", resolved.target_feats.as_deref())?;
    digest("anchors", resolved.anchors.as_deref())?;

    let g_s = load_graph(&resolved.source_edges, resolved.source_feats.as_deref())
        .map_err(core)?;
    let g_t = load_graph(&resolved.target_edges, resolved.target_feats.as_deref())
        .map_err(core)?;
    let anchors = resolved
        .anchors
        .as_deref()
        .map(|path| load_anchors(path, g_s.n(), g_t.n()))
        .transpose()
        .map_err(core)?;

    let started = Instant::now();
    let state = run(&g_s, &g_t, &resolved.cfg).map_err(core)?;
    let wall = started.elapsed();

    fs::create_dir_all(&resolved.out_dir).map_err(|e| input_io(&resolved.out_dir, e))?;
    write_trace(&resolved.out_dir.join("trace.csv"), state.trace()).map_err(core)?;

    let mut result = AlignmentResult::from_scores(
        state.coupling().plan().to_owned(),
        Direction::TargetToSource,
        MATCH_DEPTH.min(g_s.n()),
        wall,
    )
    .map_err(core)?;
    write_matches(&resolved.out_dir.join("matches.csv"), &result).map_err(core)?;
    if let Some(anchors) = &anchors {
        result.score_against(anchors, &HIT_KS).map_err(core)?;
        write_metrics(&resolved.out_dir.join("metrics.txt"), &result.hits).map_err(core)?;
    }
    if resolved.dump_coupling {
        let path = resolved.out_dir.join("coupling.csv");
        write_matrix(&path, &state.coupling().plan().to_owned())?;
    }

    let mut m = Manifest::new();
    m.push("command", "align");
    m.push("tool", "slotalign");
    m.push("version", env!("CARGO_PKG_VERSION"));
    m.push("mode", mode_name(&resolved.cfg));
    m.push("source_edges", resolved.source_edges.display());
    m.push_path("source_feats", resolved.source_feats.as_deref());
    m.push("target_edges", resolved.target_edges.display());
    m.push_path("target_feats", resolved.target_feats.as_deref());
    m.push_path("anchors", resolved.anchors.as_deref());
    m.push("out_dir", resolved.out_dir.display());
    m.push("seed", resolved.seed);
    push_config(&mut m, &resolved.cfg);
    m.push("dump_coupling", resolved.dump_coupling);
    for (key, hex) in &digests {
        m.push(key, hex);
    }
    m.push("converged", state.converged());
    m.push("iterations", state.iteration());
    m.push(
        "objective",
        state.trace().last().map(|p| p.objective).unwrap_or(f64::NAN),
    );
    for (k, value) in &result.hits {
        m.push(&format!("hit{k}"), format!("{value:.2}"));
    }
    m.push("wall_time_ms", wall.as_millis());
    let manifest_path = resolved.out_dir.join("manifest.txt");
    m.write(&manifest_path)
        .map_err(|e| input_io(&manifest_path, e))?;

    if state.converged() {
        Ok(0)
    } else {
        eprintln!(
            "warning: stopped at the {} iteration budget before reaching the convergence \
             thresholds; results were written",
            resolved.cfg.max_outer_iters
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn push_config(m: &mut Manifest, cfg: &AlignConfig) {
    m.push("num_bases", cfg.num_bases);
    m.push("tau", cfg.tau);
    m.push("eta", cfg.eta);
    m.push("max_outer_iters", cfg.max_outer_iters);
    m.push("eps_alpha", cfg.eps_alpha);
    m.push("eps_pi", cfg.eps_pi);
    m.push("init", init_name(cfg.init));
    m.push("freeze_weights", cfg.freeze_weights);
    m.push("normalize_features", cfg.normalize_features);
    m.push("dense_threshold", cfg.dense_threshold);
    m.push("sinkhorn_max_iters", cfg.sinkhorn.max_iters);
    m.push("sinkhorn_tolerance", cfg.sinkhorn.tolerance);
    m.push("sinkhorn_log_domain", cfg.sinkhorn.log_domain);
    m.push("sinkhorn_floor", cfg.sinkhorn.floor);
}

fn write_matrix(path: &Path, matrix: &Array2<f64>) -> Result<(), Failure> {
    let mut out = String::new();
    for row in matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| input_io(path, e))
}

fn read_matrix(path: &Path) -> Result<Array2<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| input_io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse()).collect();
        let row = row.map_err(|_| {
            (
                EXIT_INPUT,
                format!("{}:{}: malformed matrix row", path.display(), lineno + 1),
            )
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err((
                    EXIT_INPUT,
                    format!("{}:{}: ragged matrix row", path.display(), lineno + 1),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err((EXIT_INPUT, format!("{}: empty matrix", path.display())));
    }
    let (n, m) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_fn((n, m), |(i, j)| rows[i][j]))
}

fn cmd_perturb(args: &PerturbArgs) -> CmdResult {
    let g = load_graph(&args.edges, args.feats.as_deref()).map_err(core)?;
    let spec = PerturbSpec {
        seed: args.seed,
        edge_ratio: args.edge_ratio,
        feature_op: args.feature_op.op(args.feature_ratio),
    };
    let started = Instant::now();
    let (target, anchors) = slotalign::apply(&g, &spec).map_err(core)?;
    let wall = started.elapsed();

    fs::create_dir_all(&args.out_dir).map_err(|e| input_io(&args.out_dir, e))?;
    let edges_out = args.out_dir.join("target.edges");
    let feats_out = (target.feature_dim() > 0).then(|| args.out_dir.join("target.feats"));
    save_graph(&target, &edges_out, feats_out.as_deref()).map_err(core)?;
    save_anchors(&anchors, &args.out_dir.join("anchors.txt")).map_err(core)?;

    let mut m = Manifest::new();
    m.push("command", "perturb");
    m.push("tool", "slotalign");
    m.push("version", env!("CARGO_PKG_VERSION"));
    m.push("edges", args.edges.display());
    m.push_path("feats", args.feats.as_deref());
    m.push("out_dir", args.out_dir.display());
    m.push("seed", args.seed);
    m.push("edge_ratio", args.edge_ratio);
    m.push("feature_op", args.feature_op.name());
    m.push("feature_ratio", args.feature_ratio);
    m.push(
        "digest.edges",
        file_digest(&args.edges).map_err(|e| input_io(&args.edges, e))?,
    );
    if let Some(feats) = &args.feats {
        m.push(
            "digest.feats",
            file_digest(feats).map_err(|e| input_io(feats, e))?,
        );
    }
    m.push("nodes", target.n());
    m.push("edges_out", target.num_edges());
    m.push("feature_dim", target.feature_dim());
    m.push("wall_time_ms", wall.as_millis());
    let manifest_path = args.out_dir.join("manifest.txt");
    m.write(&manifest_path)
        .map_err(|e| input_io(&manifest_path, e))?;
    Ok(0)
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    let ks = parse_ks(&args.ks)?;
    let scores = read_matrix(&args.coupling)?;
    let anchors = load_anchors(&args.anchors, scores.nrows(), scores.ncols()).map_err(core)?;
    let hits = hit_at_k(&scores.view(), &anchors, &ks).map_err(core)?;
    for (k, value) in &hits {
        println!("Hit@{k}: {value:.2}");
    }
    if let Some(out) = &args.out {
        write_metrics(out, &hits).map_err(core)?;
    }
    Ok(0)
}

fn parse_ks(raw: &str) -> Result<Vec<usize>, Failure> {
    let ks: Result<Vec<usize>, _> = raw.split(',').map(|t| t.trim().parse()).collect();
    let ks = ks.map_err(|_| (EXIT_CONFIG, format!("cannot parse k list {raw:?}")))?;
    if ks.is_empty() {
        return Err((EXIT_CONFIG, "the k list is empty".to_string()));
    }
    Ok(ks)
}

fn parse_levels(raw: &str) -> Result<Vec<f64>, Failure> {
    let levels: Result<Vec<f64>, _> = raw.split(',').map(|t| t.trim().parse()).collect();
    let levels = levels.map_err(|_| (EXIT_CONFIG, format!("cannot parse levels {raw:?}")))?;
    if levels.is_empty() {
        return Err((EXIT_CONFIG, "the level list is empty".to_string()));
    }
    for level in &levels {
        if !level.is_finite() || *level < 0.0 || *level > 100.0 {
            return Err((
                EXIT_CONFIG,
                format!("level {level} is outside the 0..=100 percent range"),
            ));
        }
    }
    Ok(levels)
}

struct LevelRow {
    level: f64,
    hits: BTreeMap<usize, f64>,
    seconds: f64,
    converged: bool,
}

fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let levels = parse_levels(&args.levels)?;
    if !args.fixed_edge_ratio.is_finite()
        || args.fixed_edge_ratio < 0.0
        || args.fixed_edge_ratio > 100.0
    {
        return Err((
            EXIT_CONFIG,
            format!(
                "fixed edge ratio {} is outside the 0..=100 percent range",
                args.fixed_edge_ratio
            ),
        ));
    }
    let cfg = args.solver.config(2, 0.1);
    let g = load_graph(&args.edges, args.feats.as_deref()).map_err(core)?;
    let (clean, anchors) = make_target(&g, derive_seed(args.seed, 0));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| (EXIT_CONFIG, format!("cannot build the worker pool: {e}")))?;
    let started = Instant::now();
    let rows: Vec<Result<LevelRow, Failure>> = pool.install(|| {
        levels
            .par_iter()
            .enumerate()
            .map(|(idx, level)| {
                let ratio = level / 100.0;
                let target = match args.sweep {
                    SweepArg::Edge => {
                        perturb_edges(&clean, ratio, derive_seed(args.seed, 2 + idx as u64))
                            .map_err(core)?
                    }
                    feature_sweep => {
                        let base = perturb_edges(
                            &clean,
                            args.fixed_edge_ratio / 100.0,
                            derive_seed(args.seed, 1),
                        )
                        .map_err(core)?;
                        let sub = derive_seed(args.seed, 1000 + idx as u64);
                        match feature_sweep {
                            SweepArg::Permute => {
                                slotalign::permute_features(&base, ratio, sub).map_err(core)?
                            }
                            SweepArg::Truncate => {
                                slotalign::truncate_features(&base, ratio, sub).map_err(core)?
                            }
                            SweepArg::Compress => {
                                slotalign::compress_features(&base, ratio).map_err(core)?
                            }
                            SweepArg::Edge => unreachable!("handled above"),
                        }
                    }
                };
                let run_started = Instant::now();
                let state = run(&g, &target, &cfg).map_err(core)?;
                let seconds = run_started.elapsed().as_secs_f64();
                let hits =
                    hit_at_k(&state.coupling().plan(), &anchors, &HIT_KS).map_err(core)?;
                Ok(LevelRow {
                    level: *level,
                    hits,
                    seconds,
                    converged: state.converged(),
                })
            })
            .collect()
    });
    let wall = started.elapsed();

    let mut table = String::from("level,hit1,hit5,hit10,hit30,seconds\n");
    let mut all_converged = true;
    for row in rows {
        let row = row?;
        all_converged &= row.converged;
        let line = format!(
            "{},{:.2},{:.2},{:.2},{:.2},{:.3}",
            row.level, row.hits[&1], row.hits[&5], row.hits[&10], row.hits[&30], row.seconds
        );
        table.push_str(&line);
        table.push('\n');
    }
    print!("{table}");

    fs::create_dir_all(&args.out_dir).map_err(|e| input_io(&args.out_dir, e))?;
    let results_path = args.out_dir.join("results.csv");
    fs::write(&results_path, &table).map_err(|e| input_io(&results_path, e))?;

    let mut m = Manifest::new();
    m.push("command", "bench");
    m.push("tool", "slotalign");
    m.push("version", env!("CARGO_PKG_VERSION"));
    m.push("mode", mode_name(&cfg));
    m.push("edges", args.edges.display());
    m.push_path("feats", args.feats.as_deref());
    m.push("out_dir", args.out_dir.display());
    m.push("seed", args.seed);
    m.push("sweep", args.sweep.name());
    m.push(
        "levels",
        levels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    m.push("fixed_edge_ratio", args.fixed_edge_ratio);
    push_config(&mut m, &cfg);
    m.push(
        "digest.edges",
        file_digest(&args.edges).map_err(|e| input_io(&args.edges, e))?,
    );
    if let Some(feats) = &args.feats {
        m.push(
            "digest.feats",
            file_digest(feats).map_err(|e| input_io(feats, e))?,
        );
    }
    m.push("converged", all_converged);
    m.push("wall_time_ms", wall.as_millis());
    let manifest_path = args.out_dir.join("manifest.txt");
    m.write(&manifest_path)
        .map_err(|e| input_io(&manifest_path, e))?;

    if all_converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: at least one level stopped at the {} iteration budget; results were written",
            cfg.max_outer_iters
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}
