//! Command-line front end.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use obtree_core::experiment::{
    run_fast_rate_experiment, run_impurity_experiment, run_pruning_experiment, run_rate_experiment, ExperimentConfig,
    ExperimentKind,
};
use obtree_core::prune::{penalized_objective, smallest_minimizer};
use obtree_core::ridge::{generate_dataset, DomainBox};
use obtree_core::stumps::{verify_impurity_identity, verify_orthonormality, ImpurityIdentityCheck};
use obtree_core::{
    build_expansion, estimate_suboptimality, grow, predict, training_error, weakest_link_sequence, Dataset, Expansion, IndexSet,
    PruneSequence, RidgeModel, SearchStrategy, StrategyKind, Tree,
};
use serde::{Deserialize, Serialize};

use crate::csv_io::{load_csv, write_csv};
use crate::report::{write_json_line, write_report, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "obtree", version, about = "Greedy oblique regression trees and their verification harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow a tree from a CSV file and print it as JSON.
    Train(TrainArgs),
    /// Weakest-link sequence and penalized subtree selection for a tree.
    Prune(PruneArgs),
    /// Orthonormal stump expansion of a tree with identity checks.
    Stumps(StumpsArgs),
    /// Sub-optimality probability of a strategy at the root node.
    Subopt(SuboptArgs),
    /// Run an experiment described by a JSON config.
    Experiment(ExperimentArgs),
    /// Sample a dataset from a ridge model spec.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum StrategyName {
    AxisAligned,
    HillClimb,
    RandomProjection,
    ExhaustiveOblique,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column, by header name or zero-based index.
    #[arg(long, default_value = "y")]
    pub response: String,
}

#[derive(Debug, Args)]
pub struct StrategyArgs {
    #[arg(long, value_enum, default_value = "axis_aligned")]
    pub strategy: StrategyName,
    /// Maximum nonzero direction coefficients; defaults to 1 for axis-aligned search and p otherwise.
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hill-climb starts.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    /// Hill-climb coordinate sweeps per start.
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Random-projection candidate count.
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
}

impl StrategyArgs {
    pub fn build(&self, p: usize) -> SearchStrategy {
        let d = self.sparsity.unwrap_or(match self.strategy {
            StrategyName::AxisAligned => 1,
            _ => p,
        });
        match self.strategy {
            StrategyName::AxisAligned => SearchStrategy { sparsity: d, ..SearchStrategy::axis_aligned() },
            StrategyName::HillClimb => SearchStrategy::hill_climb(d, self.restarts, self.iterations, self.seed),
            StrategyName::RandomProjection => SearchStrategy::random_projection(d, self.candidates, self.seed),
            StrategyName::ExhaustiveOblique => SearchStrategy::exhaustive(d),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_node_size: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Tree JSON produced by `train`.
    #[arg(long)]
    pub tree: PathBuf,
    /// Single penalty value.
    #[arg(long, conflicts_with = "grid")]
    pub lambda: Option<f64>,
    /// Comma-separated penalty grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Validation CSV for picking a penalty from the grid.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StumpsArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuboptArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub strategy: StrategyArgs,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the largest depth.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub min_node_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Holdout fraction for penalty selection.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Monte Carlo sample size for IMSE.
    #[arg(long)]
    pub mc: Option<usize>,
    /// JSON-lines report; a CSV mirror is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Ridge model spec JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lower: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub upper: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Selection {
    pub lambda: f64,
    pub leaf_count: usize,
    pub objective: f64,
    pub holdout_error: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PruneOutput {
    pub sequence: PruneSequence,
    pub selections: Vec<Selection>,
    pub lambda_star: f64,
    pub subtree: Tree,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StumpsOutput {
    pub expansion: Expansion,
    pub gram_deviation: f64,
    pub reconstruction_deviation: f64,
    pub impurity_identity: ImpurityIdentityCheck,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

pub fn run(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Train(a) => train(a),
        Command::Prune(a) => prune(a),
        Command::Stumps(a) => stumps(a),
        Command::Subopt(a) => subopt(a),
        Command::Experiment(a) => experiment(a),
        Command::Generate(a) => generate(a),
    }
    .map(|violations| if violations > 0 { EXIT_VIOLATION } else { EXIT_OK })
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn load(data: &DataArgs) -> anyhow::Result<Dataset> {
    let (_, ds) = load_csv(&data.data, &data.response).with_context(|| format!("loading {}", data.data.display()))?;
    Ok(ds)
}

fn train(a: TrainArgs) -> anyhow::Result<usize> {
    let ds = load(&a.data)?;
    let strategy = a.strategy.build(ds.p());
    let tree = grow(&ds, &strategy, a.depth, a.min_node_size)?;
    write_json_line(&tree, output(a.out.as_deref())?)?;
    Ok(0)
}

fn prune(a: PruneArgs) -> anyhow::Result<usize> {
    let tree: Tree = read_json(&a.tree)?;
    let grid = match (a.lambda, a.grid) {
        (Some(l), _) => vec![l],
        (None, Some(g)) if !g.is_empty() => g,
        _ => bail!("give --lambda or a non-empty --grid"),
    };
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        bail!("penalties must be finite and non-negative");
    }
    let validation = match &a.holdout {
        Some(path) => Some(load(&DataArgs { data: path.clone(), response: a.response.clone() })?),
        None => None,
    };
    let sequence = weakest_link_sequence(&tree);
    let candidates = sequence.trees(&tree)?;
    let mut selections = Vec::with_capacity(grid.len());
    let mut subtrees = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let sub = smallest_minimizer(candidates.clone(), lambda);
        let holdout_error = validation.as_ref().map(|v| training_error(&sub, v)).transpose()?;
        selections.push(Selection {
            lambda,
            leaf_count: sub.leaf_count(),
            objective: penalized_objective(&sub, lambda).value,
            holdout_error,
        });
        subtrees.push(sub);
    }
    // Lowest validation error, larger penalty on ties; without validation data the largest grid value.
    let star = match validation {
        Some(_) => {
            let min = selections.iter().filter_map(|s| s.holdout_error).fold(f64::INFINITY, f64::min);
            (0..grid.len())
                .filter(|&k| selections[k].holdout_error.is_some_and(|e| e <= min + 1e-12))
                .max_by(|&x, &y| grid[x].total_cmp(&grid[y]))
                .expect("grid is non-empty")
        }
        None => (0..grid.len()).max_by(|&x, &y| grid[x].total_cmp(&grid[y])).expect("grid is non-empty"),
    };
    let out = PruneOutput { sequence, selections, lambda_star: grid[star], subtree: subtrees.swap_remove(star) };
    write_json_line(&out, output(a.out.as_deref())?)?;
    Ok(0)
}

fn stumps(a: StumpsArgs) -> anyhow::Result<usize> {
    let tree: Tree = read_json(&a.tree)?;
    let ds = load(&a.data)?;
    if ds.n() != tree.n || ds.p() != tree.p {
        bail!("data has n={}, p={} but the tree was trained on n={}, p={}", ds.n(), ds.p(), tree.n, tree.p);
    }
    for node in tree.nodes.values() {
        if node.index_set.as_slice().last().is_some_and(|&i| i >= ds.n()) {
            bail!("node {} refers to rows outside the data", node.node_id);
        }
    }
    let expansion = build_expansion(&tree, &ds)?;
    let mut reconstruction_deviation: f64 = 0.0;
    for i in 0..ds.n() {
        let x = ds.row(i);
        reconstruction_deviation = reconstruction_deviation.max((predict(&tree, &x)? - expansion.evaluate(&tree, &x)?).abs());
    }
    let out = StumpsOutput {
        gram_deviation: verify_orthonormality(&expansion, &ds),
        impurity_identity: verify_impurity_identity(&tree, &ds)?,
        reconstruction_deviation,
        expansion,
    };
    write_json_line(&out, output(a.out.as_deref())?)?;
    Ok(0)
}

fn subopt(a: SuboptArgs) -> anyhow::Result<usize> {
    let ds = load(&a.data)?;
    let strategy = a.strategy.build(ds.p());
    let report = estimate_suboptimality(&ds, &IndexSet::full(ds.n()), &strategy, a.kappa, a.trials)?;
    write_json_line(&report, output(a.out.as_deref())?)?;
    Ok(0)
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<usize> {
    let mut config: ExperimentConfig = read_json(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
        config.strategy.seed = seed;
    }
    if let Some(depth) = a.depth {
        config.depths.max = depth;
        config.depths.min = config.depths.min.min(depth);
    }
    if let Some(m) = a.min_node_size {
        config.min_node_size = m;
    }
    if let Some(grid) = a.grid {
        config.lambda_grid = Some(grid);
    }
    if let Some(h) = a.holdout {
        config.holdout_fraction = h;
    }
    if let Some(mc) = a.mc {
        config.mc_size = mc;
    }
    let out_path = a.out.or_else(|| config.output.clone().map(PathBuf::from));
    let started = Instant::now();
    let mut report = match config.experiment {
        ExperimentKind::Rate => Report::Rate(run_rate_experiment(&config)?),
        ExperimentKind::FastRate => {
            if config.strategy.kind != StrategyKind::ExhaustiveOblique {
                bail!("fast_rate needs the exhaustive_oblique strategy");
            }
            Report::Rate(run_fast_rate_experiment(&config)?)
        }
        ExperimentKind::Pruning => Report::Pruning(run_pruning_experiment(&config)?),
        ExperimentKind::ImpurityBound => Report::Impurity(run_impurity_experiment(&config)?),
    };
    report.set_wall_time(started.elapsed().as_secs_f64());
    match out_path {
        Some(path) => {
            let mirror = write_report(&report, &path)?;
            eprintln!("wrote {} and {}", path.display(), mirror.display());
        }
        None => write_json_line(&report, io::stdout().lock())?,
    }
    let violations = report.violations();
    if violations > 0 {
        eprintln!("{violations} bound violation(s)");
    }
    Ok(violations)
}

fn generate(a: GenerateArgs) -> anyhow::Result<usize> {
    let model: RidgeModel = read_json(&a.model)?;
    let domain = DomainBox::cube(model.dim(), a.lower, a.upper);
    let ds = generate_dataset(&model, a.n, a.noise, &domain, a.seed)?;
    write_csv(&ds, output(a.out.as_deref())?)?;
    Ok(0)
}
