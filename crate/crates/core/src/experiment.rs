//! Training-error rate experiments against total-variation bounds, the
//! per-node impurity bound, Monte Carlo IMSE and pruning comparisons.
//!
//! With exhaustive search over all directions the excess training error of
//! `T_K` is bounded realization by realization by `||g||^2_{L1} / K`, so the
//! rate experiment asserts it. The fast-rate and pruning experiments bound
//! expectations only and are reported without assertion.

use alloc::vec::Vec;

use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, IndexSet};
use crate::error::{invalid, Error, Result};
use crate::math::{self, mix_seed};
use crate::prune::{default_lambda_grid, holdout_partition, smallest_minimizer, weakest_link_sequence, OBJECTIVE_TOLERANCE};
use crate::ridge::{generate_dataset, l1_tv_norm, node_size_profile, node_tv_profile, DomainBox, RidgeModel};
use crate::search::{SearchStrategy, StrategyKind, MAX_ORACLE_SPARSITY};
use crate::tree::{grow, predict, training_error, Tree};

/// Slack allowed when comparing a realized value with a bound.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rate,
    FastRate,
    Pruning,
    ImpurityBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthRange {
    pub min: usize,
    pub max: usize,
}

fn default_mc() -> usize {
    1000
}
fn default_holdout() -> f64 {
    0.3
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: RidgeModel,
    pub n: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    pub strategy: SearchStrategy,
    pub depths: DepthRange,
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default = "default_mc")]
    pub mc_size: usize,
    pub domain: DomainBox,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    /// Noise levels for the pruning experiment; defaults to `[noise_std]`.
    #[serde(default)]
    pub noise_levels: Vec<f64>,
    /// Independent seeds per noise level (pruning experiment).
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default = "one")]
    pub min_node_size: usize,
    #[serde(default)]
    pub output: Option<alloc::string::String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.mc_size == 0 || self.replicates == 0 || self.min_node_size == 0 {
            return Err(invalid("counts must be at least 1"));
        }
        if self.depths.min > self.depths.max {
            return Err(invalid("depth range is empty"));
        }
        self.domain.validate()?;
        if self.domain.dim() != self.model.dim() {
            return Err(Error::DimensionMismatch { expected: self.model.dim(), got: self.domain.dim() });
        }
        self.strategy.validate(self.model.dim())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub depth: usize,
    pub leaf_count: usize,
    pub train_error: f64,
    /// `||y - mu(T_K)||_n^2 - ||y - g||_n^2`.
    pub excess: f64,
    /// Right-hand side of the bound; absent at depth 0.
    pub bound: Option<f64>,
    pub bound_holds: Option<bool>,
    pub imse: f64,
    pub imse_std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastRateDiagnostics {
    /// Largest `2^K max_t n(t) / n` over the depths run.
    pub balance_constant: f64,
    pub v: f64,
    pub q: f64,
    /// Whether `sum_t ||g||^q_{L1(t)} <= V^q` held at every depth for this `q`.
    pub profile_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub experiment: ExperimentKind,
    pub rows: Vec<RateRow>,
    /// `||g||_{L1}` over the empirical hull of the sample.
    pub g_norm: f64,
    /// `||y - g||_n^2`.
    pub noise_floor: f64,
    pub kappa: f64,
    /// Whether bound violations count as failures.
    pub asserted: bool,
    pub violations: usize,
    pub fast: Option<FastRateDiagnostics>,
    pub config: ExperimentConfig,
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImseEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub mc_size: usize,
}

/// Monte Carlo estimate of `E (g(x) - mu(T)(x))^2` for `x` uniform on `domain`.
pub fn estimate_imse(tree: &Tree, model: &RidgeModel, mc_size: usize, domain: &DomainBox, seed: u64) -> Result<ImseEstimate> {
    if mc_size == 0 {
        return Err(invalid("mc_size must be at least 1"));
    }
    domain.validate()?;
    if domain.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: domain.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers = domain.samplers();
    let mut x = alloc::vec![0.0; domain.dim()];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..mc_size {
        for (slot, s) in x.iter_mut().zip(&samplers) {
            *slot = s.sample(&mut rng);
        }
        let r = model.eval(&x)? - predict(tree, &x)?;
        let e = r * r;
        sum += e;
        sum_sq += e * e;
    }
    let m = mc_size as f64;
    let mean = sum / m;
    let std_err = if mc_size > 1 { math::sqrt(((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0) / m) } else { 0.0 };
    Ok(ImseEstimate { mean, std_err, mc_size })
}

fn noise_floor(model: &RidgeModel, dataset: &Dataset) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..dataset.n() {
        let r = dataset.y(i) - model.eval(&dataset.row(i))?;
        acc += r * r;
    }
    Ok(acc / dataset.n() as f64)
}

fn check_exact_regime(config: &ExperimentConfig) -> Result<()> {
    let p = config.model.dim();
    let s = &config.strategy;
    if s.kind != StrategyKind::ExhaustiveOblique || s.sparsity != p {
        return Err(invalid("rate experiments need exhaustive search over all p coordinates"));
    }
    if p > MAX_ORACLE_SPARSITY || config.n > s.oracle_cap {
        return Err(Error::OracleCapExceeded { size: config.n, cap: s.oracle_cap });
    }
    if config.min_node_size != 1 {
        return Err(invalid("rate experiments grow with min_node_size = 1"));
    }
    Ok(())
}

struct DepthFits {
    dataset: Dataset,
    trees: Vec<Tree>,
    g_norm: f64,
    noise_floor: f64,
}

fn fit_depths(config: &ExperimentConfig) -> Result<DepthFits> {
    let dataset = generate_dataset(&config.model, config.n, config.noise_std, &config.domain, config.seed)?;
    let full = grow(&dataset, &config.strategy, config.depths.max, config.min_node_size)?;
    // Exhaustive search is deterministic, so T_K is a truncation of T_max.
    let trees = (config.depths.min..=config.depths.max).map(|k| full.truncated(k)).collect();
    let g_norm = l1_tv_norm(&config.model, &dataset, &IndexSet::full(dataset.n()))?.total;
    let noise_floor = noise_floor(&config.model, &dataset)?;
    Ok(DepthFits { dataset, trees, g_norm, noise_floor })
}

fn rows_with_bound<F>(config: &ExperimentConfig, fits: &DepthFits, bound: F) -> Result<Vec<RateRow>>
where
    F: Fn(usize) -> Option<f64>,
{
    let mut rows = Vec::with_capacity(fits.trees.len());
    let imse_seed = mix_seed(config.seed, 0x135e);
    for (tree, depth) in fits.trees.iter().zip(config.depths.min..) {
        let train_error = training_error(tree, &fits.dataset)?;
        let excess = train_error - fits.noise_floor;
        let bound = bound(depth);
        let imse = estimate_imse(tree, &config.model, config.mc_size, &config.domain, imse_seed)?;
        rows.push(RateRow {
            depth,
            leaf_count: tree.leaf_count(),
            train_error,
            excess,
            bound,
            bound_holds: bound.map(|b| excess <= b + BOUND_TOLERANCE),
            imse: imse.mean,
            imse_std_err: imse.std_err,
        });
    }
    Ok(rows)
}

/// Grows `T_K` with exhaustive search and compares the excess training
/// error with `||g||^2_{L1} / (kappa K)`, `kappa = 1`.
pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    config.validate()?;
    check_exact_regime(config)?;
    let fits = fit_depths(config)?;
    let kappa = 1.0;
    let g2 = fits.g_norm * fits.g_norm;
    let rows = rows_with_bound(config, &fits, |k| (k > 0).then(|| g2 / (kappa * k as f64)))?;
    let violations = rows.iter().filter(|r| r.bound_holds == Some(false)).count();
    Ok(RateReport {
        experiment: ExperimentKind::Rate,
        rows,
        g_norm: fits.g_norm,
        noise_floor: fits.noise_floor,
        kappa,
        asserted: true,
        violations,
        fast: None,
        config: config.clone(),
        wall_time_secs: None,
    })
}

/// Candidate exponents for the node sparsity profile, smallest first.
pub fn q_grid(p: usize) -> Vec<f64> {
    let mut grid = alloc::vec![2.1, 2.5, 3.0, 4.0];
    let pf = p as f64;
    if pf > 2.0 && !grid.contains(&pf) {
        grid.push(pf);
    }
    grid.sort_unstable_by(f64::total_cmp);
    grid
}

/// Compares the excess training error with `A V^2 / 4^((K-1)/q)` using the
/// realized balance constant `A` and the smallest grid `q` for which
/// `sum_t ||g||^q_{L1(t)} <= ||g||^q_{L1}` at every depth. Reported only.
pub fn run_fast_rate_experiment(config: &ExperimentConfig) -> Result<RateReport> {
    config.validate()?;
    check_exact_regime(config)?;
    let fits = fit_depths(config)?;
    let balance = fits
        .trees
        .iter()
        .zip(config.depths.min..)
        .map(|(t, k)| node_size_profile(t, Some(k)).balance_constant)
        .fold(0.0, f64::max);
    let grid = q_grid(config.model.dim());
    let mut chosen = None;
    for &q in &grid {
        let vq = libm::pow(fits.g_norm, q);
        let mut ok = true;
        for tree in &fits.trees {
            let profile = node_tv_profile(&config.model, tree, &fits.dataset, q)?;
            if profile.power_sum > vq * (1.0 + BOUND_TOLERANCE) + BOUND_TOLERANCE {
                ok = false;
                break;
            }
        }
        if ok {
            chosen = Some(FastRateDiagnostics { balance_constant: balance, v: fits.g_norm, q, profile_satisfied: true });
            break;
        }
    }
    let diagnostics = match chosen {
        Some(d) => d,
        None => {
            // Fall back to the largest q with V taken from the worst depth.
            let q = *grid.last().expect("grid is non-empty");
            let mut v: f64 = fits.g_norm;
            for tree in &fits.trees {
                let profile = node_tv_profile(&config.model, tree, &fits.dataset, q)?;
                v = v.max(libm::pow(profile.power_sum, 1.0 / q));
            }
            FastRateDiagnostics { balance_constant: balance, v, q, profile_satisfied: false }
        }
    };
    let (a, v, q) = (diagnostics.balance_constant, diagnostics.v, diagnostics.q);
    let rows = rows_with_bound(config, &fits, |k| (k > 0).then(|| a * v * v / libm::pow(4.0, (k as f64 - 1.0) / q)))?;
    let violations = rows.iter().filter(|r| r.bound_holds == Some(false)).count();
    Ok(RateReport {
        experiment: ExperimentKind::FastRate,
        rows,
        g_norm: fits.g_norm,
        noise_floor: fits.noise_floor,
        kappa: 1.0,
        asserted: false,
        violations,
        fast: Some(diagnostics),
        config: config.clone(),
        wall_time_secs: None,
    })
}

/// One node's comparison of the best achievable decrease with
/// `w(t) R(t)^2 / ||g||^2_{L1(t)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpurityMargin {
    pub node_size: usize,
    /// `||y - ybar_t||_t^2 - ||y - g||_t^2`, with `||f||_t^2` the node average of `f^2`.
    pub excess_risk: f64,
    pub weight: f64,
    pub g_norm: f64,
    pub oracle_decrease: f64,
    pub lower_bound: f64,
    pub margin: f64,
}

/// Margin of the impurity bound on one node, or `None` when the node's
/// excess risk is not positive.
pub fn impurity_bound_margin(dataset: &Dataset, model: &RidgeModel, node: &IndexSet) -> Result<Option<ImpurityMargin>> {
    dataset.check_node(node)?;
    let p = dataset.p();
    if p > MAX_ORACLE_SPARSITY {
        return Err(invalid("the oracle needs p <= 3"));
    }
    let m = node.len() as f64;
    let mean = node.iter().map(|i| dataset.y(i)).sum::<f64>() / m;
    let mut spread = 0.0;
    let mut misfit = 0.0;
    for i in node.iter() {
        let y = dataset.y(i);
        spread += (y - mean) * (y - mean);
        let r = y - model.eval(&dataset.row(i))?;
        misfit += r * r;
    }
    let excess_risk = (spread - misfit) / m;
    if excess_risk <= 0.0 {
        return Ok(None);
    }
    let g_norm = l1_tv_norm(model, dataset, node)?.total;
    let oracle_decrease = match SearchStrategy::exhaustive(p).search(dataset, node) {
        Ok(s) => s.decrease,
        Err(Error::NoValidSplit) => 0.0,
        Err(e) => return Err(e),
    };
    let weight = m / dataset.n() as f64;
    let lower_bound = weight * excess_risk * excess_risk / (g_norm * g_norm);
    Ok(Some(ImpurityMargin {
        node_size: node.len(),
        excess_risk,
        weight,
        g_norm,
        oracle_decrease,
        lower_bound,
        margin: oracle_decrease - lower_bound,
    }))
}

/// Impurity-bound margins for every node of `tree` with positive excess risk.
pub fn verify_impurity_bound(dataset: &Dataset, model: &RidgeModel, tree: &Tree) -> Result<Vec<(usize, ImpurityMargin)>> {
    let mut out = Vec::new();
    for node in tree.nodes.values() {
        if let Some(m) = impurity_bound_margin(dataset, model, &node.index_set)? {
            out.push((node.node_id, m));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMargin {
    pub node_id: usize,
    pub depth: usize,
    #[serde(flatten)]
    pub margin: ImpurityMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpurityReport {
    pub nodes: Vec<NodeMargin>,
    /// Smallest margin seen; absent when no node had positive excess risk.
    pub min_margin: Option<f64>,
    pub violations: usize,
    pub config: ExperimentConfig,
    pub wall_time_secs: Option<f64>,
}

/// Grows a tree on generated data and checks the impurity bound at every
/// node with positive excess risk. Nodes above the oracle cap are skipped.
pub fn run_impurity_experiment(config: &ExperimentConfig) -> Result<ImpurityReport> {
    config.validate()?;
    if config.model.dim() > MAX_ORACLE_SPARSITY {
        return Err(invalid("the oracle needs p <= 3"));
    }
    let dataset = generate_dataset(&config.model, config.n, config.noise_std, &config.domain, config.seed)?;
    let tree = grow(&dataset, &config.strategy, config.depths.max, config.min_node_size)?;
    let mut nodes = Vec::new();
    for node in tree.nodes.values().filter(|n| n.count() <= config.strategy.oracle_cap) {
        if let Some(margin) = impurity_bound_margin(&dataset, &config.model, &node.index_set)? {
            nodes.push(NodeMargin { node_id: node.node_id, depth: node.depth, margin });
        }
    }
    let min_margin = nodes.iter().map(|m| m.margin.margin).reduce(f64::min);
    let violations = nodes.iter().filter(|m| m.margin.margin < -BOUND_TOLERANCE).count();
    Ok(ImpurityReport { nodes, min_margin, violations, config: config.clone(), wall_time_secs: None })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub leaf_count: usize,
    pub holdout_error: f64,
    pub imse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningRun {
    pub noise_std: f64,
    pub replicate: usize,
    pub seed: u64,
    pub lambda_star: f64,
    pub selected_leaves: usize,
    pub pruned_imse: f64,
    pub pruned_imse_std_err: f64,
    pub root_imse: f64,
    pub best_unpruned_depth: usize,
    pub best_unpruned_imse: f64,
    pub best_unpruned_std_err: f64,
    /// `(K, IMSE)` for each unpruned depth.
    pub unpruned_imse: Vec<(usize, f64)>,
    pub table: Vec<LambdaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningReport {
    pub runs: Vec<PruningRun>,
    pub config: ExperimentConfig,
    pub wall_time_secs: Option<f64>,
}

/// For each noise level and replicate: holdout-selects the penalty, prunes,
/// and compares the pruned tree's IMSE with every unpruned depth.
pub fn run_pruning_experiment(config: &ExperimentConfig) -> Result<PruningReport> {
    config.validate()?;
    let levels = if config.noise_levels.is_empty() { alloc::vec![config.noise_std] } else { config.noise_levels.clone() };
    let mut runs = Vec::new();
    for (li, &noise_std) in levels.iter().enumerate() {
        for replicate in 0..config.replicates {
            let seed = mix_seed(config.seed, (li * config.replicates + replicate) as u64);
            runs.push(pruning_run(config, noise_std, replicate, seed)?);
        }
    }
    Ok(PruningReport { runs, config: config.clone(), wall_time_secs: None })
}

fn pruning_run(config: &ExperimentConfig, noise_std: f64, replicate: usize, seed: u64) -> Result<PruningRun> {
    let dataset = generate_dataset(&config.model, config.n, noise_std, &config.domain, seed)?;
    let (train, holdout) = holdout_partition(dataset.n(), config.holdout_fraction, mix_seed(seed, 1))?;
    let train_ds = dataset.subset(&train)?;
    let holdout_ds = dataset.subset(&holdout)?;
    let grid = config.lambda_grid.clone().unwrap_or_else(|| default_lambda_grid(&train_ds, 20));
    let imse_seed = mix_seed(seed, 2);
    let tree = grow(&train_ds, &config.strategy, config.depths.max, config.min_node_size)?;
    let candidates = weakest_link_sequence(&tree).trees(&tree)?;

    let mut table = Vec::with_capacity(grid.len());
    let mut selected = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let sub = smallest_minimizer(candidates.clone(), lambda);
        let imse = estimate_imse(&sub, &config.model, config.mc_size, &config.domain, imse_seed)?;
        table.push(LambdaRow {
            lambda,
            leaf_count: sub.leaf_count(),
            holdout_error: training_error(&sub, &holdout_ds)?,
            imse: imse.mean,
        });
        selected.push((sub, imse));
    }
    let min = table.iter().map(|r| r.holdout_error).fold(f64::INFINITY, f64::min);
    let star = table
        .iter()
        .enumerate()
        .filter(|(_, r)| r.holdout_error <= min + OBJECTIVE_TOLERANCE)
        .max_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda))
        .map(|(k, _)| k)
        .expect("grid is non-empty");
    let (pruned, pruned_imse) = &selected[star];

    let mut unpruned_imse = Vec::new();
    let mut best = (0, f64::INFINITY, 0.0);
    let mut root_imse = f64::NAN;
    for k in 0..=config.depths.max {
        let est = estimate_imse(&tree.truncated(k), &config.model, config.mc_size, &config.domain, imse_seed)?;
        if k == 0 {
            root_imse = est.mean;
        }
        if k >= config.depths.min {
            unpruned_imse.push((k, est.mean));
            if est.mean < best.1 {
                best = (k, est.mean, est.std_err);
            }
        }
    }
    Ok(PruningRun {
        noise_std,
        replicate,
        seed,
        lambda_star: grid[star],
        selected_leaves: pruned.leaf_count(),
        pruned_imse: pruned_imse.mean,
        pruned_imse_std_err: pruned_imse.std_err,
        root_imse,
        best_unpruned_depth: best.0,
        best_unpruned_imse: best.1,
        best_unpruned_std_err: best.2,
        unpruned_imse,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::{RidgeComponent, Shape};
    use alloc::vec;

    fn linear_model(p: usize, slope: f64) -> RidgeModel {
        let mut v = vec![0.0; p];
        v[0] = 1.0;
        RidgeModel::new(vec![RidgeComponent::new(Shape::Linear { slope }, v).unwrap()], 0.0).unwrap()
    }

    #[test]
    fn imse_root_only_linear() {
        let model = linear_model(1, 1.0);
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let root = grow(&ds, &SearchStrategy::axis_aligned(), 0, 1).unwrap();
        let est = estimate_imse(&root, &model, 20_000, &DomainBox::cube(1, 0.0, 1.0), 5).unwrap();
        // Root predicts 0.5; E (U - 0.5)^2 = 1/12.
        assert!((est.mean - 1.0 / 12.0).abs() <= 3.0 * est.std_err);
        let one = estimate_imse(&root, &model, 1, &DomainBox::cube(1, 0.0, 1.0), 5).unwrap();
        assert_eq!(one.std_err, 0.0);
        assert!(estimate_imse(&root, &model, 0, &DomainBox::cube(1, 0.0, 1.0), 5).is_err());
    }

    #[test]
    fn impurity_margin_d1_step() {
        let ds = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let step = RidgeModel::new(vec![RidgeComponent::new(Shape::Step { height: 1.0, location: 2.5 }, vec![1.0]).unwrap()], 0.0).unwrap();
        let m = impurity_bound_margin(&ds, &step, &IndexSet::full(4)).unwrap().unwrap();
        assert_eq!(m.excess_risk, 0.25);
        assert_eq!(m.g_norm, 1.0);
        assert_eq!(m.oracle_decrease, 0.25);
        assert_eq!(m.lower_bound, 0.0625);
        let flat = RidgeModel::new(vec![RidgeComponent::new(Shape::Linear { slope: 0.0 }, vec![1.0]).unwrap()], 0.5).unwrap();
        let ys = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        assert!(impurity_bound_margin(&ys, &flat, &IndexSet::full(2)).unwrap().is_none());
    }

    #[test]
    fn q_grid_includes_dimension() {
        assert_eq!(q_grid(2), vec![2.1, 2.5, 3.0, 4.0]);
        assert_eq!(q_grid(5), vec![2.1, 2.5, 3.0, 4.0, 5.0]);
        assert_eq!(q_grid(3), vec![2.1, 2.5, 3.0, 4.0]);
    }
}
