//! Weakest-link cost-complexity pruning and penalty selection.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::math;
use crate::search::SearchStrategy;
use crate::tree::{grow, Tree};

/// Objectives closer than this count as equal; the smaller tree wins.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    pub critical_alpha: f64,
    pub collapsed_node_id: usize,
    pub leaf_count_after: usize,
    pub train_error_after: f64,
}

/// The weakest-link path from a tree down to its root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSequence {
    pub base_leaf_count: usize,
    pub base_train_error: f64,
    pub steps: Vec<PruneStep>,
}

impl PruneSequence {
    /// The base tree followed by the tree after each step.
    pub fn trees(&self, base: &Tree) -> Result<Vec<Tree>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut current = base.clone();
        out.push(current.clone());
        for step in &self.steps {
            current.collapse(step.collapsed_node_id)?;
            out.push(current.clone());
        }
        Ok(out)
    }
}

/// `train_error + lambda * |T|` for one tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenalizedObjective {
    pub lambda: f64,
    pub value: f64,
}

pub fn penalized_objective(tree: &Tree, lambda: f64) -> PenalizedObjective {
    PenalizedObjective { lambda, value: tree.leaf_error() + lambda * tree.leaf_count() as f64 }
}

/// Per-leaf training-error increase from collapsing each internal node:
/// `(SSE(t) - sum of leaf SSEs under t) / n / (leaves(t) - 1)`.
pub fn link_strengths(tree: &Tree) -> Vec<(usize, f64)> {
    let n = tree.n as f64;
    tree.internal_nodes()
        .map(|node| {
            let (leaf_sse, leaves) = subtree_leaves(tree, node.node_id);
            (node.node_id, (node.sse - leaf_sse) / n / (leaves as f64 - 1.0))
        })
        .collect()
}

fn subtree_leaves(tree: &Tree, id: usize) -> (f64, usize) {
    let mut stack = alloc::vec![id];
    let (mut sse, mut count) = (0.0, 0);
    while let Some(v) = stack.pop() {
        let node = &tree.nodes[&v];
        match node.children() {
            Some((l, r)) => {
                stack.push(r);
                stack.push(l);
            }
            None => {
                sse += node.sse;
                count += 1;
            }
        }
    }
    (sse, count)
}

/// Repeatedly collapses the internal node with the smallest link strength
/// (smaller id on ties) until only the root remains.
pub fn weakest_link_sequence(tree: &Tree) -> PruneSequence {
    let mut current = tree.clone();
    let mut steps = Vec::new();
    loop {
        let strengths = link_strengths(&current);
        // Ids ascend, so a strict comparison keeps the smaller id on ties.
        let Some(&(id, alpha)) = strengths.iter().reduce(|best, c| if c.1 < best.1 { c } else { best }) else {
            break;
        };
        current.collapse(id).expect("id comes from the tree");
        steps.push(PruneStep {
            critical_alpha: alpha,
            collapsed_node_id: id,
            leaf_count_after: current.leaf_count(),
            train_error_after: current.leaf_error(),
        });
    }
    PruneSequence { base_leaf_count: tree.leaf_count(), base_train_error: tree.leaf_error(), steps }
}

/// Smallest subtree on the weakest-link path minimizing
/// `train_error + lambda * |T|`.
pub fn select_subtree(tree: &Tree, lambda: f64) -> Result<Tree> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda must be finite and non-negative"));
    }
    let sequence = weakest_link_sequence(tree);
    let candidates = sequence.trees(tree)?;
    Ok(smallest_minimizer(candidates, lambda))
}

/// Among `candidates`, the fewest-leaf tree whose objective is within
/// [`OBJECTIVE_TOLERANCE`] of the minimum.
pub fn smallest_minimizer(candidates: Vec<Tree>, lambda: f64) -> Tree {
    let values: Vec<f64> = candidates.iter().map(|t| penalized_objective(t, lambda).value).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .zip(values)
        .filter(|(_, v)| *v <= min + OBJECTIVE_TOLERANCE)
        .min_by_key(|(t, _)| t.leaf_count())
        .map(|(t, _)| t)
        .expect("at least the base tree is a candidate")
}

/// Geometric grid spanning `[1e-6, 1] * ||y||_n^2`.
pub fn default_lambda_grid(dataset: &Dataset, points: usize) -> Vec<f64> {
    let scale = dataset.response().iter().map(|y| y * y).sum::<f64>() / dataset.n() as f64;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    if points <= 1 {
        return alloc::vec![scale];
    }
    (0..points)
        .map(|k| scale * libm::pow(10.0, -6.0 + 6.0 * k as f64 / (points - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda_star: f64,
    pub grid: Vec<f64>,
    /// Validation MSE for each grid value.
    pub holdout_errors: Vec<f64>,
    /// Leaf count of the selected subtree for each grid value (last fold for k-fold).
    pub leaf_counts: Vec<usize>,
}

fn mse(tree: &Tree, dataset: &Dataset) -> Result<f64> {
    crate::tree::training_error(tree, dataset)
}

fn pick_lambda(grid: &[f64], errors: &[f64]) -> f64 {
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    grid.iter()
        .zip(errors)
        .filter(|(_, &e)| e <= min + OBJECTIVE_TOLERANCE)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("lambda grid is empty"));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(invalid("lambda grid values must be finite and non-negative"));
    }
    Ok(())
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Random `(train, holdout)` partition of `0..n`, each sorted, with
/// `round(fraction * n)` held out.
pub fn holdout_partition(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid("holdout fraction must lie in (0, 1)"));
    }
    let h = libm::round(fraction * n as f64) as usize;
    if h == 0 || h >= n {
        return Err(invalid("holdout split leaves one part empty"));
    }
    let order = shuffled(n, seed);
    let mut holdout = order[..h].to_vec();
    let mut train = order[h..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    Ok((train, holdout))
}

/// Grows on a random training part and picks the grid value whose pruned
/// subtree has the lowest MSE on the held-out part (larger lambda on ties).
pub fn holdout_lambda(
    dataset: &Dataset,
    strategy: &SearchStrategy,
    max_depth: usize,
    grid: &[f64],
    holdout_fraction: f64,
    seed: u64,
) -> Result<LambdaSelection> {
    check_grid(grid)?;
    let (train, holdout) = holdout_partition(dataset.n(), holdout_fraction, seed)?;
    let train_ds = dataset.subset(&train)?;
    let holdout_ds = dataset.subset(&holdout)?;
    let tree = grow(&train_ds, strategy, max_depth, 1)?;
    let candidates = weakest_link_sequence(&tree).trees(&tree)?;
    let mut holdout_errors = Vec::with_capacity(grid.len());
    let mut leaf_counts = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let sub = smallest_minimizer(candidates.clone(), lambda);
        holdout_errors.push(mse(&sub, &holdout_ds)?);
        leaf_counts.push(sub.leaf_count());
    }
    Ok(LambdaSelection { lambda_star: pick_lambda(grid, &holdout_errors), grid: grid.to_vec(), holdout_errors, leaf_counts })
}

/// K-fold variant of [`holdout_lambda`]: errors are averaged over folds.
pub fn kfold_lambda(
    dataset: &Dataset,
    strategy: &SearchStrategy,
    max_depth: usize,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<LambdaSelection> {
    check_grid(grid)?;
    let n = dataset.n();
    if folds < 2 || folds > n {
        return Err(invalid("fold count must lie in [2, n]"));
    }
    let order = shuffled(n, seed);
    let mut totals = alloc::vec![0.0; grid.len()];
    let mut leaf_counts = alloc::vec![0; grid.len()];
    for f in 0..folds {
        let mut holdout: Vec<usize> = order.iter().enumerate().filter(|(k, _)| k % folds == f).map(|(_, &i)| i).collect();
        let mut train: Vec<usize> = order.iter().enumerate().filter(|(k, _)| k % folds != f).map(|(_, &i)| i).collect();
        holdout.sort_unstable();
        train.sort_unstable();
        let train_ds = dataset.subset(&train)?;
        let holdout_ds = dataset.subset(&holdout)?;
        let tree = grow(&train_ds, strategy, max_depth, 1)?;
        let candidates = weakest_link_sequence(&tree).trees(&tree)?;
        for (k, &lambda) in grid.iter().enumerate() {
            let sub = smallest_minimizer(candidates.clone(), lambda);
            totals[k] += mse(&sub, &holdout_ds)? * holdout.len() as f64;
            leaf_counts[k] = sub.leaf_count();
        }
    }
    let holdout_errors: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    Ok(LambdaSelection { lambda_star: pick_lambda(grid, &holdout_errors), grid: grid.to_vec(), holdout_errors, leaf_counts })
}

/// True when the critical alphas never decrease by more than `tolerance`.
pub fn alphas_non_decreasing(sequence: &PruneSequence, tolerance: f64) -> bool {
    sequence.steps.windows(2).all(|w| w[1].critical_alpha >= w[0].critical_alpha - tolerance * math::abs(w[0].critical_alpha).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d1_tree() -> (Dataset, Tree) {
        let ds = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let tree = grow(&ds, &SearchStrategy::axis_aligned(), 1, 1).unwrap();
        (ds, tree)
    }

    #[test]
    fn d1_sequence() {
        let (_, tree) = d1_tree();
        let seq = weakest_link_sequence(&tree);
        assert_eq!(seq.steps.len(), 1);
        assert_eq!(seq.steps[0].critical_alpha, 0.25);
        assert_eq!(seq.steps[0].leaf_count_after, 1);
        assert_eq!(seq.steps[0].train_error_after, 0.25);
    }

    #[test]
    fn root_only_has_empty_sequence() {
        let (ds, _) = d1_tree();
        let root = grow(&ds, &SearchStrategy::axis_aligned(), 0, 1).unwrap();
        assert!(weakest_link_sequence(&root).steps.is_empty());
    }

    #[test]
    fn d1_selection() {
        let (_, tree) = d1_tree();
        assert_eq!(select_subtree(&tree, 0.1).unwrap().leaf_count(), 2);
        assert_eq!(select_subtree(&tree, 0.3).unwrap().leaf_count(), 1);
        // Tie at 0.5 goes to the smaller tree.
        assert_eq!(select_subtree(&tree, 0.25).unwrap().leaf_count(), 1);
        assert!(select_subtree(&tree, -1.0).is_err());
        let obj = penalized_objective(&tree, 0.1);
        assert!((obj.value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grid_and_holdout_validation() {
        let (ds, _) = d1_tree();
        let g = default_lambda_grid(&ds, 20);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.5e-6).abs() < 1e-18 && (g[19] - 0.5).abs() < 1e-15);
        let s = SearchStrategy::axis_aligned();
        assert!(holdout_lambda(&ds, &s, 2, &[], 0.5, 0).is_err());
        assert!(holdout_lambda(&ds, &s, 2, &[0.1], 1.0, 0).is_err());
        assert!(holdout_lambda(&ds, &s, 2, &[0.1], 0.01, 0).is_err());
        assert_eq!(holdout_lambda(&ds, &s, 2, &[0.1], 0.5, 0).unwrap().lambda_star, 0.1);
    }
}
