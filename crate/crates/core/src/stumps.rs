//! Orthonormal decision-stump expansion of a fitted tree.
//!
//! Each internal node `t` with children `t_L`, `t_R` carries the stump
//!
//! ```text
//! psi_t(x) = ( 1{x in t_L} n(t_R) - 1{x in t_R} n(t_L) ) / sqrt( w(t) n(t_L) n(t_R) ),
//! ```
//!
//! with `w(t) = n(t)/n`; the "empty node" carries the constant 1. These are
//! orthonormal in the empirical inner product and the tree output equals
//! `sum_t <y, psi_t>_n psi_t(x)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, IndexSet};
use crate::error::{Error, Result};
use crate::math;
use crate::search::SearchStrategy;
use crate::split::sse_decrease;
use crate::tree::{grow, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StumpOwner {
    /// The constant feature; the tree's grand mean.
    EmptyNode,
    Node(usize),
}

/// A two-valued stump stored by its children's index sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpFeature {
    pub owner: StumpOwner,
    pub left_ids: IndexSet,
    pub right_ids: IndexSet,
    /// Values on the left and right child.
    pub values: (f64, f64),
    /// `w(t) = n(t) / n`.
    pub weight: f64,
}

impl StumpFeature {
    fn constant(n: usize) -> Self {
        StumpFeature {
            owner: StumpOwner::EmptyNode,
            left_ids: IndexSet::full(n),
            right_ids: IndexSet::empty(),
            values: (1.0, 1.0),
            weight: 1.0,
        }
    }

    /// Value at training observation `i`.
    pub fn value_at_index(&self, i: usize) -> f64 {
        match self.owner {
            StumpOwner::EmptyNode => 1.0,
            StumpOwner::Node(_) if self.left_ids.contains(i) => self.values.0,
            StumpOwner::Node(_) if self.right_ids.contains(i) => self.values.1,
            StumpOwner::Node(_) => 0.0,
        }
    }

    /// Value at an arbitrary point, routed through `tree`.
    pub fn evaluate(&self, tree: &Tree, x: &[f64]) -> Result<f64> {
        let StumpOwner::Node(id) = self.owner else { return Ok(1.0) };
        let path = tree.path(x)?;
        Ok(side_value(tree, &path, id, self.values))
    }

    /// `||psi||_n^2` computed from the stored counts.
    pub fn empirical_norm_sq(&self, n: usize) -> f64 {
        let (l, r) = self.values;
        (self.left_ids.len() as f64 * l * l + self.right_ids.len() as f64 * r * r) / n as f64
    }

    /// The feature as a length-`n` vector over the training sample.
    pub fn to_vector(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.value_at_index(i)).collect()
    }
}

fn side_value(tree: &Tree, path: &[usize], id: usize, values: (f64, f64)) -> f64 {
    match path.iter().position(|&v| v == id) {
        Some(k) if k + 1 < path.len() => {
            let (l, _) = tree.nodes[&id].children().expect("path continues past an internal node");
            if path[k + 1] == l {
                values.0
            } else {
                values.1
            }
        }
        _ => 0.0,
    }
}

/// The stump of internal node `id`.
pub fn stump(tree: &Tree, dataset: &Dataset, id: usize) -> Result<StumpFeature> {
    let node = tree.node(id)?;
    let (l, r) = node.children().ok_or(Error::NotInternal(id))?;
    let left = &tree.node(l)?.index_set;
    let right = &tree.node(r)?.index_set;
    let (nl, nr) = (left.len() as f64, right.len() as f64);
    let weight = node.count() as f64 / dataset.n() as f64;
    let denom = math::sqrt(weight * nl * nr);
    Ok(StumpFeature {
        owner: StumpOwner::Node(id),
        left_ids: left.clone(),
        right_ids: right.clone(),
        values: (nr / denom, -nl / denom),
        weight,
    })
}

/// The constant feature followed by the stumps of all internal nodes in
/// id order, with their coefficients `<y, psi_t>_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub features: Vec<StumpFeature>,
    pub coefficients: Vec<f64>,
}

impl Expansion {
    /// `sum_t <y, psi_t>_n psi_t(x)`, routing `x` once through the tree.
    pub fn evaluate(&self, tree: &Tree, x: &[f64]) -> Result<f64> {
        let path = tree.path(x)?;
        let mut acc = 0.0;
        for (f, c) in self.features.iter().zip(&self.coefficients) {
            let v = match f.owner {
                StumpOwner::EmptyNode => 1.0,
                StumpOwner::Node(id) => side_value(tree, &path, id, f.values),
            };
            acc += c * v;
        }
        Ok(acc)
    }

    /// `||y||_n^2 - sum_t <y, psi_t>_n^2`; equals the training error.
    pub fn residual_energy(&self, dataset: &Dataset) -> f64 {
        let y2 = dataset.response().iter().map(|y| y * y).sum::<f64>() / dataset.n() as f64;
        y2 - self.coefficients.iter().map(|c| c * c).sum::<f64>()
    }
}

pub fn build_expansion(tree: &Tree, dataset: &Dataset) -> Result<Expansion> {
    let n = dataset.n();
    let mut features = alloc::vec![StumpFeature::constant(n)];
    for node in tree.internal_nodes() {
        features.push(stump(tree, dataset, node.node_id)?);
    }
    let coefficients = features.iter().map(|f| inner_with_response(f, dataset)).collect();
    Ok(Expansion { features, coefficients })
}

fn inner_with_response(f: &StumpFeature, dataset: &Dataset) -> f64 {
    let n = dataset.n() as f64;
    match f.owner {
        StumpOwner::EmptyNode => dataset.response().iter().sum::<f64>() / n,
        StumpOwner::Node(_) => {
            let l: f64 = f.left_ids.iter().map(|i| dataset.y(i)).sum();
            let r: f64 = f.right_ids.iter().map(|i| dataset.y(i)).sum();
            (l * f.values.0 + r * f.values.1) / n
        }
    }
}

/// Largest `|<psi_s, psi_t>_n - delta_st|` over all feature pairs.
pub fn verify_orthonormality(expansion: &Expansion, dataset: &Dataset) -> f64 {
    let n = dataset.n();
    let vectors: Vec<Vec<f64>> = expansion.features.iter().map(|f| f.to_vector(n)).collect();
    let mut worst: f64 = 0.0;
    for (s, a) in vectors.iter().enumerate() {
        for (t, b) in vectors.iter().enumerate().skip(s) {
            let g = a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>() / n as f64;
            let target = if s == t { 1.0 } else { 0.0 };
            worst = worst.max(math::abs(g - target));
        }
    }
    worst
}

/// Worst relative gap between `<y, psi_t>_n^2` and the re-evaluated SSE
/// decrease of the split stored at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpurityIdentityCheck {
    pub max_relative_deviation: f64,
    pub worst_node: Option<usize>,
    pub nodes_checked: usize,
}

pub fn verify_impurity_identity(tree: &Tree, dataset: &Dataset) -> Result<ImpurityIdentityCheck> {
    let mut check = ImpurityIdentityCheck { max_relative_deviation: 0.0, worst_node: None, nodes_checked: 0 };
    for node in tree.internal_nodes() {
        let split = node.split.as_ref().expect("internal nodes carry a split");
        let f = stump(tree, dataset, node.node_id)?;
        let c = inner_with_response(&f, dataset);
        let delta = sse_decrease(dataset, &node.index_set, &split.direction, split.threshold)?;
        let dev = math::abs(c * c - delta) / math::abs(delta).max(f64::MIN_POSITIVE);
        check.nodes_checked += 1;
        if check.worst_node.is_none() || dev > check.max_relative_deviation {
            check.max_relative_deviation = dev;
            check.worst_node = Some(node.node_id);
        }
    }
    Ok(check)
}

/// One depth of the training-error ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionRow {
    pub depth: usize,
    pub error_previous: f64,
    pub error: f64,
    /// Sum of squared stump coefficients of nodes split at this level.
    pub stump_energy: f64,
    /// `|error - error_previous + stump_energy|`.
    pub residual: f64,
}

/// Grows `T_K` for `K = 1..=k_max` independently and checks that each
/// training-error drop equals the squared stump coefficients of the nodes
/// split at depth `K - 1`.
pub fn verify_training_recursion(
    dataset: &Dataset,
    strategy: &SearchStrategy,
    k_max: usize,
    min_node_size: usize,
) -> Result<Vec<RecursionRow>> {
    let mut rows = Vec::with_capacity(k_max);
    let mut previous = crate::tree::training_error(&grow(dataset, strategy, 0, min_node_size)?, dataset)?;
    for k in 1..=k_max {
        let tree = grow(dataset, strategy, k, min_node_size)?;
        let error = crate::tree::training_error(&tree, dataset)?;
        let mut energy = 0.0;
        for node in tree.internal_nodes().filter(|n| n.depth == k - 1) {
            let c = inner_with_response(&stump(&tree, dataset, node.node_id)?, dataset);
            energy += c * c;
        }
        rows.push(RecursionRow {
            depth: k,
            error_previous: previous,
            error,
            stump_energy: energy,
            residual: math::abs(error - previous + energy),
        });
        previous = error;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d1() -> Dataset {
        Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![0.0, 0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn d1_root_stump() {
        let ds = d1();
        let tree = grow(&ds, &SearchStrategy::axis_aligned(), 1, 1).unwrap();
        let f = stump(&tree, &ds, 0).unwrap();
        assert_eq!(f.values, (1.0, -1.0));
        assert_eq!(f.empirical_norm_sq(4), 1.0);
        let e = build_expansion(&tree, &ds).unwrap();
        assert_eq!(e.coefficients, vec![0.5, -0.5]);
        assert!(verify_orthonormality(&e, &ds) <= 1e-12);
        let imp = verify_impurity_identity(&tree, &ds).unwrap();
        assert!(imp.max_relative_deviation <= 1e-12);
        assert_eq!(imp.worst_node, Some(0));
    }

    #[test]
    fn unbalanced_stump_values() {
        // n_L = 1, n_R = 3, w = 1.
        let ds = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        let tree = grow(&ds, &SearchStrategy::axis_aligned(), 1, 1).unwrap();
        let f = stump(&tree, &ds, 0).unwrap();
        assert!((f.values.0 - 3f64.sqrt()).abs() < 1e-15);
        assert!((f.values.1 + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((f.empirical_norm_sq(4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn root_only_expansion() {
        let ds = d1();
        let tree = grow(&ds, &SearchStrategy::axis_aligned(), 0, 1).unwrap();
        let e = build_expansion(&tree, &ds).unwrap();
        assert_eq!(e.coefficients, vec![0.5]);
        assert_eq!(verify_orthonormality(&e, &ds), 0.0);
        assert_eq!(e.features[0].evaluate(&tree, &[9.0]).unwrap(), 1.0);
        assert!(matches!(stump(&tree, &ds, 0), Err(Error::NotInternal(0))));
        assert_eq!(verify_impurity_identity(&tree, &ds).unwrap().nodes_checked, 0);
    }

    #[test]
    fn d1_recursion_ledger() {
        let rows = verify_training_recursion(&d1(), &SearchStrategy::axis_aligned(), 3, 1).unwrap();
        assert_eq!(rows[0].error_previous, 0.25);
        assert_eq!(rows[0].error, 0.0);
        assert_eq!(rows[0].stump_energy, 0.25);
        assert!(rows.iter().all(|r| r.residual == 0.0));
        assert_eq!(rows[2].stump_energy, 0.0);
    }
}
