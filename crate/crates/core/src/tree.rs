//! Breadth-first greedy tree growth, routing and training error.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{node_stats, Dataset, IndexSet};
use crate::error::{invalid, Error, Result};
use crate::math::mix_seed;
use crate::search::SearchStrategy;
use crate::split::{Split, DECREASE_TOLERANCE};

/// Responses spanning less than this are treated as pure.
pub const PURITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub node_id: usize,
    pub index_set: IndexSet,
    pub mean: f64,
    pub sse: f64,
    pub split: Option<Split>,
    pub left_child: Option<usize>,
    pub right_child: Option<usize>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn count(&self) -> usize {
        self.index_set.len()
    }

    pub fn children(&self) -> Option<(usize, usize)> {
        self.left_child.zip(self.right_child)
    }
}

/// A binary tree keyed by node id. Pruning keeps the surviving ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: BTreeMap<usize, TreeNode>,
    pub root_id: usize,
    pub max_depth_reached: usize,
    pub strategy: SearchStrategy,
    /// Training sample size.
    pub n: usize,
    /// Feature dimension.
    pub p: usize,
}

impl Tree {
    /// Root-only tree over the whole dataset.
    pub fn root_only(dataset: &Dataset, strategy: SearchStrategy) -> Tree {
        let index_set = IndexSet::full(dataset.n());
        let (mean, sse) = node_stats(dataset, &index_set).expect("datasets are non-empty");
        let root = TreeNode { node_id: 0, index_set, mean, sse, split: None, left_child: None, right_child: None, depth: 0 };
        let mut nodes = BTreeMap::new();
        nodes.insert(0, root);
        Tree { nodes, root_id: 0, max_depth_reached: 0, strategy, n: dataset.n(), p: dataset.p() }
    }

    pub fn node(&self, id: usize) -> Result<&TreeNode> {
        self.nodes.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[&self.root_id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values().filter(|n| n.is_leaf())
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.values().filter(|n| !n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn next_id(&self) -> usize {
        self.nodes.keys().next_back().map_or(0, |k| k + 1)
    }

    /// Splits leaf `id` with `split`, creating two children.
    pub fn split_node(&mut self, dataset: &Dataset, id: usize, split: Split) -> Result<(usize, usize)> {
        let node = self.node(id)?;
        if !node.is_leaf() {
            return Err(invalid("node is already split"));
        }
        if split.direction.dim() != dataset.p() {
            return Err(Error::DimensionMismatch { expected: dataset.p(), got: split.direction.dim() });
        }
        let depth = node.depth + 1;
        let (left, right): (Vec<usize>, Vec<usize>) =
            node.index_set.iter().partition(|&i| split.goes_left(dataset.dot_row(i, split.direction.coefficients())));
        if left.is_empty() || right.is_empty() {
            return Err(Error::DegenerateSplit);
        }
        let left = IndexSet::new(left)?;
        let right = IndexSet::new(right)?;
        let left_id = self.next_id();
        let right_id = left_id + 1;
        for (child_id, set) in [(left_id, left), (right_id, right)] {
            let (mean, sse) = node_stats(dataset, &set)?;
            self.nodes.insert(
                child_id,
                TreeNode { node_id: child_id, index_set: set, mean, sse, split: None, left_child: None, right_child: None, depth },
            );
        }
        let node = self.nodes.get_mut(&id).expect("checked above");
        node.split = Some(split);
        node.left_child = Some(left_id);
        node.right_child = Some(right_id);
        self.max_depth_reached = self.max_depth_reached.max(depth);
        Ok((left_id, right_id))
    }

    /// Turns `id` into a leaf, dropping its descendants.
    pub fn collapse(&mut self, id: usize) -> Result<()> {
        let node = self.nodes.get_mut(&id).ok_or(Error::UnknownNode(id))?;
        let mut stack: Vec<usize> = node.children().map(|(l, r)| alloc::vec![l, r]).unwrap_or_default();
        node.split = None;
        node.left_child = None;
        node.right_child = None;
        while let Some(c) = stack.pop() {
            if let Some(child) = self.nodes.remove(&c) {
                if let Some((l, r)) = child.children() {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        self.max_depth_reached = self.nodes.values().map(|n| n.depth).max().unwrap_or(0);
        Ok(())
    }

    /// The tree with every node deeper than `depth` removed.
    pub fn truncated(&self, depth: usize) -> Tree {
        let mut out = self.clone();
        let cut: Vec<usize> = out.nodes.values().filter(|n| n.depth == depth && !n.is_leaf()).map(|n| n.node_id).collect();
        for id in cut {
            out.collapse(id).expect("id taken from the tree");
        }
        out
    }

    /// Leaf reached by `x`, with `<=` routed left.
    pub fn route(&self, x: &[f64]) -> Result<&TreeNode> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: x.len() });
        }
        let mut node = self.root();
        while let (Some(split), Some((l, r))) = (&node.split, node.children()) {
            node = &self.nodes[if split.goes_left(split.direction.dot(x)) { &l } else { &r }];
        }
        Ok(node)
    }

    /// Node ids on the root-to-leaf path of `x`.
    pub fn path(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: x.len() });
        }
        let mut node = self.root();
        let mut out = alloc::vec![node.node_id];
        while let (Some(split), Some((l, r))) = (&node.split, node.children()) {
            node = &self.nodes[if split.goes_left(split.direction.dot(x)) { &l } else { &r }];
            out.push(node.node_id);
        }
        Ok(out)
    }

    /// `(1/n) * sum of leaf SSEs`.
    pub fn leaf_error(&self) -> f64 {
        self.leaves().map(|l| l.sse).sum::<f64>() / self.n as f64
    }

    /// True if `self` can be obtained from `other` by collapsing internal nodes.
    pub fn is_pruned_subtree_of(&self, other: &Tree) -> bool {
        self.root_id == other.root_id
            && self.nodes.values().all(|n| match other.nodes.get(&n.node_id) {
                Some(o) => o.index_set == n.index_set && (n.is_leaf() || o.split == n.split),
                None => false,
            })
    }
}

/// Grows a depth-limited greedy tree level by level.
///
/// A node is split when it is shallower than `max_depth`, holds at least
/// `2 * min_node_size` points with non-constant responses, and the strategy
/// finds a split with decrease above the tie tolerance leaving
/// `min_node_size` points per side. Within a level nodes are visited by id,
/// and each node's search is seeded from the strategy seed and the node id.
pub fn grow(dataset: &Dataset, strategy: &SearchStrategy, max_depth: usize, min_node_size: usize) -> Result<Tree> {
    if min_node_size == 0 {
        return Err(invalid("min_node_size must be at least 1"));
    }
    strategy.validate(dataset.p())?;
    let mut tree = Tree::root_only(dataset, strategy.clone());
    let mut frontier = alloc::vec![tree.root_id];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for id in frontier {
            let node = &tree.nodes[&id];
            if node.count() < 2 * min_node_size || is_pure(dataset, &node.index_set) {
                continue;
            }
            let node_strategy = strategy.with_seed(mix_seed(strategy.seed, id as u64 + 1));
            let split = match node_strategy.search_with_min_leaf(dataset, &node.index_set, min_node_size) {
                Ok(s) => s,
                Err(Error::NoValidSplit | Error::OracleCapExceeded { .. }) => continue,
                Err(e) => return Err(e),
            };
            if split.decrease <= DECREASE_TOLERANCE {
                continue;
            }
            let (l, r) = tree.split_node(dataset, id, split)?;
            next.push(l);
            next.push(r);
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(tree)
}

fn is_pure(dataset: &Dataset, node: &IndexSet) -> bool {
    let (lo, hi) = node
        .iter()
        .map(|i| dataset.y(i))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    hi - lo <= PURITY_TOLERANCE
}

/// Mean of the leaf that `x` routes to.
pub fn predict(tree: &Tree, x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("prediction input must be finite"));
    }
    tree.route(x).map(|leaf| leaf.mean)
}

/// Mean squared residual of the tree's predictions over `dataset`.
pub fn training_error(tree: &Tree, dataset: &Dataset) -> Result<f64> {
    let mut row = alloc::vec![0.0; dataset.p()];
    let mut acc = 0.0;
    for i in 0..dataset.n() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = dataset.x(i, j);
        }
        let r = dataset.y(i) - predict(tree, &row)?;
        acc += r * r;
    }
    Ok(acc / dataset.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d1() -> Dataset {
        Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![0.0, 0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn depth_one_on_d1() {
        let tree = grow(&d1(), &SearchStrategy::axis_aligned(), 1, 1).unwrap();
        let root = tree.root();
        assert_eq!(root.split.as_ref().unwrap().threshold, 2.5);
        let means: Vec<f64> = tree.leaves().map(|l| l.mean).collect();
        assert_eq!(means, vec![0.0, 1.0]);
        assert_eq!(predict(&tree, &[1.7]).unwrap(), 0.0);
        assert_eq!(predict(&tree, &[2.5]).unwrap(), 0.0);
        assert_eq!(predict(&tree, &[2.6]).unwrap(), 1.0);
        assert_eq!(training_error(&tree, &d1()).unwrap(), 0.0);
    }

    #[test]
    fn depth_zero_and_constant() {
        let tree = grow(&d1(), &SearchStrategy::axis_aligned(), 0, 1).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(predict(&tree, &[100.0]).unwrap(), 0.5);
        assert_eq!(training_error(&tree, &d1()).unwrap(), 0.25);
        let flat = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![2.0; 3]).unwrap();
        assert_eq!(grow(&flat, &SearchStrategy::axis_aligned(), 5, 1).unwrap().nodes.len(), 1);
    }

    #[test]
    fn predict_checks_dimension() {
        let tree = grow(&d1(), &SearchStrategy::axis_aligned(), 1, 1).unwrap();
        assert_eq!(predict(&tree, &[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn min_node_size_blocks_small_splits() {
        let tree = grow(&d1(), &SearchStrategy::axis_aligned(), 3, 3).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(grow(&d1(), &SearchStrategy::axis_aligned(), 3, 0).is_err());
    }

    #[test]
    fn collapse_and_truncate() {
        let ds = Dataset::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0], vec![6.0]],
            vec![0.0, 1.0, 5.0, 6.0, 20.0, 21.0],
        )
        .unwrap();
        let tree = grow(&ds, &SearchStrategy::axis_aligned(), 3, 1).unwrap();
        let t1 = tree.truncated(1);
        assert_eq!(t1, grow(&ds, &SearchStrategy::axis_aligned(), 1, 1).unwrap());
        assert!(t1.is_pruned_subtree_of(&tree));
        let mut root = tree.clone();
        root.collapse(0).unwrap();
        assert_eq!(root.nodes.len(), 1);
        assert_eq!(root.max_depth_reached, 0);
    }
}
