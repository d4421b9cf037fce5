mod common;

use std::collections::BTreeSet;

use common::{random_dataset, rng};
use obtree_core::prune::{alphas_non_decreasing, default_lambda_grid, holdout_lambda, link_strengths, penalized_objective};
use obtree_core::{grow, select_subtree, weakest_link_sequence, SearchStrategy, Tree};
use rand::Rng;

/// Every pruned subtree rooted at `id`, as (leaf SSE sum, leaf ids).
fn enumerate(tree: &Tree, id: usize) -> Vec<(f64, BTreeSet<usize>)> {
    let node = &tree.nodes[&id];
    let mut out = vec![(node.sse, BTreeSet::from([id]))];
    if let Some((l, r)) = node.children() {
        let left = enumerate(tree, l);
        let right = enumerate(tree, r);
        for (sl, ll) in &left {
            for (sr, lr) in &right {
                out.push((sl + sr, ll.union(lr).copied().collect()));
            }
        }
    }
    out
}

fn random_tree(seed: u64) -> Tree {
    let mut r = rng(seed);
    let p = r.gen_range(1..4);
    let n = r.gen_range(10..80);
    let ds = random_dataset(seed, n, p);
    let s = match seed % 3 {
        0 => SearchStrategy::axis_aligned(),
        1 => SearchStrategy::random_projection(p.min(2), 10, seed),
        _ => SearchStrategy::hill_climb(p.min(2), 2, 3, seed),
    };
    grow(&ds, &s, r.gen_range(1..5), r.gen_range(1..4)).unwrap()
}

#[test]
fn weakest_link_matches_brute_force() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 100 {
        seed += 1;
        let tree = random_tree(seed);
        let internal = tree.internal_nodes().count();
        if internal == 0 || internal > 12 {
            continue;
        }
        checked += 1;
        let n = tree.n as f64;
        let all = enumerate(&tree, tree.root_id);
        let seq = weakest_link_sequence(&tree);
        assert!(alphas_non_decreasing(&seq, 1e-12), "{seq:?}");
        let scale = tree.root().sse / n;
        let mut grid: Vec<f64> = (0..14).map(|k| scale * 10f64.powf(-4.0 + 4.5 * k as f64 / 13.0)).collect();
        grid.extend(seq.steps.iter().take(6).map(|s| s.critical_alpha));
        grid.resize(20, 0.0);
        for &lambda in &grid {
            let objective = |(sse, leaves): &(f64, BTreeSet<usize>)| sse / n + lambda * leaves.len() as f64;
            let min = all.iter().map(objective).fold(f64::INFINITY, f64::min);
            let (_, best_leaves) = all
                .iter()
                .filter(|c| objective(c) <= min + 1e-12)
                .min_by_key(|c| c.1.len())
                .unwrap();
            let chosen = select_subtree(&tree, lambda).unwrap();
            let value = penalized_objective(&chosen, lambda).value;
            assert!((value - min).abs() <= 1e-12, "lambda {lambda}: {value} vs {min}");
            let leaves: BTreeSet<usize> = chosen.leaves().map(|l| l.node_id).collect();
            assert_eq!(&leaves, best_leaves, "lambda {lambda}");
            assert!(chosen.is_pruned_subtree_of(&tree));
        }
    }
}

#[test]
fn sequence_ends_at_root_and_errors_grow() {
    for seed in 0..30 {
        let tree = random_tree(500 + seed);
        let seq = weakest_link_sequence(&tree);
        assert!(seq.steps.len() <= tree.internal_nodes().count());
        let trees = seq.trees(&tree).unwrap();
        assert_eq!(trees.last().unwrap().leaf_count(), 1);
        for w in trees.windows(2) {
            assert!(w[1].leaf_count() < w[0].leaf_count());
            assert!(w[1].leaf_error() >= w[0].leaf_error() - 1e-12);
        }
        // Each critical alpha is the smallest link strength of the tree it prunes.
        for (step, t) in seq.steps.iter().zip(&trees) {
            let min = link_strengths(t).iter().map(|&(_, a)| a).fold(f64::INFINITY, f64::min);
            assert_eq!(step.critical_alpha, min);
        }
    }
}

#[test]
fn zero_penalty_keeps_the_tree_and_huge_penalty_keeps_the_root() {
    for seed in 0..20 {
        let tree = random_tree(900 + seed);
        let full = select_subtree(&tree, 0.0).unwrap();
        assert!((full.leaf_error() - tree.leaf_error()).abs() <= 1e-12);
        assert_eq!(select_subtree(&tree, 1e12).unwrap().leaf_count(), 1);
    }
    assert!(select_subtree(&random_tree(1), -1.0).is_err());
    assert!(select_subtree(&random_tree(1), f64::NAN).is_err());
}

#[test]
fn holdout_selection_is_deterministic() {
    let ds = random_dataset(42, 120, 2);
    let grid = default_lambda_grid(&ds, 12);
    let s = SearchStrategy::axis_aligned();
    let a = holdout_lambda(&ds, &s, 5, &grid, 0.3, 7).unwrap();
    let b = holdout_lambda(&ds, &s, 5, &grid, 0.3, 7).unwrap();
    assert_eq!(a, b);
    assert!(grid.contains(&a.lambda_star));
    assert!(holdout_lambda(&ds, &s, 5, &grid, 0.0, 7).is_err());
}
