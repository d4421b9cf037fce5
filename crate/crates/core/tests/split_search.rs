mod common;

use common::{naive_decrease, random_dataset, tied_dataset};
use obtree_core::search::{search_axis_aligned, search_exhaustive_oblique};
use obtree_core::{best_threshold, node_stats, project, sse_decrease, Dataset, Direction, IndexSet, SearchStrategy};
use proptest::prelude::*;

fn direction(raw: &[f64]) -> Option<Direction> {
    Direction::new(raw.to_vec()).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_a_sorted_permutation(seed in 0u64..10_000, n in 1usize..40, p in 1usize..5, raw in prop::collection::vec(-1.0f64..1.0, 4)) {
        let ds = random_dataset(seed, n, p);
        let Some(dir) = direction(&raw[..p]) else { return Ok(()) };
        let node = IndexSet::full(n);
        let proj = project(&ds, &node, &dir).unwrap();
        let mut ids: Vec<usize> = proj.iter().map(|&(_, i)| i).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
        for w in proj.windows(2) {
            prop_assert!(w[0].0 < w[1].0 || (w[0].0 == w[1].0 && w[0].1 < w[1].1));
        }
        for &(v, i) in &proj {
            prop_assert_eq!(v, ds.dot_row(i, dir.coefficients()));
        }
    }

    #[test]
    fn node_stats_match_one_pass(seed in 0u64..10_000, n in 1usize..60) {
        let ds = random_dataset(seed, n, 2);
        let (mean, sse) = node_stats(&ds, &IndexSet::full(n)).unwrap();
        let s: f64 = ds.response().iter().sum();
        let s2: f64 = ds.response().iter().map(|y| y * y).sum();
        prop_assert!((mean - s / n as f64).abs() <= 1e-12);
        prop_assert!((sse - (s2 - s * s / n as f64)).abs() <= 1e-9 * (1.0 + s2));
        prop_assert!(sse >= 0.0);
    }

    #[test]
    fn decrease_matches_definition(seed in 0u64..10_000, n in 2usize..50, p in 1usize..4, raw in prop::collection::vec(-1.0f64..1.0, 3), cut in 0.05f64..0.95) {
        let ds = random_dataset(seed, n, p);
        let Some(dir) = direction(&raw[..p]) else { return Ok(()) };
        let node: Vec<usize> = (0..n).collect();
        let proj = project(&ds, &IndexSet::full(n), &dir).unwrap();
        let k = ((cut * (n - 1) as f64) as usize).min(n - 2);
        let b = 0.5 * (proj[k].0 + proj[k + 1].0);
        let naive = naive_decrease(&ds, &node, dir.coefficients(), b);
        match sse_decrease(&ds, &IndexSet::full(n), &dir, b) {
            Ok(d) => {
                let (_, sse) = node_stats(&ds, &IndexSet::full(n)).unwrap();
                prop_assert!(d >= 0.0);
                prop_assert!((d - naive).abs() <= 1e-10 * (sse / n as f64).max(1e-300));
            }
            Err(_) => prop_assert!(naive.is_nan()),
        }
    }

    #[test]
    fn decrease_ignores_response_shift(seed in 0u64..10_000, n in 2usize..40, shift in -1e3f64..1e3, raw in prop::collection::vec(-1.0f64..1.0, 2)) {
        let ds = random_dataset(seed, n, 2);
        let Some(dir) = direction(&raw) else { return Ok(()) };
        let shifted = Dataset::from_columns(
            (0..2).flat_map(|j| ds.column(j).to_vec()).collect(),
            ds.response().iter().map(|y| y + shift).collect(),
            2,
        ).unwrap();
        let a = best_threshold(&ds, &IndexSet::full(n), &dir);
        let b = best_threshold(&shifted, &IndexSet::full(n), &dir);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!((a.decrease - b.decrease).abs() <= 1e-9 * (1.0 + a.decrease)),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "feasibility changed under a response shift"),
        }
    }

    #[test]
    fn sweep_matches_brute_force(seed in 0u64..10_000, n in 2usize..30, tied in any::<bool>(), raw in prop::collection::vec(-1.0f64..1.0, 2)) {
        let ds = if tied { tied_dataset(seed, n, 2) } else { random_dataset(seed, n, 2) };
        let Some(dir) = direction(&raw) else { return Ok(()) };
        let node: Vec<usize> = (0..n).collect();
        let mut values: Vec<f64> = node.iter().map(|&i| ds.dot_row(i, dir.coefficients())).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let best_naive = values
            .windows(2)
            .map(|w| naive_decrease(&ds, &node, dir.coefficients(), w[0]))
            .fold(f64::NEG_INFINITY, f64::max);
        match best_threshold(&ds, &IndexSet::full(n), &dir) {
            Ok(s) => {
                prop_assert!((s.decrease - best_naive).abs() <= 1e-10 * (1.0 + best_naive.abs()));
                prop_assert_eq!(s.left_count + s.right_count, n);
                let again = sse_decrease(&ds, &IndexSet::full(n), &dir, s.threshold).unwrap();
                prop_assert!((again - s.decrease).abs() <= 1e-12);
            }
            Err(_) => prop_assert!(values.len() < 2),
        }
    }
}

fn reevaluates(ds: &Dataset, strategy: &SearchStrategy) {
    let node = IndexSet::full(ds.n());
    let s = strategy.search(ds, &node).unwrap();
    let again = sse_decrease(ds, &node, &s.direction, s.threshold).unwrap();
    assert!((again - s.decrease).abs() <= 1e-12, "{strategy:?}: {again} vs {}", s.decrease);
    assert!(s.direction.support_size() <= strategy.sparsity.max(1));
    assert!(s.decrease >= search_axis_aligned(ds, &node).unwrap().decrease - 1e-12);
}

#[test]
fn strategies_report_their_own_decrease() {
    for seed in 0..20 {
        let ds = random_dataset(seed, 30, 3);
        reevaluates(&ds, &SearchStrategy::axis_aligned());
        reevaluates(&ds, &SearchStrategy::hill_climb(2, 3, 5, seed));
        reevaluates(&ds, &SearchStrategy::random_projection(2, 30, seed));
        reevaluates(&ds, &SearchStrategy::exhaustive(2));
    }
}

#[test]
fn exhaustive_dominates_and_grows_with_sparsity() {
    for seed in 0..12 {
        let ds = random_dataset(100 + seed, 14, 3);
        let node = IndexSet::full(14);
        let d1 = search_exhaustive_oblique(&ds, &node, 1).unwrap().decrease;
        let d2 = search_exhaustive_oblique(&ds, &node, 2).unwrap().decrease;
        let d3 = search_exhaustive_oblique(&ds, &node, 3).unwrap().decrease;
        assert!(d1 <= d2 + 1e-12 && d2 <= d3 + 1e-12, "{d1} {d2} {d3}");
        assert!((d1 - search_axis_aligned(&ds, &node).unwrap().decrease).abs() <= 1e-12);
        for s in [SearchStrategy::hill_climb(2, 4, 8, seed), SearchStrategy::random_projection(2, 100, seed)] {
            assert!(s.search(&ds, &node).unwrap().decrease <= d2 + 1e-12);
        }
    }
}

/// Brute force over a fine angular grid in the plane: the exhaustive
/// oracle must never be beaten.
#[test]
fn exhaustive_beats_dense_angle_grid() {
    for seed in 0..10 {
        let ds = random_dataset(200 + seed, 12, 2);
        let node = IndexSet::full(12);
        let oracle = search_exhaustive_oblique(&ds, &node, 2).unwrap().decrease;
        let mut best = 0.0f64;
        for k in 0..3600 {
            let theta = std::f64::consts::PI * k as f64 / 3600.0;
            let dir = Direction::new(vec![theta.cos(), theta.sin()]).unwrap();
            if let Ok(s) = best_threshold(&ds, &node, &dir) {
                best = best.max(s.decrease);
            }
        }
        assert!(best <= oracle + 1e-12, "grid {best} beats oracle {oracle}");
    }
}

#[test]
fn d2_exhaustive_matches_hand_value() {
    let ds = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![0.0, 1.0, 1.0, 2.0]).unwrap();
    let node = IndexSet::full(4);
    // Singleton {(0,0)} against the rest: means 0 and 4/3.
    let hand = (1.0 / 4.0) * (1.0 * 3.0 / 4.0) * (4.0f64 / 3.0).powi(2);
    let s = search_exhaustive_oblique(&ds, &node, 2).unwrap();
    assert!((s.decrease - hand).abs() <= 1e-15);
    let rp = SearchStrategy::random_projection(2, 200, 3).search(&ds, &node).unwrap();
    assert!(rp.decrease >= 0.25 - 1e-15 && rp.decrease <= hand + 1e-15);
    let hc = SearchStrategy::hill_climb(2, 4, 10, 3).search(&ds, &node).unwrap();
    assert!(hc.decrease >= 0.25 - 1e-15 && hc.decrease <= hand + 1e-15);
}
