//! The SSE-decrease criterion and the single-direction threshold sweep.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::{mean_sse, project, Dataset, Direction, IndexSet};
use crate::error::{Error, Result};

/// Decreases closer than this are considered tied.
pub const DECREASE_TOLERANCE: f64 = 1e-12;

/// A hyperplane split `x^T direction <= threshold` of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub direction: Direction,
    pub threshold: f64,
    /// Normalized SSE decrease, `(SSE(t) - SSE(t_L) - SSE(t_R)) / n`.
    pub decrease: f64,
    pub left_count: usize,
    pub right_count: usize,
}

impl Split {
    /// Global preference order: larger decrease (beyond the tie tolerance),
    /// then smaller support, then lexicographically smaller direction, then
    /// smaller threshold. `Less` means `self` is preferred.
    pub fn preference(&self, other: &Split) -> Ordering {
        if self.decrease > other.decrease + DECREASE_TOLERANCE {
            return Ordering::Less;
        }
        if other.decrease > self.decrease + DECREASE_TOLERANCE {
            return Ordering::Greater;
        }
        self.direction
            .support_size()
            .cmp(&other.direction.support_size())
            .then_with(|| self.direction.lex_cmp(&other.direction))
            .then_with(|| self.threshold.total_cmp(&other.threshold))
    }

    pub fn goes_left(&self, projection: f64) -> bool {
        projection <= self.threshold
    }
}

/// Keeps whichever of `best` and `candidate` is preferred.
pub(crate) fn keep_best(best: &mut Option<Split>, candidate: Split) {
    match best {
        Some(b) if b.preference(&candidate) != Ordering::Greater => {}
        _ => *best = Some(candidate),
    }
}

/// Between-group form of the decrease: `(n_L n_R / n(t)) (mean_L - mean_R)^2 / n`.
pub(crate) fn between_decrease(n_total: usize, n_left: usize, mean_left: f64, n_right: usize, mean_right: f64) -> f64 {
    let nl = n_left as f64;
    let nr = n_right as f64;
    let diff = mean_left - mean_right;
    nl * nr / (nl + nr) * diff * diff / n_total as f64
}

/// Normalized SSE decrease of splitting `node` at `x^T direction <= threshold`.
pub fn sse_decrease(dataset: &Dataset, node: &IndexSet, direction: &Direction, threshold: f64) -> Result<f64> {
    let proj = project(dataset, node, direction)?;
    let (left, right): (Vec<_>, Vec<_>) = proj.iter().partition(|(v, _)| *v <= threshold);
    if left.is_empty() || right.is_empty() {
        return Err(Error::DegenerateSplit);
    }
    let (ml, _) = mean_sse(left.iter().map(|&&(_, i)| dataset.y(i)));
    let (mr, _) = mean_sse(right.iter().map(|&&(_, i)| dataset.y(i)));
    Ok(between_decrease(dataset.n(), left.len(), ml, right.len(), mr))
}

/// Threshold placed strictly between two consecutive distinct projections.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Best threshold along a fixed direction (every side needs at least one point).
pub fn best_threshold(dataset: &Dataset, node: &IndexSet, direction: &Direction) -> Result<Split> {
    sweep(dataset, node, direction, 1, |_, _| true)
}

/// Prefix-sum sweep over the midpoints of consecutive distinct projections.
///
/// `allow(sorted, cut)` filters cut positions; `cut` is the number of points
/// going left. Sides must hold at least `min_leaf` points. Ties keep the
/// smallest threshold.
pub(crate) fn sweep<F>(dataset: &Dataset, node: &IndexSet, direction: &Direction, min_leaf: usize, allow: F) -> Result<Split>
where
    F: Fn(&[(f64, usize)], usize) -> bool,
{
    let sorted = project(dataset, node, direction)?;
    sweep_sorted(dataset, &sorted, direction, min_leaf, allow)
}

pub(crate) fn sweep_sorted<F>(
    dataset: &Dataset,
    sorted: &[(f64, usize)],
    direction: &Direction,
    min_leaf: usize,
    allow: F,
) -> Result<Split>
where
    F: Fn(&[(f64, usize)], usize) -> bool,
{
    let m = sorted.len();
    let min_leaf = min_leaf.max(1);
    if m < 2 * min_leaf {
        return Err(Error::NoValidSplit);
    }
    // Centering keeps the prefix sums well conditioned.
    let (node_mean, _) = mean_sse(sorted.iter().map(|&(_, i)| dataset.y(i)));
    let total: f64 = sorted.iter().map(|&(_, i)| dataset.y(i) - node_mean).sum();
    let mut prefix = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for cut in 1..m {
        prefix += dataset.y(sorted[cut - 1].1) - node_mean;
        if cut < min_leaf || m - cut < min_leaf {
            continue;
        }
        if sorted[cut - 1].0 >= sorted[cut].0 || !allow(sorted, cut) {
            continue;
        }
        let ml = prefix / cut as f64;
        let mr = (total - prefix) / (m - cut) as f64;
        let dec = between_decrease(dataset.n(), cut, ml, m - cut, mr);
        match best {
            Some((_, b)) if dec <= b + DECREASE_TOLERANCE => {}
            _ => best = Some((cut, dec)),
        }
    }
    let (cut, _) = best.ok_or(Error::NoValidSplit)?;
    let threshold = midpoint(sorted[cut - 1].0, sorted[cut].0);
    // Report the decrease from two-pass side means, matching `sse_decrease`.
    let (ml, _) = mean_sse(sorted[..cut].iter().map(|&(_, i)| dataset.y(i)));
    let (mr, _) = mean_sse(sorted[cut..].iter().map(|&(_, i)| dataset.y(i)));
    Ok(Split {
        direction: direction.clone(),
        threshold,
        decrease: between_decrease(dataset.n(), cut, ml, m - cut, mr),
        left_count: cut,
        right_count: m - cut,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(xs: &[f64], ys: &[f64]) -> Dataset {
        let rows: Vec<_> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(&rows, ys.to_vec()).unwrap()
    }

    #[test]
    fn decrease_hand_values() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]);
        let e = Direction::axis(1, 0);
        let all = IndexSet::full(4);
        assert!((sse_decrease(&ds, &all, &e, 2.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((sse_decrease(&ds, &all, &e, 1.5).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(sse_decrease(&ds, &all, &e, 10.0), Err(Error::DegenerateSplit));
        let flat = line(&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]);
        assert_eq!(sse_decrease(&flat, &all, &e, 2.5).unwrap(), 0.0);
    }

    #[test]
    fn best_threshold_picks_midpoint() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]);
        let s = best_threshold(&ds, &IndexSet::full(4), &Direction::axis(1, 0)).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert!((s.decrease - 0.25).abs() < 1e-15);
        assert_eq!((s.left_count, s.right_count), (2, 2));
    }

    #[test]
    fn best_threshold_ties_take_smallest() {
        // y = [1,0,0,1]: cuts at 1.5 and 3.5 both give 1/12, 2.5 gives 0.
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 0.0, 1.0]);
        let all = IndexSet::full(4);
        let e = Direction::axis(1, 0);
        let s = best_threshold(&ds, &all, &e).unwrap();
        let brute = [1.5, 2.5, 3.5].iter().map(|&b| sse_decrease(&ds, &all, &e, b).unwrap()).fold(0.0, f64::max);
        assert!((s.decrease - brute).abs() < 1e-15);
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn identical_points_have_no_split() {
        let ds = line(&[2.0, 2.0], &[0.0, 1.0]);
        assert_eq!(best_threshold(&ds, &IndexSet::full(2), &Direction::axis(1, 0)), Err(Error::NoValidSplit));
    }

    #[test]
    fn midpoint_between_adjacent_floats_stays_left() {
        let lo = 1.0;
        let hi = f64::from_bits(f64::to_bits(lo) + 1);
        let m = midpoint(lo, hi);
        assert!(lo <= m && m < hi);
    }

    #[test]
    fn min_leaf_restricts_cuts() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0, 9.0, 9.0, 9.0, 9.0]);
        let s = sweep(&ds, &IndexSet::full(5), &Direction::axis(1, 0), 2, |_, _| true).unwrap();
        assert_eq!(s.left_count, 2);
    }
}
