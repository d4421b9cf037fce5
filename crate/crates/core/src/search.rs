//! Split search over restricted spaces of candidate directions.
//!
//! Every strategy reduces to [`best_threshold`](crate::split::best_threshold)
//! sweeps along a set of directions and keeps the preferred split under
//! [`Split::preference`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{project, Dataset, Direction, IndexSet};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::split::{keep_best, sweep, sweep_sorted, Split, DECREASE_TOLERANCE};

/// Default cap on node size for the exhaustive oracle.
pub const DEFAULT_ORACLE_CAP: usize = 64;
/// Largest sparsity the exhaustive oracle enumerates.
pub const MAX_ORACLE_SPARSITY: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    AxisAligned,
    HillClimb,
    RandomProjection,
    ExhaustiveOblique,
}

/// Candidate-direction space plus its knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStrategy {
    pub kind: StrategyKind,
    /// Maximum number of nonzero direction coefficients.
    #[serde(default = "one")]
    pub sparsity: usize,
    #[serde(default)]
    pub num_candidates: usize,
    #[serde(default = "one")]
    pub restarts: usize,
    #[serde(default)]
    pub max_iterations: usize,
    #[serde(default = "default_line_search")]
    pub line_search_iterations: usize,
    #[serde(default = "default_cap")]
    pub oracle_cap: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}
fn default_line_search() -> usize {
    32
}
fn default_cap() -> usize {
    DEFAULT_ORACLE_CAP
}

impl SearchStrategy {
    fn base(kind: StrategyKind, sparsity: usize) -> Self {
        SearchStrategy {
            kind,
            sparsity,
            num_candidates: 0,
            restarts: 1,
            max_iterations: 0,
            line_search_iterations: default_line_search(),
            oracle_cap: DEFAULT_ORACLE_CAP,
            seed: 0,
        }
    }

    pub fn axis_aligned() -> Self {
        Self::base(StrategyKind::AxisAligned, 1)
    }

    pub fn exhaustive(sparsity: usize) -> Self {
        Self::base(StrategyKind::ExhaustiveOblique, sparsity)
    }

    pub fn hill_climb(sparsity: usize, restarts: usize, max_iterations: usize, seed: u64) -> Self {
        SearchStrategy { restarts, max_iterations, seed, ..Self::base(StrategyKind::HillClimb, sparsity) }
    }

    pub fn random_projection(sparsity: usize, num_candidates: usize, seed: u64) -> Self {
        SearchStrategy { num_candidates, seed, ..Self::base(StrategyKind::RandomProjection, sparsity) }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SearchStrategy { seed, ..self.clone() }
    }

    /// True when repeated runs cannot differ regardless of seed.
    pub fn is_deterministic(&self) -> bool {
        match self.kind {
            StrategyKind::AxisAligned | StrategyKind::ExhaustiveOblique => true,
            StrategyKind::HillClimb => self.restarts <= 1 || self.max_iterations == 0,
            StrategyKind::RandomProjection => self.num_candidates == 0,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.sparsity == 0 || self.sparsity > p {
            return Err(invalid("sparsity must lie in [1, p]"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1"));
        }
        if self.kind == StrategyKind::ExhaustiveOblique && self.sparsity > MAX_ORACLE_SPARSITY {
            return Err(invalid("exhaustive search supports sparsity at most 3"));
        }
        Ok(())
    }

    /// Runs the strategy on one node.
    pub fn search(&self, dataset: &Dataset, node: &IndexSet) -> Result<Split> {
        self.search_with_min_leaf(dataset, node, 1)
    }

    /// Runs the strategy, only admitting splits with `min_leaf` points per side.
    pub fn search_with_min_leaf(&self, dataset: &Dataset, node: &IndexSet, min_leaf: usize) -> Result<Split> {
        self.validate(dataset.p())?;
        match self.kind {
            StrategyKind::AxisAligned => axis_aligned(dataset, node, min_leaf),
            StrategyKind::ExhaustiveOblique => exhaustive(dataset, node, self.sparsity, self.oracle_cap, min_leaf),
            StrategyKind::HillClimb => hill_climb(dataset, node, self, min_leaf),
            StrategyKind::RandomProjection => random_projection(dataset, node, self, min_leaf),
        }
    }
}

/// Best split over the `p` standard basis directions.
pub fn search_axis_aligned(dataset: &Dataset, node: &IndexSet) -> Result<Split> {
    axis_aligned(dataset, node, 1)
}

/// Exact maximizer of the SSE decrease over all hyperplanes with at most
/// `sparsity` nonzero coefficients. Nodes are capped at
/// [`DEFAULT_ORACLE_CAP`] points.
pub fn search_exhaustive_oblique(dataset: &Dataset, node: &IndexSet, sparsity: usize) -> Result<Split> {
    let s = SearchStrategy::exhaustive(sparsity);
    s.validate(dataset.p())?;
    exhaustive(dataset, node, sparsity, DEFAULT_ORACLE_CAP, 1)
}

/// Coordinate-wise hill climbing from the best axis split and random starts.
pub fn search_hill_climb(dataset: &Dataset, node: &IndexSet, strategy: &SearchStrategy) -> Result<Split> {
    strategy.validate(dataset.p())?;
    hill_climb(dataset, node, strategy, 1)
}

/// Best split over random sparse `{-1, +1}` directions plus the axes.
pub fn search_random_projection(dataset: &Dataset, node: &IndexSet, strategy: &SearchStrategy) -> Result<Split> {
    strategy.validate(dataset.p())?;
    random_projection(dataset, node, strategy, 1)
}

fn axis_aligned(dataset: &Dataset, node: &IndexSet, min_leaf: usize) -> Result<Split> {
    dataset.check_node(node)?;
    let mut best = None;
    for j in 0..dataset.p() {
        match sweep(dataset, node, &Direction::axis(dataset.p(), j), min_leaf, |_, _| true) {
            Ok(s) => keep_best(&mut best, s),
            Err(Error::NoValidSplit) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::NoValidSplit)
}

fn random_projection(dataset: &Dataset, node: &IndexSet, strategy: &SearchStrategy, min_leaf: usize) -> Result<Split> {
    let p = dataset.p();
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    let mut best = axis_aligned(dataset, node, min_leaf).ok();
    for _ in 0..strategy.num_candidates {
        let mut coefficients = vec![0.0; p];
        for j in sample(&mut rng, p, strategy.sparsity).into_iter() {
            coefficients[j] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let direction = Direction::new(coefficients)?;
        if let Ok(s) = sweep(dataset, node, &direction, min_leaf, |_, _| true) {
            keep_best(&mut best, s);
        }
    }
    best.ok_or(Error::NoValidSplit)
}

fn hill_climb(dataset: &Dataset, node: &IndexSet, strategy: &SearchStrategy, min_leaf: usize) -> Result<Split> {
    let p = dataset.p();
    let axis = axis_aligned(dataset, node, min_leaf);
    if strategy.max_iterations == 0 {
        return axis;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    let mut starts: Vec<Split> = axis.iter().cloned().collect();
    for _ in 1..strategy.restarts {
        let mut coefficients = vec![0.0; p];
        for j in sample(&mut rng, p, strategy.sparsity).into_iter() {
            coefficients[j] = rng.sample(StandardNormal);
        }
        let Ok(direction) = Direction::new(coefficients) else { continue };
        if let Ok(s) = sweep(dataset, node, &direction, min_leaf, |_, _| true) {
            starts.push(s);
        }
    }
    let mut best = None;
    for start in starts {
        keep_best(&mut best, climb(dataset, node, strategy, min_leaf, start));
    }
    best.ok_or(Error::NoValidSplit)
}

fn climb(dataset: &Dataset, node: &IndexSet, strategy: &SearchStrategy, min_leaf: usize, start: Split) -> Split {
    let p = dataset.p();
    let mut current = start;
    for _ in 0..strategy.max_iterations {
        let mut improved = false;
        for j in 0..p {
            let support = current.direction.support_size();
            let in_support = current.direction.coefficients()[j] != 0.0;
            if support >= strategy.sparsity && !in_support {
                continue;
            }
            if let Some(candidate) = line_search(dataset, node, strategy, min_leaf, &current.direction, j) {
                if candidate.decrease > current.decrease + DECREASE_TOLERANCE {
                    current = candidate;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    current
}

/// Golden-section search over the angle that mixes coordinate `j` into the
/// rest of the direction; returns the best split evaluated along the way.
fn line_search(
    dataset: &Dataset,
    node: &IndexSet,
    strategy: &SearchStrategy,
    min_leaf: usize,
    direction: &Direction,
    j: usize,
) -> Option<Split> {
    let mut base = direction.coefficients().to_vec();
    base[j] = 0.0;
    let norm = math::sqrt(base.iter().map(|c| c * c).sum());
    if norm == 0.0 {
        return None;
    }
    base.iter_mut().for_each(|c| *c /= norm);

    let mut best: Option<Split> = None;
    let eval = |theta: f64, best: &mut Option<Split>| -> f64 {
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        let mut v: Vec<f64> = base.iter().map(|b| c * b).collect();
        v[j] += s;
        let Ok(dir) = Direction::new(v) else { return f64::NEG_INFINITY };
        match sweep(dataset, node, &dir, min_leaf, |_, _| true) {
            Ok(split) => {
                let d = split.decrease;
                keep_best(best, split);
                d
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let ratio = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut lo, mut hi) = (-FRAC_PI_2, FRAC_PI_2);
    eval(hi, &mut best);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = eval(x1, &mut best);
    let mut f2 = eval(x2, &mut best);
    for _ in 0..strategy.line_search_iterations {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2, &mut best);
        }
    }
    best
}

/// Exhaustive enumeration of hyperplane dichotomies.
///
/// For every support of size `k <= sparsity` and every `k` node points in
/// general position within that support, the hyperplane through those points
/// is swept unperturbed, then tilted so the touched points fall in each
/// cyclic order, which realizes every assignment of the touched points to
/// the two sides. Any dichotomy achievable by a sparsity-`k` hyperplane is
/// achievable by one that touches `k` points, so this covers all of them
/// for points in general position.
fn exhaustive(dataset: &Dataset, node: &IndexSet, sparsity: usize, cap: usize, min_leaf: usize) -> Result<Split> {
    dataset.check_node(node)?;
    if node.len() > cap || sparsity > MAX_ORACLE_SPARSITY {
        return Err(Error::OracleCapExceeded { size: node.len(), cap });
    }
    let p = dataset.p();
    let mut best = axis_aligned(dataset, node, min_leaf).ok();
    let mut best_tilted = None;
    let points: Vec<usize> = node.iter().collect();
    for k in 2..=sparsity.min(p) {
        for_each_combination(p, k, &mut |support| {
            for_each_combination(points.len(), k, &mut |chosen| {
                let touched: Vec<usize> = chosen.iter().map(|&c| points[c]).collect();
                let (plain, tilted) = hyperplane_splits(dataset, node, support, &touched, min_leaf);
                if let Some(s) = plain {
                    keep_best(&mut best, s);
                }
                for s in tilted {
                    keep_best(&mut best_tilted, s);
                }
            });
        });
    }
    // Tilted planes stand in for partitions no point-defined plane realizes,
    // so they only win on a strictly larger decrease.
    match (best, best_tilted) {
        (Some(b), Some(t)) if t.decrease > b.decrease + DECREASE_TOLERANCE => Ok(t),
        (Some(b), _) => Ok(b),
        (None, t) => t.ok_or(Error::NoValidSplit),
    }
}

fn restricted(dataset: &Dataset, i: usize, support: &[usize]) -> [f64; 3] {
    let mut z = [0.0; 3];
    for (slot, &j) in z.iter_mut().zip(support) {
        *slot = dataset.x(i, j);
    }
    z
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn embed(p: usize, support: &[usize], v: [f64; 3]) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for (&j, &c) in support.iter().zip(&v) {
        out[j] = c;
    }
    out
}

/// Splits generated by the hyperplane through `touched` within `support`.
fn hyperplane_splits(
    dataset: &Dataset,
    node: &IndexSet,
    support: &[usize],
    touched: &[usize],
    min_leaf: usize,
) -> (Option<Split>, Vec<Split>) {
    let p = dataset.p();
    let k = support.len();
    let z: Vec<[f64; 3]> = touched.iter().map(|&i| restricted(dataset, i, support)).collect();
    let e1 = sub(z[1], z[0]);
    let (normal, scale) = if k == 2 {
        ([-e1[1], e1[0], 0.0], dot3(e1, e1))
    } else {
        let e2 = sub(z[2], z[0]);
        let c = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
        (c, math::sqrt(dot3(e1, e1) * dot3(e2, e2)))
    };
    let nn = math::sqrt(dot3(normal, normal));
    if scale == 0.0 || nn <= 1e-12 * scale {
        return (None, Vec::new());
    }
    let Ok(direction) = Direction::new(embed(p, support, normal)) else { return (None, Vec::new()) };
    let Ok(sorted) = project(dataset, node, &direction) else { return (None, Vec::new()) };

    let plain = sweep_sorted(dataset, &sorted, &direction, min_leaf, |_, _| true).ok();
    let mut out = Vec::new();

    // Smallest gap between distinct projections bounds how far the plane may tilt.
    let spread = sorted.last().map_or(0.0, |l| l.0) - sorted[0].0;
    let tie = 1e-9 * (spread + math::abs(sorted[0].0) + 1.0);
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .filter(|&g| g > tie)
        .fold(f64::INFINITY, f64::min);

    // The touched points are tied on the plane. A small enough tilt only
    // reorders that tied block, so tilted sweeps reuse the plain order and
    // re-sort just the block.
    let positions: Vec<usize> = sorted.iter().enumerate().filter(|(_, (_, i))| touched.contains(i)).map(|(k, _)| k).collect();
    let (mut start, mut end) = (positions[0], positions[positions.len() - 1] + 1);
    let tied_inside = sorted[start..end].windows(2).all(|w| w[1].0 - w[0].0 <= tie);
    while start > 0 && sorted[start].0 - sorted[start - 1].0 <= tie {
        start -= 1;
    }
    while end < sorted.len() && sorted[end].0 - sorted[end - 1].0 <= tie {
        end += 1;
    }

    let basis: Vec<[f64; 3]> = z[1..].iter().map(|&zj| sub(zj, z[0])).collect();
    for rotation in 0..k {
        let ranks: Vec<f64> = (0..k).map(|j| ((j + rotation) % k) as f64).collect();
        let Some(delta) = tilt(&basis, &ranks) else { continue };
        let delta_full = embed(p, support, delta);
        let (lo, hi) = node.iter().map(|i| dataset.dot_row(i, &delta_full)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        let eps = if min_gap.is_finite() { 0.25 * min_gap / range } else { 1.0 / range };
        let tilted: Vec<f64> = direction.coefficients().iter().zip(&delta_full).map(|(a, d)| a + eps * d).collect();
        let Ok(tilted) = Direction::new(tilted) else { continue };
        let split = if tied_inside {
            let mut order = sorted.clone();
            for entry in &mut order[start..end] {
                entry.0 = dataset.dot_row(entry.1, tilted.coefficients());
            }
            order[start..end].sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut left_touched = vec![0usize; end - start + 1];
            for (j, &(_, i)) in order[start..end].iter().enumerate() {
                left_touched[j + 1] = left_touched[j] + usize::from(touched.contains(&i));
            }
            let separates = |_: &[(f64, usize)], cut: usize| {
                cut > start && cut < end && (1..touched.len()).contains(&left_touched[cut - start])
            };
            sweep_sorted(dataset, &order, &tilted, min_leaf, separates)
        } else {
            let separates = |sorted: &[(f64, usize)], cut: usize| {
                let left = sorted[..cut].iter().filter(|(_, i)| touched.contains(i)).count();
                left > 0 && left < touched.len()
            };
            sweep(dataset, node, &tilted, min_leaf, separates)
        };
        if let Ok(s) = split {
            out.push(s);
        }
    }
    (plain, out)
}

/// Solves for `delta` in the span of `basis` with `delta . basis[j] = ranks[j+1] - ranks[0]`.
fn tilt(basis: &[[f64; 3]], ranks: &[f64]) -> Option<[f64; 3]> {
    match basis.len() {
        1 => {
            let b = basis[0];
            let c = (ranks[1] - ranks[0]) / dot3(b, b);
            Some([c * b[0], c * b[1], c * b[2]])
        }
        2 => {
            let (b1, b2) = (basis[0], basis[1]);
            let (g11, g12, g22) = (dot3(b1, b1), dot3(b1, b2), dot3(b2, b2));
            let det = g11 * g22 - g12 * g12;
            if det <= 1e-15 * g11 * g22 {
                return None;
            }
            let (r1, r2) = (ranks[1] - ranks[0], ranks[2] - ranks[0]);
            let c1 = (r1 * g22 - r2 * g12) / det;
            let c2 = (r2 * g11 - r1 * g12) / det;
            Some([c1 * b1[0] + c2 * b2[0], c1 * b1[1] + c2 * b2[1], c1 * b1[2] + c2 * b2[2]])
        }
        _ => None,
    }
}

/// Calls `f` with every increasing `k`-subset of `0..n`, in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d2() -> Dataset {
        Dataset::from_rows(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![0.0, 1.0, 1.0, 2.0],
        )
        .unwrap()
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, &mut |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_combination(5, 5, &mut |_| count += 1);
        assert_eq!(count, 1);
        for_each_combination(2, 3, &mut |_| panic!("k > n"));
    }

    #[test]
    fn axis_on_d2() {
        let s = search_axis_aligned(&d2(), &IndexSet::full(4)).unwrap();
        assert!((s.decrease - 0.25).abs() < 1e-15);
        // Both axes tie; (0, 1) is lexicographically smaller.
        assert_eq!(s.direction, Direction::axis(2, 1));
    }

    #[test]
    fn exhaustive_on_d2_finds_diagonal() {
        let s = search_exhaustive_oblique(&d2(), &IndexSet::full(4), 2).unwrap();
        assert!((s.decrease - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.direction, Direction::new(vec![1.0, 1.0]).unwrap());
        assert_eq!((s.left_count, s.right_count), (1, 3));
    }

    #[test]
    fn exhaustive_respects_cap() {
        let rows: Vec<_> = (0..70).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let ds = Dataset::from_rows(&rows, vec![0.0; 70]).unwrap();
        assert!(matches!(
            search_exhaustive_oblique(&ds, &IndexSet::full(70), 2),
            Err(Error::OracleCapExceeded { size: 70, cap: 64 })
        ));
        assert!(search_exhaustive_oblique(&d2(), &IndexSet::full(4), 4).is_err());
    }

    #[test]
    fn hill_climb_zero_budget_is_axis() {
        let s = SearchStrategy::hill_climb(2, 4, 0, 9);
        assert_eq!(search_hill_climb(&d2(), &IndexSet::full(4), &s).unwrap(), search_axis_aligned(&d2(), &IndexSet::full(4)).unwrap());
    }

    #[test]
    fn random_projection_without_candidates_is_axis() {
        let s = SearchStrategy::random_projection(2, 0, 1);
        assert_eq!(
            search_random_projection(&d2(), &IndexSet::full(4), &s).unwrap(),
            search_axis_aligned(&d2(), &IndexSet::full(4)).unwrap()
        );
    }

    #[test]
    fn validation() {
        assert!(SearchStrategy::exhaustive(3).validate(2).is_err());
        assert!(SearchStrategy::axis_aligned().validate(1).is_ok());
        let mut s = SearchStrategy::hill_climb(1, 1, 1, 0);
        s.restarts = 0;
        assert!(s.validate(2).is_err());
    }
}
