#![allow(dead_code)]

use obtree_core::{Dataset, SearchStrategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-ish features with a nonlinear response plus noise.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|x| {
            let s: f64 = x.iter().enumerate().map(|(j, v)| (j as f64 + 1.0) * v).sum();
            s.sin() + 0.5 * x[0] * x[0] + r.gen_range(-0.3..0.3)
        })
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}

/// Same as [`random_dataset`] but with features on a coarse integer grid,
/// so ties in projections are common.
pub fn tied_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.gen_range(0..4) as f64).collect()).collect();
    let y = rows.iter().map(|_| r.gen_range(0..3) as f64).collect();
    Dataset::from_rows(&rows, y).unwrap()
}

pub fn strategies(p: usize, seed: u64) -> Vec<SearchStrategy> {
    let d = p.min(2);
    let mut out = vec![
        SearchStrategy::axis_aligned(),
        SearchStrategy::hill_climb(d, 3, 4, seed),
        SearchStrategy::random_projection(d, 20, seed),
    ];
    if p <= 3 {
        out.push(SearchStrategy::exhaustive(p.min(2)));
    }
    out
}

/// Naive `(1/n)[SSE(t) - SSE(t_L) - SSE(t_R)]` straight from the definition.
pub fn naive_decrease(ds: &Dataset, node: &[usize], coef: &[f64], threshold: f64) -> f64 {
    let sse = |idx: &[usize]| {
        let m = idx.iter().map(|&i| ds.y(i)).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (ds.y(i) - m).powi(2)).sum::<f64>()
    };
    let proj = |i: usize| (0..ds.p()).map(|j| coef[j] * ds.x(i, j)).sum::<f64>();
    let (l, r): (Vec<usize>, Vec<usize>) = node.iter().partition(|&&i| proj(i) <= threshold);
    if l.is_empty() || r.is_empty() {
        return f64::NAN;
    }
    (sse(node) - sse(&l) - sse(&r)) / ds.n() as f64
}
