//! Empirical sub-optimality probability of a restricted search strategy.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, IndexSet};
use crate::error::{invalid, Result};
use crate::search::{SearchStrategy, DEFAULT_ORACLE_CAP, MAX_ORACLE_SPARSITY};
use crate::split::DECREASE_TOLERANCE;

/// Fraction of strategy runs whose decrease reaches `kappa` times the
/// unrestricted optimum on one fixed node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuboptimalityReport {
    pub kappa: f64,
    pub trials: usize,
    pub success_fraction: f64,
    pub oracle_decrease: f64,
    pub per_trial_decreases: Vec<f64>,
}

/// Runs `strategy` with seeds `seed..seed + trials` and compares each run with
/// the exhaustive oracle over all directions (sparsity `p`).
pub fn estimate_suboptimality(
    dataset: &Dataset,
    node: &IndexSet,
    strategy: &SearchStrategy,
    kappa: f64,
    trials: usize,
) -> Result<SuboptimalityReport> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(invalid("kappa must lie in (0, 1]"));
    }
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let p = dataset.p();
    if p > MAX_ORACLE_SPARSITY {
        return Err(invalid("the unrestricted oracle needs p <= 3"));
    }
    let mut oracle = SearchStrategy::exhaustive(p);
    oracle.oracle_cap = strategy.oracle_cap.max(DEFAULT_ORACLE_CAP);
    // A node the oracle cannot split has optimum zero.
    let oracle_decrease = match oracle.search(dataset, node) {
        Ok(s) => s.decrease,
        Err(crate::Error::NoValidSplit) => 0.0,
        Err(e) => return Err(e),
    };
    let mut per_trial_decreases = Vec::with_capacity(trials);
    for t in 0..trials {
        let run = strategy.with_seed(strategy.seed.wrapping_add(t as u64));
        let d = match run.search(dataset, node) {
            Ok(s) => s.decrease,
            Err(crate::Error::NoValidSplit) => 0.0,
            Err(e) => return Err(e),
        };
        per_trial_decreases.push(d);
    }
    let successes = per_trial_decreases.iter().filter(|&&d| d >= kappa * oracle_decrease - DECREASE_TOLERANCE).count();
    Ok(SuboptimalityReport {
        kappa,
        trials,
        success_fraction: successes as f64 / trials as f64,
        oracle_decrease,
        per_trial_decreases,
    })
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
    fn axis_ratio_is_three_quarters() {
        let ds = d2();
        let all = IndexSet::full(4);
        let axis = SearchStrategy::axis_aligned();
        assert_eq!(estimate_suboptimality(&ds, &all, &axis, 0.7, 3).unwrap().success_fraction, 1.0);
        assert_eq!(estimate_suboptimality(&ds, &all, &axis, 0.8, 3).unwrap().success_fraction, 0.0);
        let exact = estimate_suboptimality(&ds, &all, &SearchStrategy::exhaustive(2), 1.0, 2).unwrap();
        assert_eq!(exact.success_fraction, 1.0);
        assert!((exact.oracle_decrease - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_kappa() {
        let ds = d2();
        assert!(estimate_suboptimality(&ds, &IndexSet::full(4), &SearchStrategy::axis_aligned(), 0.0, 1).is_err());
        assert!(estimate_suboptimality(&ds, &IndexSet::full(4), &SearchStrategy::axis_aligned(), 0.5, 0).is_err());
    }
}
