//! Greedy oblique regression trees.
//!
//! The crate grows depth-limited CART trees whose splits are hyperplanes
//! `x^T a <= b`, with the search over directions `a` restricted to one of
//! several candidate spaces (axis-aligned, hill climbing, sparse random
//! projections, or an exhaustive enumeration for small nodes). On top of
//! the grower it provides:
//!
//! * the orthonormal decision-stump expansion of a fitted tree and checks of
//!   the identities it satisfies ([`stumps`]),
//! * weakest-link cost-complexity pruning ([`prune`]),
//! * ridge-function models with exact total variation and synthetic data
//!   generation ([`ridge`]),
//! * the rate experiments that compare training error against the
//!   total-variation bounds ([`experiment`]).
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line
//! live in the companion `obtree` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod experiment;
mod math;
pub mod prune;
pub mod ridge;
pub mod search;
pub mod split;
pub mod stumps;
pub mod subopt;
pub mod tree;

pub use dataset::{node_stats, project, Dataset, Direction, IndexSet};
pub use error::{Error, Result};
pub use prune::{select_subtree, weakest_link_sequence, PenalizedObjective, PruneSequence, PruneStep};
pub use ridge::{RidgeComponent, RidgeModel, Shape, TvReport};
pub use search::{SearchStrategy, StrategyKind};
pub use split::{best_threshold, sse_decrease, Split};
pub use stumps::{build_expansion, stump, Expansion, StumpFeature, StumpOwner};
pub use subopt::{estimate_suboptimality, SuboptimalityReport};
pub use tree::{grow, predict, training_error, Tree, TreeNode};
