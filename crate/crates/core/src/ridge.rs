//! Sums of ridge functions `g(x) = c + sum_k h_k(gain_k * x^T a_k)` with exact
//! total variation, synthetic data generation and per-node diagnostics.
//!
//! Norms are computed for the representation as given, not minimized over
//! all equivalent representations, so they upper-bound the representation-free
//! norm. Node intervals are the empirical hull `[min, max]` of the node's
//! projected training points unless noted otherwise.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Direction, IndexSet};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::tree::Tree;

/// Univariate profile of one ridge component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `slope * z`
    Linear { slope: f64 },
    /// `scale * max(0, z - knot)`
    Relu {
        #[serde(default = "unit")]
        scale: f64,
        #[serde(default)]
        knot: f64,
    },
    /// `scale / (1 + exp(-rate * (z - center)))`
    Sigmoid {
        #[serde(default = "unit")]
        scale: f64,
        #[serde(default = "unit")]
        rate: f64,
        #[serde(default)]
        center: f64,
    },
    /// `amplitude * sin(frequency * z + phase)`
    Sine {
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default = "unit")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `c1 z + c2 z^2 + c3 z^3`
    Cubic { c1: f64, c2: f64, c3: f64 },
    /// `height * 1(z > location)`
    Step {
        #[serde(default = "unit")]
        height: f64,
        #[serde(default)]
        location: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl Shape {
    fn params(&self) -> Vec<f64> {
        match *self {
            Shape::Linear { slope } => alloc::vec![slope],
            Shape::Relu { scale, knot } => alloc::vec![scale, knot],
            Shape::Sigmoid { scale, rate, center } => alloc::vec![scale, rate, center],
            Shape::Sine { amplitude, frequency, phase } => alloc::vec![amplitude, frequency, phase],
            Shape::Cubic { c1, c2, c3 } => alloc::vec![c1, c2, c3],
            Shape::Step { height, location } => alloc::vec![height, location],
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Shape::Linear { slope } => slope * z,
            Shape::Relu { scale, knot } => scale * (z - knot).max(0.0),
            Shape::Sigmoid { scale, rate, center } => scale / (1.0 + libm::exp(-rate * (z - center))),
            Shape::Sine { amplitude, frequency, phase } => amplitude * libm::sin(frequency * z + phase),
            Shape::Cubic { c1, c2, c3 } => z * (c1 + z * (c2 + z * c3)),
            Shape::Step { height, location } => {
                if z > location {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact total variation on `[lo, hi]`, splitting at the analytic
    /// critical points and summing monotone increments.
    pub fn total_variation(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        match *self {
            Shape::Linear { slope } => math::abs(slope) * (hi - lo),
            Shape::Relu { scale, knot } => math::abs(scale) * (hi.max(knot) - lo.max(knot)),
            Shape::Sigmoid { .. } => math::abs(self.eval(hi) - self.eval(lo)),
            Shape::Sine { amplitude, frequency, phase } => {
                let (a, b) = (frequency * lo + phase, frequency * hi + phase);
                math::abs(amplitude) * sine_variation(a.min(b), a.max(b))
            }
            Shape::Cubic { c1, c2, c3 } => {
                let mut knots = alloc::vec![lo];
                for r in quadratic_roots(3.0 * c3, 2.0 * c2, c1) {
                    if r > lo && r < hi {
                        knots.push(r);
                    }
                }
                knots.push(hi);
                knots.sort_unstable_by(f64::total_cmp);
                knots.windows(2).map(|w| math::abs(self.eval(w[1]) - self.eval(w[0]))).sum()
            }
            Shape::Step { height, location } => {
                if lo <= location && location < hi {
                    math::abs(height)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Total variation of `sin` on `[a, b]`; extrema sit at `pi/2 + k pi`.
fn sine_variation(a: f64, b: f64) -> f64 {
    let first = libm::ceil((a - FRAC_PI_2) / PI);
    let last = libm::floor((b - FRAC_PI_2) / PI);
    if first > last {
        return math::abs(libm::sin(b) - libm::sin(a));
    }
    let extremum = |k: f64| if libm::fmod(k, 2.0) == 0.0 { 1.0 } else { -1.0 };
    math::abs(extremum(first) - libm::sin(a)) + 2.0 * (last - first) + math::abs(libm::sin(b) - extremum(last))
}

/// Real roots of `a z^2 + b z + c`.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { Vec::new() } else { alloc::vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + libm::copysign(math::sqrt(disc), b));
    if q == 0.0 {
        return alloc::vec![0.0];
    }
    alloc::vec![q / a, c / q]
}

/// One term `h(gain * x^T direction)` of a ridge model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent")]
pub struct RidgeComponent {
    #[serde(flatten)]
    pub shape: Shape,
    pub direction: Direction,
    /// Input scale; absorbs the norm and sign removed when the direction
    /// is canonicalized.
    pub gain: f64,
}

#[derive(Deserialize)]
struct RawComponent {
    #[serde(flatten)]
    shape: Shape,
    direction: Vec<f64>,
    #[serde(default = "unit")]
    gain: f64,
}

impl TryFrom<RawComponent> for RidgeComponent {
    type Error = Error;

    fn try_from(raw: RawComponent) -> Result<Self> {
        RidgeComponent::new(raw.shape, raw.direction).map(|c| RidgeComponent { gain: c.gain * raw.gain, ..c })
    }
}

impl RidgeComponent {
    /// `h(x^T v)` for an arbitrary nonzero `v`.
    pub fn new(shape: Shape, v: Vec<f64>) -> Result<Self> {
        if shape.params().iter().any(|c| !c.is_finite()) {
            return Err(invalid("component parameters must be finite"));
        }
        let (direction, gain) = Direction::with_scale(v)?;
        Ok(RidgeComponent { shape, direction, gain })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.shape.eval(self.gain * self.direction.dot(x))
    }

    /// Total variation of `z -> h(gain * z)` over `[lo, hi]` in projection units.
    pub fn total_variation(&self, lo: f64, hi: f64) -> Result<f64> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("interval endpoints must be finite"));
        }
        if lo > hi {
            return Err(invalid("interval must satisfy lo <= hi"));
        }
        let (a, b) = (self.gain * lo, self.gain * hi);
        Ok(self.shape.total_variation(a.min(b), a.max(b)))
    }
}

/// `total_variation(component, [lo, hi])`.
pub fn total_variation(component: &RidgeComponent, lo: f64, hi: f64) -> Result<f64> {
    component.total_variation(lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct RidgeModel {
    pub components: Vec<RidgeComponent>,
    #[serde(default)]
    pub intercept: f64,
}

#[derive(Deserialize)]
struct RawModel {
    components: Vec<RidgeComponent>,
    #[serde(default)]
    intercept: f64,
}

impl TryFrom<RawModel> for RidgeModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        RidgeModel::new(raw.components, raw.intercept)
    }
}

impl RidgeModel {
    pub fn new(components: Vec<RidgeComponent>, intercept: f64) -> Result<Self> {
        let first = components.first().ok_or_else(|| invalid("a ridge model needs at least one component"))?;
        let p = first.direction.dim();
        if let Some(c) = components.iter().find(|c| c.direction.dim() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: c.direction.dim() });
        }
        if !intercept.is_finite() {
            return Err(invalid("intercept must be finite"));
        }
        Ok(RidgeModel { components, intercept })
    }

    pub fn dim(&self) -> usize {
        self.components[0].direction.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.intercept + self.components.iter().map(|c| c.eval(x)).sum::<f64>())
    }
}

/// `intercept + sum_k h_k(x^T a_k)`.
pub fn eval_ridge(model: &RidgeModel, x: &[f64]) -> Result<f64> {
    model.eval(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTv {
    pub component: usize,
    pub interval: (f64, f64),
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub per_component: Vec<ComponentTv>,
    pub total: f64,
}

impl TvReport {
    fn from_intervals(model: &RidgeModel, intervals: impl Iterator<Item = (f64, f64)>) -> Result<Self> {
        let mut per_component = Vec::with_capacity(model.components.len());
        for (k, (c, (lo, hi))) in model.components.iter().zip(intervals).enumerate() {
            per_component.push(ComponentTv { component: k, interval: (lo, hi), tv: c.total_variation(lo, hi)? });
        }
        let total = per_component.iter().map(|c| c.tv).sum();
        Ok(TvReport { per_component, total })
    }
}

/// Sum of component total variations over the node's empirical hulls.
pub fn l1_tv_norm(model: &RidgeModel, dataset: &Dataset, node: &IndexSet) -> Result<TvReport> {
    dataset.check_node(node)?;
    if model.dim() != dataset.p() {
        return Err(Error::DimensionMismatch { expected: dataset.p(), got: model.dim() });
    }
    let hulls = model.components.iter().map(|c| {
        node.iter()
            .map(|i| dataset.dot_row(i, c.direction.coefficients()))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    });
    TvReport::from_intervals(model, hulls)
}

/// One-dimensional variant of [`l1_tv_norm`] where the node interval is the
/// cell cut out by the ancestors' thresholds, clipped to the root hull.
/// Leaf cells tile the root hull, so the leaf norms add up to the root norm.
pub fn region_tv_norm_1d(model: &RidgeModel, tree: &Tree, dataset: &Dataset, node_id: usize) -> Result<TvReport> {
    if dataset.p() != 1 || model.dim() != 1 {
        return Err(invalid("threshold cells are only tracked for p = 1"));
    }
    let target = tree.node(node_id)?;
    let probe = target.index_set.as_slice().first().copied().ok_or(Error::EmptyNode)?;
    let column = dataset.column(0);
    let mut lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut node = tree.root();
    while node.node_id != node_id {
        let (Some(split), Some((l, r))) = (&node.split, node.children()) else {
            return Err(Error::UnknownNode(node_id));
        };
        // In one dimension the canonical direction is +1.
        if tree.nodes[&l].index_set.contains(probe) {
            hi = hi.min(split.threshold);
            node = &tree.nodes[&l];
        } else {
            lo = lo.max(split.threshold);
            node = &tree.nodes[&r];
        }
    }
    TvReport::from_intervals(model, model.components.iter().map(|_| (lo, hi)))
}

/// Axis-aligned sampling box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn cube(p: usize, lo: f64, hi: f64) -> Self {
        DomainBox { lower: alloc::vec![lo; p], upper: alloc::vec![hi; p] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(invalid("box bounds must be non-empty and of equal length"));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(invalid("box bounds must be finite with lower < upper"));
            }
        }
        Ok(())
    }

    pub(crate) fn samplers(&self) -> Vec<Uniform<f64>> {
        self.lower.iter().zip(&self.upper).map(|(&lo, &hi)| Uniform::new(lo, hi)).collect()
    }
}

/// `n` uniform draws from `domain` with responses `g(x) + N(0, noise_std^2)`.
pub fn generate_dataset(model: &RidgeModel, n: usize, noise_std: f64, domain: &DomainBox, seed: u64) -> Result<Dataset> {
    domain.validate()?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(invalid("noise_std must be finite and non-negative"));
    }
    if domain.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: domain.dim() });
    }
    let p = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers = domain.samplers();
    let noise = Normal::new(0.0, noise_std).map_err(|_| invalid("invalid noise level"))?;
    let mut features = alloc::vec![0.0; n * p];
    let mut response = Vec::with_capacity(n);
    let mut x = alloc::vec![0.0; p];
    for i in 0..n {
        for (j, s) in samplers.iter().enumerate() {
            x[j] = s.sample(&mut rng);
            features[j * n + i] = x[j];
        }
        let eps = if noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        response.push(model.eval(&x)? + eps);
    }
    Dataset::from_columns(features, response, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvProfile {
    pub q: f64,
    pub leaf_ids: Vec<usize>,
    pub leaf_norms: Vec<f64>,
    /// `sum_t ||g||_{L1(t)}^q` over leaves.
    pub power_sum: f64,
}

/// Per-leaf norms and their `q`-th power sum.
pub fn node_tv_profile(model: &RidgeModel, tree: &Tree, dataset: &Dataset, q: f64) -> Result<TvProfile> {
    let mut leaf_ids = Vec::new();
    let mut leaf_norms = Vec::new();
    for leaf in tree.leaves() {
        leaf_ids.push(leaf.node_id);
        leaf_norms.push(l1_tv_norm(model, dataset, &leaf.index_set)?.total);
    }
    let power_sum = leaf_norms.iter().map(|v| libm::pow(*v, q)).sum();
    Ok(TvProfile { q, leaf_ids, leaf_norms, power_sum })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSizeProfile {
    pub max_leaf_size: usize,
    pub n: usize,
    pub depth: usize,
    /// `A` with `max_t n(t) = A n / 2^depth`.
    pub balance_constant: f64,
}

/// `2^depth * max_leaf_size / n`.
pub fn balance_constant(max_leaf_size: usize, n: usize, depth: usize) -> f64 {
    libm::ldexp(max_leaf_size as f64, depth as i32) / n as f64
}

/// Balance diagnostic for the leaves of `tree`; `depth` defaults to the
/// deepest level reached.
pub fn node_size_profile(tree: &Tree, depth: Option<usize>) -> NodeSizeProfile {
    let depth = depth.unwrap_or(tree.max_depth_reached);
    let max_leaf_size = tree.leaves().map(|l| l.count()).max().unwrap_or(0);
    NodeSizeProfile { max_leaf_size, n: tree.n, depth, balance_constant: balance_constant(max_leaf_size, tree.n, depth) }
}
