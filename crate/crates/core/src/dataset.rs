//! Observation storage, node index sets and projections onto directions.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{self, dot};

/// `n` observations in `p` dimensions, stored column-major, plus a response.
///
/// Immutable once built; every entry is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    features: Vec<f64>,
    response: Vec<f64>,
    n: usize,
    p: usize,
}

#[derive(Deserialize)]
struct RawDataset {
    features: Vec<f64>,
    response: Vec<f64>,
    n: usize,
    p: usize,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;

    fn try_from(raw: RawDataset) -> Result<Self> {
        if raw.response.len() != raw.n {
            return Err(Error::DimensionMismatch { expected: raw.n, got: raw.response.len() });
        }
        Dataset::from_columns(raw.features, raw.response, raw.p)
    }
}

impl Dataset {
    /// Builds a dataset from a column-major feature buffer of length `n * p`.
    pub fn from_columns(features: Vec<f64>, response: Vec<f64>, p: usize) -> Result<Self> {
        let n = response.len();
        if n == 0 {
            return Err(invalid("dataset needs at least one observation"));
        }
        if p == 0 {
            return Err(invalid("dataset needs at least one feature"));
        }
        if features.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: features.len() });
        }
        for (k, v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: k % n, column: k / n });
            }
        }
        for (i, v) in response.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, column: p });
            }
        }
        Ok(Dataset { features, response, n, p })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        if rows.len() != response.len() {
            return Err(Error::DimensionMismatch { expected: response.len(), got: rows.len() });
        }
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut features = alloc::vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                features[j * n + i] = v;
            }
        }
        Dataset::from_columns(features, response, p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn y(&self, i: usize) -> f64 {
        self.response[i]
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.features[j * self.n + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.features[j * self.n..(j + 1) * self.n]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.x(i, j)).collect()
    }

    /// Projection of observation `i` onto `coefficients`.
    pub fn dot_row(&self, i: usize, coefficients: &[f64]) -> f64 {
        dot(coefficients, (0..self.p).map(|j| self.features[j * self.n + i]))
    }

    /// Observations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let m = indices.len();
        let mut features = Vec::with_capacity(m * self.p);
        for j in 0..self.p {
            for &i in indices {
                if i >= self.n {
                    return Err(Error::IndexOutOfRange { index: i, n: self.n });
                }
                features.push(self.x(i, j));
            }
        }
        let response = indices.iter().map(|&i| self.response[i]).collect();
        Dataset::from_columns(features, response, self.p)
    }

    pub(crate) fn check_node(&self, node: &IndexSet) -> Result<()> {
        if node.is_empty() {
            return Err(Error::EmptyNode);
        }
        match node.as_slice().last() {
            Some(&last) if last >= self.n => Err(Error::IndexOutOfRange { index: last, n: self.n }),
            _ => Ok(()),
        }
    }
}

/// Strictly increasing observation indices belonging to one node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedIndexSet);
        }
        Ok(IndexSet(indices))
    }

    /// Sorts and deduplicates arbitrary indices.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        IndexSet(indices)
    }

    /// All of `0..n`.
    pub fn full(n: usize) -> Self {
        IndexSet((0..n).collect())
    }

    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + Clone + '_ {
        self.0.iter().copied()
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        IndexSet::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

/// Unit-norm split direction whose first nonzero coefficient is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Canonicalizes `v`: scales to unit Euclidean norm and flips the sign so
    /// the first nonzero coefficient is positive.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        Self::with_scale(v).map(|(d, _)| d)
    }

    /// Like [`Direction::new`] but also returns the signed scale `s` with
    /// `v = s * direction`.
    pub fn with_scale(mut v: Vec<f64>) -> Result<(Self, f64)> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::ZeroDirection);
        }
        let first = v.iter().copied().find(|&c| c != 0.0).ok_or(Error::ZeroDirection)?;
        let norm = math::sqrt(v.iter().map(|c| c * c).sum());
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroDirection);
        }
        let sign = if first > 0.0 { 1.0 } else { -1.0 };
        // Already-unit vectors are left alone so canonicalization is idempotent.
        let rescale = math::abs(norm - 1.0) > 4.0 * f64::EPSILON;
        for c in v.iter_mut() {
            if rescale {
                *c /= norm;
            }
            *c *= sign;
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        Ok((Direction(v), sign * if rescale { norm } else { 1.0 }))
    }

    /// Standard basis vector `e_axis` in `p` dimensions.
    pub fn axis(p: usize, axis: usize) -> Self {
        let mut v = alloc::vec![0.0; p];
        v[axis] = 1.0;
        Direction(v)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&c| c != 0.0).count()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &c)| c != 0.0).map(|(j, _)| j)
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        dot(&self.0, x.iter().copied())
    }

    /// Lexicographic order on coefficients.
    pub fn lex_cmp(&self, other: &Direction) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Self {
        d.0
    }
}

/// Projects the node's points onto `direction`, returning `(value, index)`
/// pairs sorted by value with ties broken by ascending index.
pub fn project(dataset: &Dataset, node: &IndexSet, direction: &Direction) -> Result<Vec<(f64, usize)>> {
    dataset.check_node(node)?;
    if direction.dim() != dataset.p() {
        return Err(Error::DimensionMismatch { expected: dataset.p(), got: direction.dim() });
    }
    let mut out: Vec<(f64, usize)> =
        node.iter().map(|i| (dataset.dot_row(i, direction.coefficients()), i)).collect();
    out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(out)
}

/// Mean and sum of squared deviations of the response over the node,
/// computed with two passes.
pub fn node_stats(dataset: &Dataset, node: &IndexSet) -> Result<(f64, f64)> {
    dataset.check_node(node)?;
    Ok(mean_sse(node.iter().map(|i| dataset.y(i))))
}

pub(crate) fn mean_sse<I: Iterator<Item = f64> + Clone>(values: I) -> (f64, f64) {
    let mut count = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        count += 1;
    }
    if count == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / count as f64;
    let sse = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, sse)
}
