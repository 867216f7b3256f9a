//! Polynomial feature sets over a measurement record.
//!
//! A feature is a monomial `y(k₁)·y(k₂)···y(k_p)` with `k₁ ≤ … ≤ k_p`. A
//! [`FeatureSet`] holds every monomial of degree `0..=P`, ordered by degree
//! and then lexicographically, so the order-`P` set is always a prefix of the
//! order-`P+1` set over the same record length.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Multi-index of one monomial. Indices are zero-based and nondecreasing;
/// the empty index is the constant feature `1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureIndex(Vec<usize>);

impl FeatureIndex {
    pub fn constant() -> Self {
        Self(Vec::new())
    }

    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(format!(
                "feature indices must be nondecreasing: {indices:?}"
            )));
        }
        Ok(Self(indices))
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_constant(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn evaluate(&self, record: &[f64]) -> f64 {
        self.0.iter().map(|&k| record[k]).product()
    }

    /// Merges two monomials into their product.
    pub fn product(&self, other: &Self) -> Self {
        let mut merged = Vec::with_capacity(self.0.len() + other.0.len());
        merged.extend_from_slice(&self.0);
        merged.extend_from_slice(&other.0);
        merged.sort_unstable();
        Self(merged)
    }
}

/// `1` for the constant feature, otherwise one-based names such as `y1*y2`.
impl fmt::Display for FeatureIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "y{}", k + 1)?;
        }
        Ok(())
    }
}

impl FromStr for FeatureIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Self::constant());
        }
        let mut indices = Vec::new();
        for factor in s.split('*') {
            let k: usize = factor
                .trim()
                .strip_prefix('y')
                .and_then(|n| n.parse().ok())
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Parse(format!("bad feature name {s:?}")))?;
            indices.push(k - 1);
        }
        indices.sort_unstable();
        Ok(Self(indices))
    }
}

/// All monomials of degree at most `max_order` over a record of length
/// `record_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    record_len: usize,
    max_order: usize,
    indices: Vec<FeatureIndex>,
}

impl FeatureSet {
    /// Enumerates the feature set: constant first, then ascending degree,
    /// lexicographic within each degree.
    pub fn enumerate(record_len: usize, max_order: usize) -> Result<Self> {
        if record_len == 0 {
            return Err(Error::InvalidArgument("record length must be at least 1".into()));
        }
        let mut indices = Vec::with_capacity(feature_count(record_len, max_order));
        let mut current = Vec::with_capacity(max_order);
        for degree in 0..=max_order {
            push_multisets(record_len, degree, 0, &mut current, &mut indices);
        }
        Ok(Self {
            record_len,
            max_order,
            indices,
        })
    }

    pub fn record_len(&self) -> usize {
        self.record_len
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[FeatureIndex] {
        &self.indices
    }

    pub fn position(&self, index: &FeatureIndex) -> Option<usize> {
        self.indices.iter().position(|f| f == index)
    }

    /// Evaluates every feature on `record`; the constant feature gives 1.
    pub fn evaluate(&self, record: &[f64]) -> Result<DVector<f64>> {
        self.check_record(record)?;
        Ok(DVector::from_iterator(
            self.indices.len(),
            self.indices.iter().map(|f| f.evaluate(record)),
        ))
    }

    /// Same as [`evaluate`](Self::evaluate) without the leading constant.
    pub fn evaluate_nonconstant(&self, record: &[f64]) -> Result<DVector<f64>> {
        self.check_record(record)?;
        Ok(DVector::from_iterator(
            self.indices.len() - 1,
            self.indices[1..].iter().map(|f| f.evaluate(record)),
        ))
    }

    fn check_record(&self, record: &[f64]) -> Result<()> {
        if record.len() != self.record_len {
            return Err(Error::InvalidArgument(format!(
                "record has length {}, feature set expects {}",
                record.len(),
                self.record_len
            )));
        }
        Ok(())
    }
}

fn push_multisets(
    k: usize,
    remaining: usize,
    start: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<FeatureIndex>,
) {
    if remaining == 0 {
        out.push(FeatureIndex(current.clone()));
        return;
    }
    for i in start..k {
        current.push(i);
        push_multisets(k, remaining - 1, i, current, out);
        current.pop();
    }
}

/// `Σ_{p=0..P} C(K+p-1, p)`.
pub fn feature_count(record_len: usize, max_order: usize) -> usize {
    let mut total = 0usize;
    // C(K+p-1, p) built incrementally: C(K+p, p+1) = C(K+p-1, p) (K+p) / (p+1)
    let mut term = 1usize;
    for p in 0..=max_order {
        total += term;
        term = term * (record_len + p) / (p + 1);
    }
    total
}
