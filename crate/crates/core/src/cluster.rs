//! Agglomerative clustering of model instances and partition scoring.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::tda::{betti_distance, BettiCurve, TdaError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 items to cluster, got {0}")]
    TooFewItems(usize),
    #[error("dissimilarity between {0} and {1} is not a finite non-negative number")]
    InvalidDistance(usize, usize),
    #[error("condensed matrix of length {0} does not describe a square matrix")]
    BadCondensedLength(usize),
    #[error("cut into {k} clusters is impossible with {n} items")]
    BadClusterCount { k: usize, n: usize },
    #[error("{labels} labels for {n} items")]
    LabelCount { labels: usize, n: usize },
    #[error(transparent)]
    Curve(#[from] TdaError),
}

/// Symmetric dissimilarity with zero diagonal, stored as its strict upper
/// triangle in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dissimilarity<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Scalar> Dissimilarity<T> {
    pub fn from_condensed(values: Vec<T>) -> Result<Self, ClusterError> {
        let len = values.len();
        let n = (1..).find(|&n: &usize| n * (n - 1) / 2 >= len).expect("unbounded search");
        if n * (n - 1) / 2 != len {
            return Err(ClusterError::BadCondensedLength(len));
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let values = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn condensed(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i == j {
            return T::zero();
        }
        let (a, b) = (i.min(j), i.max(j));
        self.values[self.n * a - a * (a + 1) / 2 + b - a - 1]
    }

    /// Rows of the full square matrix.
    pub fn to_square(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }
}

/// Which quantity compares two models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Betti0,
    Betti1,
    Accuracy,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Betti0, Measure::Betti1, Measure::Accuracy];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Betti0 => "betti0",
            Measure::Betti1 => "betti1",
            Measure::Accuracy => "accuracy",
        }
    }
}

/// What clustering needs to know about one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelProfile<T> {
    pub accuracy: T,
    pub betti0: BettiCurve<T>,
    pub betti1: BettiCurve<T>,
}

/// Betti distance between every pair of curves.
pub fn curve_distances<T: Scalar>(curves: &[&BettiCurve<T>]) -> Result<Dissimilarity<T>, ClusterError> {
    if curves.len() < 2 {
        return Err(ClusterError::TooFewItems(curves.len()));
    }
    let mut values = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            values.push(betti_distance(curves[i], curves[j])?);
        }
    }
    Ok(Dissimilarity { n: curves.len(), values })
}

/// `|acc_i − acc_j|` for every pair.
pub fn accuracy_distances<T: Scalar>(accuracies: &[T]) -> Result<Dissimilarity<T>, ClusterError> {
    if accuracies.len() < 2 {
        return Err(ClusterError::TooFewItems(accuracies.len()));
    }
    Ok(Dissimilarity::from_fn(accuracies.len(), |i, j| (accuracies[i] - accuracies[j]).abs()))
}

pub fn pairwise_distances<T: Scalar>(
    items: &[ModelProfile<T>],
    measure: Measure,
) -> Result<Dissimilarity<T>, ClusterError> {
    match measure {
        Measure::Betti0 => curve_distances(&items.iter().map(|m| &m.betti0).collect::<Vec<_>>()),
        Measure::Betti1 => curve_distances(&items.iter().map(|m| &m.betti1).collect::<Vec<_>>()),
        Measure::Accuracy => accuracy_distances(&items.iter().map(|m| m.accuracy).collect::<Vec<_>>()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

/// One merge row: clusters `a < b` (ids `< N` are items, id `N + k` is
/// the cluster formed by merge `k`) joined at `height` into `size` items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Merge<T> {
    pub a: usize,
    pub b: usize,
    pub height: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dendrogram<T> {
    /// Group tag per item (0 vanilla, 1 dropout, 2 batchnorm); may be empty.
    pub labels: Vec<usize>,
    pub merges: Vec<Merge<T>>,
    pub linkage: Linkage,
}

impl<T: Scalar> Dendrogram<T> {
    pub fn item_count(&self) -> usize {
        self.merges.len() + 1
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, ClusterError> {
        if labels.len() != self.item_count() {
            return Err(ClusterError::LabelCount { labels: labels.len(), n: self.item_count() });
        }
        self.labels = labels;
        Ok(self)
    }
}

fn linkage_height<T: Scalar>(d: &Dissimilarity<T>, a: &[usize], b: &[usize], linkage: Linkage) -> T {
    let pairs = a.iter().flat_map(|&x| b.iter().map(move |&y| d.get(x, y)));
    match linkage {
        Linkage::Average => pairs.fold(T::zero(), |acc, v| acc + v) / T::from_usize_lossy(a.len() * b.len()),
        Linkage::Single => pairs.fold(T::infinity(), |acc, v| acc.min(v)),
        Linkage::Complete => pairs.fold(T::neg_infinity(), |acc, v| acc.max(v)),
    }
}

/// Agglomerative clustering. Each step joins the pair of active clusters
/// with the smallest linkage, recomputed from the original dissimilarities
/// with members in ascending order; ties go to the smallest `(a, b)` ids.
pub fn agglomerate<T: Scalar>(d: &Dissimilarity<T>, linkage: Linkage) -> Result<Dendrogram<T>, ClusterError> {
    let n = d.len();
    if n < 2 {
        return Err(ClusterError::TooFewItems(n));
    }
    for i in 0..n {
        for j in i + 1..n {
            let v = d.get(i, j);
            if !v.is_finite() || v < T::zero() {
                return Err(ClusterError::InvalidDistance(i, j));
            }
        }
    }
    // active clusters keyed by id, members kept sorted
    let mut active: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let ids: Vec<usize> = active.keys().copied().collect();
        let mut best: Option<(T, usize, usize)> = None;
        for (p, &a) in ids.iter().enumerate() {
            for &b in &ids[p + 1..] {
                let h = linkage_height(d, &active[&a], &active[&b], linkage);
                if best.is_none_or(|(bh, _, _)| h < bh) {
                    best = Some((h, a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two active clusters");
        let mut members = active.remove(&a).unwrap();
        members.extend(active.remove(&b).unwrap());
        members.sort_unstable();
        merges.push(Merge { a, b, height, size: members.len() });
        active.insert(n + step, members);
    }
    Ok(Dendrogram { labels: Vec::new(), merges, linkage })
}

/// Flat assignment into `k` clusters by replaying the first `N − k` merges.
/// Cluster numbers follow the first appearance in item order.
pub fn cut<T: Scalar>(dend: &Dendrogram<T>, k: usize) -> Result<Vec<usize>, ClusterError> {
    let n = dend.item_count();
    if k == 0 || k > n {
        return Err(ClusterError::BadClusterCount { k, n });
    }
    let mut uf = UnionFind::<usize>::new(2 * n - 1);
    for (step, m) in dend.merges.iter().take(n - k).enumerate() {
        uf.union(m.a, n + step);
        uf.union(m.b, n + step);
    }
    let mut numbering = BTreeMap::new();
    Ok((0..n)
        .map(|i| {
            let root = uf.find(i);
            let next = numbering.len();
            *numbering.entry(root).or_insert(next)
        })
        .collect())
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two partitions of the same items.
/// Two partitions that are both trivial in the same way score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions of different item sets");
    let n = a.len() as u64;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n).max(1.0);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Cuts into `k` clusters and scores the cut against `true_labels`.
pub fn cut_and_score<T: Scalar>(
    dend: &Dendrogram<T>,
    k: usize,
    true_labels: &[usize],
) -> Result<(Vec<usize>, f64), ClusterError> {
    if true_labels.len() != dend.item_count() {
        return Err(ClusterError::LabelCount { labels: true_labels.len(), n: dend.item_count() });
    }
    let assignment = cut(dend, k)?;
    let ari = adjusted_rand_index(&assignment, true_labels);
    Ok((assignment, ari))
}
