//! Binarization of a connectivity matrix into a functional network.
//!
//! Edges of the complete weighted graph are ranked by
//! `(weight desc, smaller node asc, larger node asc)`. The maximum spanning
//! tree is built greedily over that ranking with a union-find, and the
//! strongest remaining edges are added until the target edge count
//! `round(d·n(n−1)/2)` is met. Every non-tree edge whose weight equals the
//! cutoff weight is kept, so a tie group straddling the cutoff can push the
//! achieved density above the target.

use std::cmp::Ordering;

use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::connectivity::ConnectivityMatrix;
use crate::graph::{Graph, GraphError};
use crate::scalar::Scalar;

/// Slack allowed below `2/n` so that a caller passing exactly `2.0 / n` is accepted.
const DENSITY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetbuildError {
    #[error("need at least 2 neurons to binarize, got {0}")]
    TooFewNodes(usize),
    #[error("density {density} is below the spanning-tree density 2/n = {min}")]
    DensityTooLow { density: f64, min: f64 },
    #[error("density {0} is outside (0, 1]")]
    DensityOutOfRange(f64),
    #[error("densities must be sorted ascending ({prev} before {next})")]
    UnsortedDensities { prev: f64, next: f64 },
    #[error("network is not connected")]
    Disconnected,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Binary undirected graph over hidden neurons with an MST backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalNetwork {
    graph: Graph,
    target_density: f64,
    target_edges: usize,
}

impl FunctionalNetwork {
    /// Wraps a graph read back from disk. The graph must be connected.
    pub fn from_graph(graph: Graph, target_density: f64) -> Result<Self, NetbuildError> {
        let n = graph.node_count();
        if n < 2 {
            return Err(NetbuildError::TooFewNodes(n));
        }
        if !graph.is_connected() {
            return Err(NetbuildError::Disconnected);
        }
        let target_edges = target_edge_count(n, target_density);
        Ok(Self { graph, target_density, target_edges })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn into_graph(self) -> Graph {
        self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn target_density(&self) -> f64 {
        self.target_density
    }

    /// `round(d·n(n−1)/2)`, clamped below at `n − 1`.
    pub fn target_edges(&self) -> usize {
        self.target_edges
    }

    pub fn achieved_density(&self) -> f64 {
        let n = self.graph.node_count() as f64;
        2.0 * self.graph.edge_count() as f64 / (n * (n - 1.0))
    }

    /// Edges admitted beyond the target because they tie with the cutoff weight.
    pub fn tie_excess(&self) -> usize {
        self.graph.edge_count().saturating_sub(self.target_edges)
    }
}

fn target_edge_count(n: usize, density: f64) -> usize {
    let pairs = (n * (n - 1) / 2) as f64;
    ((density * pairs).round() as usize).max(n - 1)
}

fn cmp_weight_desc<T: Scalar>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).expect("connectivity weights are finite")
}

/// All `i < j` pairs ordered by `(weight desc, i asc, j asc)`.
fn ranked_edges<T: Scalar>(f: &ConnectivityMatrix<T>) -> Vec<(usize, usize, T)> {
    let mut edges: Vec<_> = f.upper_edges().collect();
    edges.sort_by(|a, b| cmp_weight_desc(a.2, b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    edges
}

/// Splits ranked edges into (tree edges, non-tree edges), both still ranked.
fn split_tree<T: Scalar>(n: usize, ranked: Vec<(usize, usize, T)>) -> (Vec<(usize, usize, T)>, Vec<(usize, usize, T)>) {
    let mut uf = UnionFind::<usize>::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    let mut rest = Vec::with_capacity(ranked.len().saturating_sub(n));
    for e in ranked {
        if tree.len() + 1 < n && uf.union(e.0, e.1) {
            tree.push(e);
        } else {
            rest.push(e);
        }
    }
    (tree, rest)
}

/// Maximum-weight spanning tree of the complete graph on `f`.
///
/// Returns `n − 1` edges in canonical `(lo, hi)` sorted order.
pub fn maximum_spanning_tree<T: Scalar>(f: &ConnectivityMatrix<T>) -> Vec<(usize, usize)> {
    let (tree, _) = split_tree(f.n(), ranked_edges(f));
    let mut edges: Vec<_> = tree.into_iter().map(|(a, b, _)| (a, b)).collect();
    edges.sort_unstable();
    edges
}

/// Sum of `f` over an edge list.
pub fn total_weight<T: Scalar>(f: &ConnectivityMatrix<T>, edges: &[(usize, usize)]) -> T {
    edges.iter().map(|&(a, b)| f.weight(a, b)).sum()
}

fn check_density(n: usize, density: f64) -> Result<(), NetbuildError> {
    if n < 2 {
        return Err(NetbuildError::TooFewNodes(n));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(NetbuildError::DensityOutOfRange(density));
    }
    let min = 2.0 / n as f64;
    if density < min - DENSITY_SLACK {
        return Err(NetbuildError::DensityTooLow { density, min });
    }
    Ok(())
}

struct Backbone {
    n: usize,
    tree: Vec<(usize, usize)>,
    rest: Vec<(usize, usize, f64)>,
}

impl Backbone {
    fn new<T: Scalar>(f: &ConnectivityMatrix<T>) -> Self {
        let (tree, rest) = split_tree(f.n(), ranked_edges(f));
        Self {
            n: f.n(),
            tree: tree.into_iter().map(|(a, b, _)| (a, b)).collect(),
            rest: rest.into_iter().map(|(a, b, w)| (a, b, w.as_f64())).collect(),
        }
    }

    fn network(&self, density: f64) -> FunctionalNetwork {
        let target_edges = target_edge_count(self.n, density);
        let extra = target_edges - (self.n - 1);
        let take = if extra == 0 {
            0
        } else {
            let cutoff = self.rest[extra - 1].2;
            extra + self.rest[extra..].iter().take_while(|e| e.2 >= cutoff).count()
        };
        let edges = self.tree.iter().copied().chain(self.rest[..take].iter().map(|&(a, b, _)| (a, b)));
        let graph = Graph::from_edges(self.n, edges).expect("ranked edges are distinct pairs");
        FunctionalNetwork { graph, target_density: density, target_edges }
    }
}

/// MST plus every non-tree edge at least as strong as the cutoff weight
/// selected by the target edge count for density `density`.
pub fn binarize_to_density<T: Scalar>(
    f: &ConnectivityMatrix<T>,
    density: f64,
) -> Result<FunctionalNetwork, NetbuildError> {
    check_density(f.n(), density)?;
    Ok(Backbone::new(f).network(density))
}

/// Binarizes at each density of an ascending list. Networks are nested.
pub fn density_sweep<T: Scalar>(
    f: &ConnectivityMatrix<T>,
    densities: &[f64],
) -> Result<Vec<FunctionalNetwork>, NetbuildError> {
    for &d in densities {
        check_density(f.n(), d)?;
    }
    if let Some(w) = densities.windows(2).find(|w| w[1] < w[0]) {
        return Err(NetbuildError::UnsortedDensities { prev: w[0], next: w[1] });
    }
    let backbone = Backbone::new(f);
    Ok(densities.iter().map(|&d| backbone.network(d)).collect())
}

/// Densities `start, start+step, …, ≤ stop`, each computed as `start + k·step`.
pub fn density_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "step must be positive");
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| start + k as f64 * step).collect()
}
