//! Persistent homology of weighted flag complexes under a super-level filtration.
//!
//! Vertices carry weight 1, an edge carries its connectivity strength and a
//! triangle the minimum weight of its edges. The complex at threshold `ε`
//! is every simplex of weight `≥ ε`; lowering `ε` from 1 to 0 grows it.
//! Only the 2-skeleton is stored: `H₀` and `H₁` do not see higher cliques.
//!
//! Simplices are ordered by `(weight desc, dimension asc, vertex tuple asc)`,
//! which is the ascending sub-level order of `1 − weight` with a
//! deterministic tie-break. Dimension 0 is paired by union-find with the
//! elder rule; dimension 1 by reducing the coboundary of the edges that
//! do not merge components (the merging ones are cleared), youngest edge
//! first, with the earliest coface as pivot.

mod curve;
pub mod oracle;
mod reduction;

pub use curve::{betti_distance, BettiCurve};
pub use reduction::persistence_by_reduction;

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectivity::ConnectivityMatrix;
use crate::graph::Graph;
use crate::scalar::Scalar;

/// Default ceiling on stored triangles.
pub const DEFAULT_TRIANGLE_BUDGET: usize = 200_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TdaError {
    #[error("flag complex exceeds the triangle budget of {budget}; pre-threshold the network or reduce its size")]
    TriangleBudgetExceeded { budget: usize },
    #[error("edge ({a}, {b}) has weight {weight} outside [0, 1]")]
    InvalidWeight { a: usize, b: usize, weight: f64 },
    #[error("Betti curves of dimensions {0} and {1} cannot be compared")]
    DimensionMismatch(usize, usize),
    #[error("graph has {graph} nodes but the connectivity matrix has {matrix}")]
    SizeMismatch { graph: usize, matrix: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge<T> {
    pub a: usize,
    pub b: usize,
    pub weight: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTriangle<T> {
    pub vertices: [usize; 3],
    pub weight: T,
}

/// Weighted flag complex truncated at dimension 2.
///
/// Edges and triangles are stored in filtration order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedComplex<T> {
    n: usize,
    edges: Vec<WeightedEdge<T>>,
    triangles: Vec<WeightedTriangle<T>>,
}

fn desc<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    b.partial_cmp(&a).expect("weights are finite")
}

impl<T: Scalar> WeightedComplex<T> {
    /// Flag complex of the weighted graph given by `edges`. Edges of weight
    /// zero are dropped; weights must lie in `[0, 1]`.
    pub fn from_weighted_edges<I>(n: usize, edges: I, triangle_budget: usize) -> Result<Self, TdaError>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut kept = Vec::new();
        for (a, b, w) in edges {
            let wf = w.as_f64();
            if !(0.0..=1.0).contains(&wf) {
                return Err(TdaError::InvalidWeight { a, b, weight: wf });
            }
            assert!(a != b && a < n && b < n, "edge ({a}, {b}) invalid for {n} vertices");
            if w > T::zero() {
                kept.push(WeightedEdge { a: a.min(b), b: a.max(b), weight: w });
            }
        }
        kept.sort_by_key(|x| (x.a, x.b));
        kept.dedup_by(|x, y| (x.a, x.b) == (y.a, y.b));

        let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for e in &kept {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }

        let mut triangles = Vec::new();
        for e in &kept {
            // common neighbours c > b of a and b, by merging sorted lists
            let (la, lb) = (&adj[e.a], &adj[e.b]);
            let (mut i, mut j) = (la.partition_point(|&(v, _)| v <= e.b), lb.partition_point(|&(v, _)| v <= e.b));
            while i < la.len() && j < lb.len() {
                match la[i].0.cmp(&lb[j].0) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        if triangles.len() == triangle_budget {
                            return Err(TdaError::TriangleBudgetExceeded { budget: triangle_budget });
                        }
                        let w = e.weight.min(la[i].1).min(lb[j].1);
                        triangles.push(WeightedTriangle { vertices: [e.a, e.b, la[i].0], weight: w });
                        i += 1;
                        j += 1;
                    }
                }
            }
        }

        kept.sort_by(|x, y| desc(x.weight, y.weight).then((x.a, x.b).cmp(&(y.a, y.b))));
        triangles.sort_by(|x, y| desc(x.weight, y.weight).then(x.vertices.cmp(&y.vertices)));
        Ok(Self { n, edges: kept, triangles })
    }

    /// Flag complex of the full weighted connectivity graph.
    pub fn from_connectivity(f: &ConnectivityMatrix<T>, triangle_budget: usize) -> Result<Self, TdaError> {
        Self::from_weighted_edges(f.n(), f.upper_edges(), triangle_budget)
    }

    /// Flag complex of a binarized network, edges weighted by `f`.
    pub fn from_network(f: &ConnectivityMatrix<T>, g: &Graph, triangle_budget: usize) -> Result<Self, TdaError> {
        if g.node_count() != f.n() {
            return Err(TdaError::SizeMismatch { graph: g.node_count(), matrix: f.n() });
        }
        Self::from_weighted_edges(f.n(), g.edges().iter().map(|&(a, b)| (a, b, f.weight(a, b))), triangle_budget)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Edges in filtration order.
    pub fn edges(&self) -> &[WeightedEdge<T>] {
        &self.edges
    }

    /// Triangles in filtration order.
    pub fn triangles(&self) -> &[WeightedTriangle<T>] {
        &self.triangles
    }
}

/// Point of a persistence diagram. Essential classes have `death == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PersistencePoint<T> {
    pub birth: T,
    pub death: T,
}

impl<T: Scalar> PersistencePoint<T> {
    pub fn is_essential(&self) -> bool {
        self.death == T::zero()
    }
}

/// `k`-dimensional persistence diagram of a super-level filtration
/// (`birth ≥ death`). Points with `birth == death` are not recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PersistenceDiagram<T> {
    pub dimension: usize,
    pub points: Vec<PersistencePoint<T>>,
}

impl<T: Scalar> PersistenceDiagram<T> {
    /// Builds a diagram, dropping zero-length points and sorting the rest
    /// by `(birth desc, death desc)`.
    pub fn new(dimension: usize, points: impl IntoIterator<Item = PersistencePoint<T>>) -> Self {
        let mut points: Vec<_> = points.into_iter().filter(|p| p.birth != p.death).collect();
        points.sort_by(|x, y| desc(x.birth, y.birth).then(desc(x.death, y.death)));
        Self { dimension, points }
    }

    pub fn essential_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_essential()).count()
    }
}

/// Dimension-0 and dimension-1 persistence of the complex.
pub fn persistence<T: Scalar>(k: &WeightedComplex<T>) -> (PersistenceDiagram<T>, PersistenceDiagram<T>) {
    let n = k.n;
    let one = T::one();

    // H0 via union-find; oldest[root] is the smallest vertex index of the component.
    let mut uf = UnionFind::<usize>::new(n);
    let mut oldest: Vec<usize> = (0..n).collect();
    let mut merging = vec![false; k.edges.len()];
    let mut h0 = Vec::with_capacity(n);
    for (idx, e) in k.edges.iter().enumerate() {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        if ra == rb {
            continue;
        }
        merging[idx] = true;
        let (oa, ob) = (oldest[ra], oldest[rb]);
        uf.union(ra, rb);
        oldest[uf.find(ra)] = oa.min(ob);
        h0.push(PersistencePoint { birth: one, death: e.weight });
    }
    for v in 0..n {
        if uf.find(v) == v {
            h0.push(PersistencePoint { birth: one, death: T::zero() });
        }
    }

    // H1 via coboundary reduction over GF(2).
    let edge_pos: HashMap<(usize, usize), usize> = k.edges.iter().enumerate().map(|(i, e)| ((e.a, e.b), i)).collect();
    let mut cofaces: Vec<Vec<usize>> = vec![Vec::new(); k.edges.len()];
    for (t, tri) in k.triangles.iter().enumerate() {
        let [a, b, c] = tri.vertices;
        for key in [(a, b), (a, c), (b, c)] {
            let e = edge_pos[&key];
            if !merging[e] {
                cofaces[e].push(t);
            }
        }
    }
    // columns are kept sorted ascending so the pivot is the first entry
    let mut pivot_owner: Vec<Option<usize>> = vec![None; k.triangles.len()];
    let mut reduced: Vec<Vec<usize>> = vec![Vec::new(); k.edges.len()];
    let mut h1 = Vec::new();
    for e in (0..k.edges.len()).rev() {
        if merging[e] {
            continue;
        }
        let mut col = std::mem::take(&mut cofaces[e]);
        while let Some(&pivot) = col.first() {
            match pivot_owner[pivot] {
                Some(owner) => col = symmetric_difference(&col, &reduced[owner]),
                None => break,
            }
        }
        let birth = k.edges[e].weight;
        match col.first() {
            Some(&pivot) => {
                pivot_owner[pivot] = Some(e);
                h1.push(PersistencePoint { birth, death: k.triangles[pivot].weight });
                reduced[e] = col;
            }
            None => h1.push(PersistencePoint { birth, death: T::zero() }),
        }
    }

    (PersistenceDiagram::new(0, h0), PersistenceDiagram::new(1, h1))
}

/// Sorted symmetric difference of two ascending index lists.
pub(crate) fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Betti curves of dimensions 0 and 1.
pub fn betti_curves<T: Scalar>(k: &WeightedComplex<T>) -> (BettiCurve<T>, BettiCurve<T>) {
    let (d0, d1) = persistence(k);
    (BettiCurve::from_diagram(&d0), BettiCurve::from_diagram(&d1))
}
