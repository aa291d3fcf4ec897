//! Graph-theoretical analysis of binary functional networks.
//!
//! Distances are hop counts from a breadth-first search out of every node.
//! Per-source searches run on the rayon pool and return integer histograms
//! of distances, which are summed exactly before any division; the metrics
//! are therefore independent of scheduling.

mod null;

pub use null::{
    degree_preserving_rewire, erdos_renyi_gnm, null_model_stats, null_model_stats_with, small_world_sigma,
    small_world_sigma_with, watts_strogatz, NullGenerator, NullModel, NullStats, SmallWorldResult,
    MAX_CONNECT_ATTEMPTS,
};

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GtaError {
    #[error("metric needs at least {need} nodes, graph has {got}")]
    TooFewNodes { need: usize, got: usize },
    #[error("average shortest path length is undefined on a disconnected graph; use global efficiency instead")]
    Disconnected,
    #[error("null model produced zero mean clustering; the small-world ratio is undefined")]
    DegenerateNull,
    #[error("null model needs at least one sample")]
    NoSamples,
    #[error("null model cannot be generated: {0}")]
    NullModel(String),
}

/// The four graph measures reported per network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GraphMetrics<T> {
    pub density: T,
    pub avg_shortest_path: T,
    pub global_efficiency: T,
    pub avg_clustering: T,
}

/// `2m / (n(n − 1))`.
pub fn graph_density<T: Scalar>(g: &Graph) -> Result<T, GtaError> {
    let n = g.node_count();
    if n < 2 {
        return Err(GtaError::TooFewNodes { need: 2, got: n });
    }
    Ok(T::from_usize_lossy(2 * g.edge_count()) / T::from_usize_lossy(n * (n - 1)))
}

/// Histogram of BFS distances over ordered pairs: `counts[d]` pairs at distance `d ≥ 1`,
/// plus the number of unreachable ordered pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DistanceHistogram {
    pub counts: Vec<u64>,
    pub unreachable: u64,
}

fn bfs_histogram(g: &Graph, source: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) -> DistanceHistogram {
    dist.fill(usize::MAX);
    dist[source] = 0;
    queue.clear();
    queue.push_back(source);
    let mut counts = vec![0u64];
    let mut reached = 1u64;
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = du + 1;
                if counts.len() <= du + 1 {
                    counts.push(0);
                }
                counts[du + 1] += 1;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    DistanceHistogram { counts, unreachable: g.node_count() as u64 - reached }
}

pub(crate) fn distance_histogram(g: &Graph) -> DistanceHistogram {
    let n = g.node_count();
    let partial: Vec<DistanceHistogram> = (0..n)
        .into_par_iter()
        .map_init(|| (vec![usize::MAX; n], VecDeque::new()), |(dist, queue), s| bfs_histogram(g, s, dist, queue))
        .collect();
    let mut total = DistanceHistogram { counts: vec![0], unreachable: 0 };
    for h in partial {
        if total.counts.len() < h.counts.len() {
            total.counts.resize(h.counts.len(), 0);
        }
        for (t, c) in total.counts.iter_mut().zip(&h.counts) {
            *t += c;
        }
        total.unreachable += h.unreachable;
    }
    total
}

/// Mean hop distance over all ordered pairs of distinct nodes.
pub fn average_shortest_path_length<T: Scalar>(g: &Graph) -> Result<T, GtaError> {
    let n = g.node_count();
    if n < 2 {
        return Err(GtaError::TooFewNodes { need: 2, got: n });
    }
    let h = distance_histogram(g);
    if h.unreachable > 0 {
        return Err(GtaError::Disconnected);
    }
    let total: u64 = h.counts.iter().enumerate().map(|(d, &c)| d as u64 * c).sum();
    Ok(T::lit(total as f64) / T::from_usize_lossy(n * (n - 1)))
}

/// Mean of `1 / l_ij` over ordered pairs, unreachable pairs contributing 0.
pub fn global_efficiency<T: Scalar>(g: &Graph) -> Result<T, GtaError> {
    let n = g.node_count();
    if n < 2 {
        return Err(GtaError::TooFewNodes { need: 2, got: n });
    }
    let h = distance_histogram(g);
    let mut sum = RatioSum::default();
    for (d, &c) in h.counts.iter().enumerate().skip(1) {
        sum.add(c as f64, d as f64);
    }
    Ok(T::lit(sum.mean((n * (n - 1)) as f64)))
}

/// Sum of integer ratios in double-double, rounded once at the end, so
/// means like `(1 + 1 + 2/3 + 2/3) / 4` come out as the nearest `f64`.
#[derive(Default)]
struct RatioSum {
    hi: f64,
    lo: f64,
}

impl RatioSum {
    /// Adds `p / q` for integers `p`, `q` below 2^53.
    fn add(&mut self, p: f64, q: f64) {
        let q1 = p / q;
        let q2 = (-q1).mul_add(q, p) / q;
        let s = self.hi + q1;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (q1 - bb);
        self.hi = s;
        self.lo += err + q2;
    }

    fn mean(&self, n: f64) -> f64 {
        let q1 = self.hi / n;
        let r = (-q1).mul_add(n, self.hi) + self.lo;
        q1 + r / n
    }
}

/// Local clustering `c_i = 2|S_i| / (k_i(k_i − 1))`, zero when `k_i < 2`.
pub fn local_clustering<T: Scalar>(g: &Graph) -> Vec<T> {
    clustering_ratios(g)
        .into_iter()
        .map(|(p, q)| if q == 0 { T::zero() } else { T::from_usize_lossy(p) / T::from_usize_lossy(q) })
        .collect()
}

/// Per node `(2|S_i|, k_i(k_i − 1))`, `(0, 0)` when `k_i < 2`.
fn clustering_ratios(g: &Graph) -> Vec<(usize, usize)> {
    let n = g.node_count();
    let mut mark = vec![false; n];
    (0..n)
        .map(|i| {
            let nb = g.neighbors(i);
            let k = nb.len();
            if k < 2 {
                return (0, 0);
            }
            for &v in nb {
                mark[v] = true;
            }
            // each neighbor-neighbor edge is seen from both ends
            let twice_links: usize = nb.iter().map(|&v| g.neighbors(v).iter().filter(|&&w| mark[w]).count()).sum();
            for &v in nb {
                mark[v] = false;
            }
            (twice_links, k * (k - 1))
        })
        .collect()
}

/// Mean local clustering over all nodes.
pub fn average_clustering_coefficient<T: Scalar>(g: &Graph) -> T {
    let n = g.node_count();
    if n == 0 {
        return T::zero();
    }
    let mut sum = RatioSum::default();
    for (p, q) in clustering_ratios(g).into_iter().filter(|r| r.1 > 0) {
        sum.add(p as f64, q as f64);
    }
    T::lit(sum.mean(n as f64))
}

/// All four metrics of a connected graph.
pub fn graph_metrics<T: Scalar>(g: &Graph) -> Result<GraphMetrics<T>, GtaError> {
    let n = g.node_count();
    if n < 2 {
        return Err(GtaError::TooFewNodes { need: 2, got: n });
    }
    let h = distance_histogram(g);
    if h.unreachable > 0 {
        return Err(GtaError::Disconnected);
    }
    let pairs = T::from_usize_lossy(n * (n - 1));
    let hops: u64 = h.counts.iter().enumerate().map(|(d, &c)| d as u64 * c).sum();
    let mut eff = T::zero();
    for (d, &c) in h.counts.iter().enumerate().skip(1) {
        eff += T::lit(c as f64) / T::from_usize_lossy(d);
    }
    Ok(GraphMetrics {
        density: graph_density(g)?,
        avg_shortest_path: T::lit(hops as f64) / pairs,
        global_efficiency: eff / pairs,
        avg_clustering: average_clustering_coefficient(g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn cycle4() -> Graph {
        Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    #[test]
    fn density_values() {
        assert_eq!(graph_density::<f64>(&Graph::complete(4)).unwrap(), 1.0);
        assert_eq!(graph_density::<f64>(&path3()).unwrap(), 2.0 / 3.0);
        assert!(graph_density::<f64>(&Graph::empty(1)).is_err());
    }

    #[test]
    fn path_lengths() {
        assert_eq!(average_shortest_path_length::<f64>(&Graph::complete(6)).unwrap(), 1.0);
        assert_eq!(average_shortest_path_length::<f64>(&path3()).unwrap(), 4.0 / 3.0);
        assert_eq!(average_shortest_path_length::<f64>(&cycle4()).unwrap(), 4.0 / 3.0);
        assert_eq!(average_shortest_path_length::<f64>(&Graph::empty(2)), Err(GtaError::Disconnected));
    }

    #[test]
    fn efficiency_values() {
        assert_eq!(global_efficiency::<f64>(&Graph::complete(5)).unwrap(), 1.0);
        assert_eq!(global_efficiency::<f64>(&path3()).unwrap(), 5.0 / 6.0);
        assert_eq!(global_efficiency::<f64>(&Graph::empty(2)).unwrap(), 0.0);
    }

    #[test]
    fn clustering_values() {
        assert_eq!(average_clustering_coefficient::<f64>(&Graph::complete(3)), 1.0);
        let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(average_clustering_coefficient::<f64>(&star), 0.0);
        let k4_minus = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let c = local_clustering::<f64>(&k4_minus);
        assert_eq!(c, vec![2.0 / 3.0, 2.0 / 3.0, 1.0, 1.0]);
        assert_eq!(average_clustering_coefficient::<f64>(&k4_minus), 5.0 / 6.0);
    }

    #[test]
    fn combined_metrics_match_individual() {
        let g = cycle4();
        let m = graph_metrics::<f64>(&g).unwrap();
        assert_eq!(m.avg_shortest_path, average_shortest_path_length::<f64>(&g).unwrap());
        assert_eq!(m.global_efficiency, global_efficiency::<f64>(&g).unwrap());
        assert_eq!(m.avg_clustering, 0.0);
        assert_eq!(m.density, 4.0 / 6.0);
    }
}
