//! Random null models and the small-world coefficient.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{average_clustering_coefficient, distance_histogram, GtaError};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// Attempts at drawing a connected null sample before falling back to the
/// largest component for the path length.
pub const MAX_CONNECT_ATTEMPTS: usize = 100;

/// The "equivalent random network" used as the small-world reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NullModel {
    /// Uniform `G(n, m)` with the real graph's node and edge counts.
    #[default]
    ErdosRenyiGnm,
    /// Double-edge swaps (10·m attempts) keeping every node's degree.
    DegreePreservingRewire,
}

impl std::fmt::Display for NullModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NullModel::ErdosRenyiGnm => "erdos-renyi-gnm",
            NullModel::DegreePreservingRewire => "degree-preserving-rewire",
        })
    }
}

/// Source of random graphs comparable to a given graph.
pub trait NullGenerator: Sync {
    fn generate(&self, g: &Graph, rng: &mut ChaCha8Rng) -> Graph;
}

impl NullGenerator for NullModel {
    fn generate(&self, g: &Graph, rng: &mut ChaCha8Rng) -> Graph {
        match self {
            NullModel::ErdosRenyiGnm => erdos_renyi_gnm(g.node_count(), g.edge_count(), rng),
            NullModel::DegreePreservingRewire => degree_preserving_rewire(g, 10 * g.edge_count(), rng),
        }
    }
}

/// Uniform random graph with `n` nodes and exactly `m` edges.
pub fn erdos_renyi_gnm<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Graph {
    let pairs = n * n.saturating_sub(1) / 2;
    assert!(m <= pairs, "G(n, m) with m = {m} > n(n-1)/2 = {pairs}");
    let mut picked = index::sample(rng, pairs, m).into_vec();
    picked.sort_unstable();
    // decode the row-major index of the strict upper triangle
    let mut edges = Vec::with_capacity(m);
    let (mut row, mut row_start) = (0usize, 0usize);
    for k in picked {
        while k >= row_start + (n - 1 - row) {
            row_start += n - 1 - row;
            row += 1;
        }
        edges.push((row, row + 1 + (k - row_start)));
    }
    Graph::from_edges(n, edges).expect("sampled pairs are distinct")
}

/// Watts–Strogatz ring lattice of `n` nodes with `k` nearest neighbours,
/// each lattice edge `(u, u + j)` rewired with probability `p` to a uniform
/// non-adjacent target.
pub fn watts_strogatz<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Graph {
    assert!(k.is_multiple_of(2) && k < n, "k must be even and below n");
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !rng.random_bool(p) || !adj[u].contains(&v) {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges = adj.iter().enumerate().flat_map(|(u, s)| s.iter().filter(move |&&v| v > u).map(move |&v| (u, v)));
    Graph::from_edges(n, edges).expect("lattice edges are simple")
}

/// Maslov–Sneppen double-edge swaps: `(a,b),(c,d) → (a,d),(c,b)` whenever
/// the result stays simple. Degrees are preserved exactly.
pub fn degree_preserving_rewire<R: Rng + ?Sized>(g: &Graph, attempts: usize, rng: &mut R) -> Graph {
    let mut edges: Vec<(usize, usize)> = g.edges().to_vec();
    let m = edges.len();
    if m < 2 {
        return g.clone();
    }
    let mut adj: Vec<BTreeSet<usize>> = (0..g.node_count()).map(|v| g.neighbors(v).iter().copied().collect()).collect();
    for _ in 0..attempts {
        let e1 = rng.random_range(0..m);
        let e2 = rng.random_range(0..m);
        if e1 == e2 {
            continue;
        }
        let (a, b) = edges[e1];
        let (mut c, mut d) = edges[e2];
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c, &mut d);
        }
        if a == d || c == b || adj[a].contains(&d) || adj[c].contains(&b) {
            continue;
        }
        adj[a].remove(&b);
        adj[b].remove(&a);
        adj[c].remove(&d);
        adj[d].remove(&c);
        adj[a].insert(d);
        adj[d].insert(a);
        adj[c].insert(b);
        adj[b].insert(c);
        edges[e1] = (a.min(d), a.max(d));
        edges[e2] = (c.min(b), c.max(b));
    }
    Graph::from_edges(g.node_count(), edges).expect("swaps keep the graph simple")
}

/// Mean clustering and path length over the null samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NullStats<T> {
    pub c_random: T,
    pub l_random: T,
    pub samples: usize,
    /// Samples that stayed disconnected after [`MAX_CONNECT_ATTEMPTS`] draws;
    /// their path length was measured on the largest component.
    pub fallback_samples: usize,
}

struct NullSample {
    clustering: f64,
    path_length: f64,
    fallback: bool,
}

fn mean_path_length_of(g: &Graph) -> f64 {
    let n = g.node_count();
    if n < 2 {
        return 0.0;
    }
    let h = distance_histogram(g);
    let hops: u64 = h.counts.iter().enumerate().map(|(d, &c)| d as u64 * c).sum();
    hops as f64 / (n * (n - 1)) as f64
}

fn draw_sample(g: &Graph, generator: &dyn NullGenerator, seed: u64, index: usize) -> NullSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut last = None;
    for _ in 0..MAX_CONNECT_ATTEMPTS {
        let h = generator.generate(g, &mut rng);
        if h.is_connected() {
            return NullSample {
                clustering: average_clustering_coefficient(&h),
                path_length: mean_path_length_of(&h),
                fallback: false,
            };
        }
        last = Some(h);
    }
    let h = last.expect("at least one attempt");
    let giant = h.induced_subgraph(&h.largest_component());
    NullSample {
        clustering: average_clustering_coefficient(&h),
        path_length: mean_path_length_of(&giant),
        fallback: true,
    }
}

/// Means of the clustering coefficient and path length over `samples`
/// null graphs. Sample `i` is drawn from ChaCha8 stream `i` of `seed`.
pub fn null_model_stats<T: Scalar>(
    g: &Graph,
    model: NullModel,
    samples: usize,
    seed: u64,
) -> Result<NullStats<T>, GtaError> {
    null_model_stats_with(g, &model, samples, seed)
}

/// [`null_model_stats`] with a caller-supplied generator.
pub fn null_model_stats_with<T: Scalar>(
    g: &Graph,
    generator: &dyn NullGenerator,
    samples: usize,
    seed: u64,
) -> Result<NullStats<T>, GtaError> {
    if samples == 0 {
        return Err(GtaError::NoSamples);
    }
    let drawn: Vec<NullSample> = (0..samples).into_par_iter().map(|i| draw_sample(g, generator, seed, i)).collect();
    let c: f64 = drawn.iter().map(|s| s.clustering).sum::<f64>() / samples as f64;
    let l: f64 = drawn.iter().map(|s| s.path_length).sum::<f64>() / samples as f64;
    Ok(NullStats {
        c_random: T::lit(c),
        l_random: T::lit(l),
        samples,
        fallback_samples: drawn.iter().filter(|s| s.fallback).count(),
    })
}

/// `σ = (C_real / C_random) / (L_real / L_random)` with its constituents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SmallWorldResult<T> {
    pub sigma: T,
    pub c_real: T,
    pub c_random: T,
    pub l_real: T,
    pub l_random: T,
    pub null_samples: usize,
    pub null_model: NullModel,
    pub seed: u64,
    pub fallback_samples: usize,
}

impl<T: Scalar> SmallWorldResult<T> {
    pub fn is_small_world(&self) -> bool {
        self.sigma > T::one()
    }
}

/// Small-world coefficient of a connected graph against `model`.
pub fn small_world_sigma<T: Scalar>(
    g: &Graph,
    model: NullModel,
    samples: usize,
    seed: u64,
) -> Result<SmallWorldResult<T>, GtaError> {
    small_world_sigma_with(g, &model, model, samples, seed)
}

/// [`small_world_sigma`] with a caller-supplied generator; `label` is recorded in the result.
pub fn small_world_sigma_with<T: Scalar>(
    g: &Graph,
    generator: &dyn NullGenerator,
    label: NullModel,
    samples: usize,
    seed: u64,
) -> Result<SmallWorldResult<T>, GtaError> {
    let l_real: T = super::average_shortest_path_length(g)?;
    let c_real: T = average_clustering_coefficient(g);
    let stats: NullStats<T> = null_model_stats_with(g, generator, samples, seed)?;
    if stats.c_random == T::zero() {
        return Err(GtaError::DegenerateNull);
    }
    Ok(SmallWorldResult {
        sigma: (c_real / stats.c_random) / (l_real / stats.l_random),
        c_real,
        c_random: stats.c_random,
        l_real,
        l_random: stats.l_random,
        null_samples: samples,
        null_model: label,
        seed,
        fallback_samples: stats.fallback_samples,
    })
}
