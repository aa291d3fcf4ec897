//! Brute-force Betti numbers by Gaussian elimination over GF(2).
//!
//! Independent of the persistence algorithms; intended for small complexes
//! in tests.

use std::collections::HashMap;

use super::WeightedComplex;
use crate::scalar::Scalar;

/// Rank over GF(2) of a matrix given as bit-packed rows.
fn gf2_rank(mut rows: Vec<Vec<u64>>) -> usize {
    let words = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..words * 64 {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] & bit != 0 {
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Rank of the boundary map from `k`-simplices to `(k−1)`-simplices.
fn boundary_rank(faces: &[Vec<usize>], simplices: &[Vec<usize>]) -> usize {
    if faces.is_empty() || simplices.is_empty() {
        return 0;
    }
    let index: HashMap<&[usize], usize> = faces.iter().enumerate().map(|(i, f)| (f.as_slice(), i)).collect();
    let words = faces.len().div_ceil(64);
    let rows = simplices
        .iter()
        .map(|s| {
            let mut row = vec![0u64; words];
            for skip in 0..s.len() {
                let face: Vec<usize> = s.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                let f = index[face.as_slice()];
                row[f / 64] ^= 1 << (f % 64);
            }
            row
        })
        .collect();
    gf2_rank(rows)
}

/// Betti numbers `β₀ … β_{top−1}` of a complex given by its simplices per dimension.
fn betti_numbers(by_dim: &[Vec<Vec<usize>>]) -> Vec<usize> {
    let ranks: Vec<usize> =
        (0..by_dim.len()).map(|k| if k == 0 { 0 } else { boundary_rank(&by_dim[k - 1], &by_dim[k]) }).collect();
    (0..by_dim.len().saturating_sub(1)).map(|k| by_dim[k].len() - ranks[k] - ranks[k + 1]).collect()
}

/// `(β₀, β₁)` of the sub-complex of simplices with weight `≥ eps`.
pub fn betti_oracle<T: Scalar>(k: &WeightedComplex<T>, eps: T) -> (usize, usize) {
    let vertices: Vec<Vec<usize>> =
        if eps <= T::one() { (0..k.vertex_count()).map(|v| vec![v]).collect() } else { Vec::new() };
    let mut edges: Vec<Vec<usize>> = k.edges().iter().filter(|e| e.weight >= eps).map(|e| vec![e.a, e.b]).collect();
    let mut tris: Vec<Vec<usize>> =
        k.triangles().iter().filter(|t| t.weight >= eps).map(|t| t.vertices.to_vec()).collect();
    edges.sort();
    tris.sort();
    let b = betti_numbers(&[vertices, edges, tris, Vec::new()]);
    (b[0], b[1])
}

/// Betti numbers `β₀ … β_{max_dim}` at threshold `eps` of the clique
/// complex of a weighted graph truncated at dimension `max_dim`, with every
/// clique up to `max_dim + 1` vertices enumerated by brute force. `weights[i][j]` is the edge weight
/// (absent edges are `None`).
pub fn clique_complex_betti(weights: &[Vec<Option<f64>>], eps: f64, max_dim: usize) -> Vec<usize> {
    let n = weights.len();
    let present = |a: usize, b: usize| weights[a][b].is_some_and(|w| w >= eps);
    let mut by_dim: Vec<Vec<Vec<usize>>> = vec![Vec::new(); max_dim + 1];
    if eps <= 1.0 {
        by_dim[0] = (0..n).map(|v| vec![v]).collect();
    }
    for k in 1..=max_dim {
        let prev = by_dim[k - 1].clone();
        by_dim[k] = prev
            .iter()
            .flat_map(|s| {
                let last = *s.last().unwrap();
                (last + 1..n).filter(|&v| s.iter().all(|&u| present(u, v))).map(|v| {
                    let mut t = s.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    by_dim.push(Vec::new());
    betti_numbers(&by_dim)
}
