//! Simplexwise boundary-matrix reduction with clearing, used to cross-check
//! the union-find and coboundary routes of [`super::persistence`].

use std::collections::HashMap;

use super::{symmetric_difference, PersistenceDiagram, PersistencePoint, WeightedComplex};
use crate::scalar::Scalar;

struct Cell<T> {
    dim: usize,
    verts: Vec<usize>,
    weight: T,
}

/// Persistence diagrams (dimensions 0 and 1) by reducing the full boundary
/// matrix of the filtration over GF(2), highest dimension first.
pub fn persistence_by_reduction<T: Scalar>(k: &WeightedComplex<T>) -> (PersistenceDiagram<T>, PersistenceDiagram<T>) {
    let mut cells: Vec<Cell<T>> =
        (0..k.vertex_count()).map(|v| Cell { dim: 0, verts: vec![v], weight: T::one() }).collect();
    cells.extend(k.edges().iter().map(|e| Cell { dim: 1, verts: vec![e.a, e.b], weight: e.weight }));
    cells.extend(k.triangles().iter().map(|t| Cell { dim: 2, verts: t.vertices.to_vec(), weight: t.weight }));
    cells.sort_by(|x, y| {
        y.weight.partial_cmp(&x.weight).expect("finite").then(x.dim.cmp(&y.dim)).then(x.verts.cmp(&y.verts))
    });
    let index: HashMap<Vec<usize>, usize> = cells.iter().enumerate().map(|(i, c)| (c.verts.clone(), i)).collect();

    let boundary = |c: &Cell<T>| -> Vec<usize> {
        if c.dim == 0 {
            return Vec::new();
        }
        let mut col: Vec<usize> = (0..c.verts.len())
            .map(|skip| {
                let face: Vec<usize> =
                    c.verts.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                index[&face]
            })
            .collect();
        col.sort_unstable();
        col
    };

    let total = cells.len();
    let mut low_owner: Vec<Option<usize>> = vec![None; total];
    let mut reduced: Vec<Vec<usize>> = vec![Vec::new(); total];
    let mut cleared = vec![false; total];
    let mut paired = vec![false; total];
    let mut points: [Vec<PersistencePoint<T>>; 2] = [Vec::new(), Vec::new()];

    for dim in [2usize, 1] {
        for j in 0..total {
            if cells[j].dim != dim || cleared[j] {
                continue;
            }
            let mut col = boundary(&cells[j]);
            while let Some(&low) = col.last() {
                match low_owner[low] {
                    Some(owner) => col = symmetric_difference(&col, &reduced[owner]),
                    None => break,
                }
            }
            if let Some(&low) = col.last() {
                low_owner[low] = Some(j);
                cleared[low] = true;
                paired[low] = true;
                paired[j] = true;
                points[dim - 1].push(PersistencePoint { birth: cells[low].weight, death: cells[j].weight });
                reduced[j] = col;
            }
        }
    }
    // unpaired creators of dimension 0 and 1 are essential
    for (j, c) in cells.iter().enumerate() {
        if c.dim < 2 && !paired[j] {
            points[c.dim].push(PersistencePoint { birth: c.weight, death: T::zero() });
        }
    }
    let [p0, p1] = points;
    (PersistenceDiagram::new(0, p0), PersistenceDiagram::new(1, p1))
}

#[cfg(test)]
mod tests {
    use super::super::tests::{four_cycle, triangle};
    use super::super::{persistence, WeightedComplex, DEFAULT_TRIANGLE_BUDGET};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_on_fixtures() {
        for k in [triangle(), four_cycle()] {
            assert_eq!(persistence_by_reduction(&k), persistence(&k));
        }
    }

    #[test]
    fn agrees_on_random_complexes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..=9);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.6) {
                        edges.push((i, j, rng.random::<f64>()));
                    }
                }
            }
            let k = WeightedComplex::from_weighted_edges(n, edges, DEFAULT_TRIANGLE_BUDGET).unwrap();
            assert_eq!(persistence_by_reduction(&k), persistence(&k));
        }
    }
}
