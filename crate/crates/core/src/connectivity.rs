//! Pearson correlation and functional connectivity between hidden neurons.
//!
//! The correlation matrix is computed with a two-pass algorithm in `f64`
//! (column means first, then centred second moments) regardless of the
//! scalar type of the input. Pairwise dot products are evaluated in square
//! tiles of columns so that a tile's centred columns stay cache resident;
//! tiles are independent and run on the rayon pool. Every entry is produced
//! by the same sequential dot product whatever the scheduling, so results
//! are bit-identical across thread counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Scalar;

const TILE: usize = 32;

/// Off-diagonal asymmetry tolerated when validating a correlation matrix.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnectivityError {
    #[error("correlation needs at least 2 samples, got {0}")]
    InsufficientData(usize),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("entry ({i}, {j}) = {value} outside [{lo}, {hi}]")]
    OutOfRange { i: usize, j: usize, value: f64, lo: f64, hi: f64 },
    #[error("diagonal entry {0} of a connectivity matrix must be zero")]
    NonZeroDiagonal(usize),
    #[error("degenerate neuron index {index} out of range for {n} neurons")]
    BadDegenerateIndex { index: usize, n: usize },
}

/// Pearson correlation matrix `R` with the zero-variance neurons it found.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T> {
    values: Matrix<T>,
    degenerate: Vec<usize>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    /// Validates a square symmetric matrix with entries in `[-1, 1]`.
    pub fn new(values: Matrix<T>, mut degenerate: Vec<usize>) -> Result<Self, ConnectivityError> {
        check_square(&values)?;
        let n = values.rows();
        check_symmetric_in_range(&values, -1.0, 1.0)?;
        degenerate.sort_unstable();
        degenerate.dedup();
        if let Some(&index) = degenerate.iter().find(|&&d| d >= n) {
            return Err(ConnectivityError::BadDegenerateIndex { index, n });
        }
        Ok(Self { values, degenerate })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }
}

/// Functional connectivity `f_ij = |r_ij|` off the diagonal, zero on it.
///
/// Rows and columns of degenerate (constant) neurons are all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityMatrix<T> {
    strengths: Matrix<T>,
    degenerate: Vec<usize>,
}

impl<T: Scalar> ConnectivityMatrix<T> {
    /// Validates symmetric strengths in `[0, 1]` with a zero diagonal.
    pub fn from_parts(strengths: Matrix<T>, mut degenerate: Vec<usize>) -> Result<Self, ConnectivityError> {
        check_square(&strengths)?;
        let n = strengths.rows();
        check_symmetric_in_range(&strengths, 0.0, 1.0)?;
        if let Some(i) = (0..n).find(|&i| strengths[(i, i)] != T::zero()) {
            return Err(ConnectivityError::NonZeroDiagonal(i));
        }
        degenerate.sort_unstable();
        degenerate.dedup();
        if let Some(&index) = degenerate.iter().find(|&&d| d >= n) {
            return Err(ConnectivityError::BadDegenerateIndex { index, n });
        }
        Ok(Self { strengths, degenerate })
    }

    pub fn n(&self) -> usize {
        self.strengths.rows()
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.strengths[(i, j)]
    }

    pub fn strengths(&self) -> &Matrix<T> {
        &self.strengths
    }

    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    /// Upper-triangle entries `(i, j, f_ij)` with `i < j`, row-major.
    pub fn upper_edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.strengths[(i, j)])))
    }
}

fn check_square<T: Scalar>(m: &Matrix<T>) -> Result<(), ConnectivityError> {
    if m.rows() != m.cols() {
        return Err(ConnectivityError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    Ok(())
}

fn check_symmetric_in_range<T: Scalar>(m: &Matrix<T>, lo: f64, hi: f64) -> Result<(), ConnectivityError> {
    let n = m.rows();
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)].as_f64();
            if !(lo..=hi).contains(&v) {
                return Err(ConnectivityError::OutOfRange { i, j, value: v, lo, hi });
            }
            if j > i && (v - m[(j, i)].as_f64()).abs() > SYMMETRY_TOL {
                return Err(ConnectivityError::Asymmetric { i, j });
            }
        }
    }
    Ok(())
}

/// Pearson correlation between every pair of columns of `activations`.
///
/// A column whose values are all equal has zero variance; it gets `r = 0`
/// against every other column (and on its own diagonal) and is listed in
/// [`CorrelationMatrix::degenerate`].
pub fn pearson_correlation_matrix<T: Scalar>(
    activations: &Matrix<T>,
) -> Result<CorrelationMatrix<T>, ConnectivityError> {
    let (m, n) = activations.shape();
    if m < 2 {
        return Err(ConnectivityError::InsufficientData(m));
    }

    // Column-major centred copy.
    let mut centred = vec![0.0f64; n * m];
    let mut sumsq = vec![0.0f64; n];
    let mut degenerate = Vec::new();
    for j in 0..n {
        let col = &mut centred[j * m..(j + 1) * m];
        let first = activations[(0, j)];
        let mut constant = true;
        let mut sum = 0.0;
        for (i, c) in col.iter_mut().enumerate() {
            let v = activations[(i, j)];
            constant &= v == first;
            *c = v.as_f64();
            sum += *c;
        }
        let mean = sum / m as f64;
        let mut ss = 0.0;
        for c in col.iter_mut() {
            *c -= mean;
            ss += *c * *c;
        }
        if constant || ss == 0.0 {
            degenerate.push(j);
        } else {
            sumsq[j] = ss;
        }
    }

    let tiles = n.div_ceil(TILE);
    let tile_pairs: Vec<(usize, usize)> = (0..tiles).flat_map(|a| (a..tiles).map(move |b| (a, b))).collect();
    let blocks: Vec<Vec<(usize, usize, f64)>> = tile_pairs
        .par_iter()
        .map(|&(ta, tb)| {
            let mut out = Vec::new();
            for i in ta * TILE..((ta + 1) * TILE).min(n) {
                if sumsq[i] == 0.0 {
                    continue;
                }
                let ci = &centred[i * m..(i + 1) * m];
                let j_start = if ta == tb { i + 1 } else { tb * TILE };
                for j in j_start..((tb + 1) * TILE).min(n) {
                    if sumsq[j] == 0.0 {
                        continue;
                    }
                    let cj = &centred[j * m..(j + 1) * m];
                    let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                    let r = (dot / (sumsq[i] * sumsq[j]).sqrt()).clamp(-1.0, 1.0);
                    out.push((i, j, r));
                }
            }
            out
        })
        .collect();

    let mut values = Matrix::zeros(n, n);
    for j in 0..n {
        if sumsq[j] != 0.0 {
            values[(j, j)] = T::one();
        }
    }
    for (i, j, r) in blocks.into_iter().flatten() {
        let r = T::lit(r);
        values[(i, j)] = r;
        values[(j, i)] = r;
    }
    Ok(CorrelationMatrix { values, degenerate })
}

/// `f_ij = |r_ij|` for `i != j`, `0` on the diagonal.
pub fn functional_connectivity_matrix<T: Scalar>(r: &CorrelationMatrix<T>) -> ConnectivityMatrix<T> {
    let n = r.n();
    let strengths = Matrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { r.values[(i, j)].abs() });
    ConnectivityMatrix { strengths, degenerate: r.degenerate.clone() }
}
