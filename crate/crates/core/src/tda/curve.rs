use serde::{Deserialize, Serialize};

use super::{PersistenceDiagram, TdaError};
use crate::scalar::Scalar;

/// Piecewise-constant Betti curve on `[0, 1]`.
///
/// `breakpoints` start at 1 and strictly decrease; `values[i]` holds on
/// `(breakpoints[i + 1], breakpoints[i]]`, and the last value on
/// `[0, breakpoints[last]]`. Adjacent intervals always differ in value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BettiCurve<T> {
    pub dimension: usize,
    pub breakpoints: Vec<T>,
    pub values: Vec<usize>,
}

impl<T: Scalar> BettiCurve<T> {
    /// The identically zero curve.
    pub fn zero(dimension: usize) -> Self {
        Self { dimension, breakpoints: vec![T::one()], values: vec![0] }
    }

    /// Builds a curve from raw steps, merging equal neighbours. Breakpoints
    /// must start at 1 and strictly decrease towards a positive value.
    pub fn from_steps(dimension: usize, breakpoints: Vec<T>, values: Vec<usize>) -> Self {
        assert_eq!(breakpoints.len(), values.len(), "one value per breakpoint");
        assert!(!breakpoints.is_empty() && breakpoints[0] == T::one(), "first breakpoint must be 1");
        assert!(breakpoints.windows(2).all(|w| w[0] > w[1]), "breakpoints must strictly decrease");
        assert!(*breakpoints.last().unwrap() >= T::zero(), "breakpoints must be non-negative");
        let mut bp = vec![breakpoints[0]];
        let mut vals = vec![values[0]];
        for (&b, &v) in breakpoints.iter().zip(&values).skip(1) {
            if v != *vals.last().unwrap() {
                bp.push(b);
                vals.push(v);
            }
        }
        Self { dimension, breakpoints: bp, values: vals }
    }

    /// Exact curve of a diagram: a point contributes on `(death, birth]`,
    /// an essential point on `[0, birth]`.
    pub fn from_diagram(d: &PersistenceDiagram<T>) -> Self {
        let mut cuts: Vec<T> = vec![T::one()];
        for p in &d.points {
            for v in [p.birth, p.death] {
                if v > T::zero() && v < T::one() {
                    cuts.push(v);
                }
            }
        }
        cuts.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        cuts.dedup();
        let values = (0..cuts.len())
            .map(|i| {
                let hi = cuts[i];
                let lo = cuts.get(i + 1).copied().unwrap_or(T::zero());
                d.points.iter().filter(|p| p.death <= lo && p.birth >= hi).count()
            })
            .collect();
        Self::from_steps(d.dimension, cuts, values)
    }

    /// `β(ε)`; zero above 1.
    pub fn value_at(&self, eps: T) -> usize {
        if eps > T::one() {
            return 0;
        }
        // last breakpoint >= eps
        let idx = self.breakpoints.partition_point(|&b| b >= eps);
        self.values[idx.saturating_sub(1)]
    }
}

/// `∫₀¹ |β¹(x) − β²(x)|² dx`, evaluated exactly over the merged breakpoints.
pub fn betti_distance<T: Scalar>(c1: &BettiCurve<T>, c2: &BettiCurve<T>) -> Result<T, TdaError> {
    if c1.dimension != c2.dimension {
        return Err(TdaError::DimensionMismatch(c1.dimension, c2.dimension));
    }
    let mut cuts: Vec<T> = c1.breakpoints.iter().chain(&c2.breakpoints).copied().collect();
    cuts.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    cuts.dedup();
    let mut total = T::zero();
    for (i, &hi) in cuts.iter().enumerate() {
        let lo = cuts.get(i + 1).copied().unwrap_or(T::zero());
        let diff = T::from_usize_lossy(c1.value_at(hi)) - T::from_usize_lossy(c2.value_at(hi));
        total += diff * diff * (hi - lo);
    }
    Ok(total)
}
