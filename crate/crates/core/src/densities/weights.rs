use alloc::format;
use alloc::vec::Vec;

use super::ProductDensity;
use crate::math::sample_variance;
use crate::{Error, Result};

/// Likelihood-ratio weights `w = f / f̃` of a sample drawn under `f̃`, kept
/// both as row products and as per-input factors `ω_k = f_k / f̃_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    /// `values[i] = Π_k factors[k][i]`.
    pub values: Vec<f64>,
    /// One column of factors per input.
    pub factors: Vec<Vec<f64>>,
}

impl WeightVector {
    /// All-ones weights for `n` rows and `d` inputs.
    pub fn unit(n: usize, d: usize) -> Self {
        WeightVector { values: alloc::vec![1.0; n], factors: alloc::vec![alloc::vec![1.0; n]; d] }
    }

    /// Builds weights from factor columns; validates shape and finiteness.
    pub fn from_factors(factors: Vec<Vec<f64>>) -> Result<Self> {
        let n = factors.first().map_or(0, Vec::len);
        if let Some(c) = factors.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: c.len() });
        }
        if factors.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weight factors must be finite and non-negative"));
        }
        let values = (0..n).map(|i| factors.iter().map(|c| c[i]).product()).collect();
        Ok(WeightVector { values, factors })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    /// `ω_k` column.
    pub fn omega_k(&self, k: usize) -> &[f64] {
        &self.factors[k]
    }

    /// Product of all factors except input `k`.
    pub fn omega_minus_k(&self, k: usize) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                self.factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, c)| c[i])
                    .product()
            })
            .collect()
    }

    pub fn is_unit(&self) -> bool {
        self.values.iter().all(|&w| w == 1.0)
    }
}

/// Per-input likelihood ratios of `columns` (one per input) between the
/// target and the drawing law. Identical margins give factors of exactly 1.
pub fn likelihood_weights(
    columns: &[Vec<f64>],
    target: &ProductDensity,
    drawing: &ProductDensity,
) -> Result<WeightVector> {
    let d = columns.len();
    if target.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: target.dim() });
    }
    if drawing.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: drawing.dim() });
    }
    let mut factors = Vec::with_capacity(d);
    for (k, col) in columns.iter().enumerate() {
        let (f, g) = (&target.margins[k], &drawing.margins[k]);
        if f == g {
            factors.push(alloc::vec![1.0; col.len()]);
            continue;
        }
        let mut out = Vec::with_capacity(col.len());
        for (i, &x) in col.iter().enumerate() {
            let den = g.pdf(x);
            if !(den > 0.0) {
                return Err(Error::numerical(format!(
                    "drawing density of input {} vanishes at row {} (x = {x})",
                    k + 1,
                    i + 1
                )));
            }
            let r = f.pdf(x) / den;
            if !r.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite likelihood ratio for input {} at row {}",
                    k + 1,
                    i + 1
                )));
            }
            out.push(r);
        }
        factors.push(out);
    }
    WeightVector::from_factors(factors)
}

/// Unbiased variance of each factor column. Large values flag unreliable
/// reweighting; callers compare against a threshold (10 by default).
pub fn weight_diagnostic(weights: &WeightVector) -> Result<Vec<f64>> {
    weights.factors.iter().map(|c| sample_variance(c)).collect()
}
