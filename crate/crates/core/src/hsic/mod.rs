//! V-statistic HSIC estimators, plain and importance-weighted, R² indices and
//! independence tests.
//!
//! Every estimator here takes Gram matrices, so callers compute each input's
//! and the output's Gram matrix once and reuse them across weightings.

use alloc::format;
use alloc::vec::Vec;

use crate::densities::ProductDensity;
use crate::kernels::GramMatrix;
use crate::{Error, Result};

mod first_level;
mod moments;
mod perm;

pub use first_level::{streaming_r2, FirstLevel, HsicTriple};
pub use moments::{
    gamma_moments_classical, gamma_moments_weighted, gamma_pvalue, gamma_test, MomentEstimates,
};
pub use perm::{permutation_pvalue, PermutationWeights, TestMethod, TestResult};

/// Input columns and outputs of one Monte Carlo sample, with the law the
/// inputs were drawn from when known.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    drawing: Option<ProductDensity>,
}

impl SampleSet {
    /// `inputs` holds one column per input, each as long as `outputs`.
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        let n = outputs.len();
        if n == 0 {
            return Err(Error::invalid("sample is empty"));
        }
        if inputs.is_empty() {
            return Err(Error::invalid("sample has no input columns"));
        }
        if let Some(c) = inputs.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: c.len() });
        }
        if let Some(k) = inputs.iter().position(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid(format!("input {} has non-finite values", k + 1)));
        }
        if outputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("output has non-finite values"));
        }
        Ok(SampleSet { inputs, outputs, drawing: None })
    }

    /// Records the law the inputs were drawn from.
    pub fn with_drawing(mut self, drawing: ProductDensity) -> Result<Self> {
        if drawing.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: drawing.dim() });
        }
        self.drawing = Some(drawing);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.outputs.len()
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.inputs[k]
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn drawing(&self) -> Option<&ProductDensity> {
        self.drawing.as_ref()
    }

    /// Row `i` as a vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inputs.iter().map(|c| c[i]).collect()
    }
}

/// One HSIC evaluation with its R² index and optional test outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HsicEstimate {
    pub value: f64,
    pub r2: f64,
    /// Gamma shape γ and scale β of the null law of `n · HSIC`.
    pub gamma_shape: Option<f64>,
    pub gamma_scale: Option<f64>,
    /// Null mean and variance of the estimator.
    pub null_mean: Option<f64>,
    pub null_variance: Option<f64>,
    pub pvalue_gamma: Option<f64>,
    pub pvalue_permutation: Option<f64>,
}

impl HsicEstimate {
    pub fn new(value: f64, r2: f64) -> Self {
        HsicEstimate {
            value,
            r2,
            gamma_shape: None,
            gamma_scale: None,
            null_mean: None,
            null_variance: None,
            pvalue_gamma: None,
            pvalue_permutation: None,
        }
    }
}

fn check_pair(gx: &GramMatrix, gy: &GramMatrix) -> Result<usize> {
    if gx.n() != gy.n() {
        return Err(Error::DimensionMismatch { expected: gx.n(), found: gy.n() });
    }
    Ok(gx.n())
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.len() });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("weights must be finite"));
    }
    Ok(())
}

/// Weighted row means `m_i = (1/n) Σ_r w_r G_ir` and `g = wᵀ G w / n²`.
pub(crate) fn weighted_row_means(g: &[f64], n: usize, w: &[f64]) -> (Vec<f64>, f64) {
    let nf = n as f64;
    let m: Vec<f64> = (0..n).map(|i| dot(&g[i * n..(i + 1) * n], w) / nf).collect();
    let total = dot(&m, w) / nf;
    (m, total)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// (1/n²) Σ_i w_i Σ_j w_j K_ij (L_ij − m_i − m_j + g), the expanded trace form.
fn weighted_core(k: &[f64], l: &[f64], n: usize, w: &[f64]) -> f64 {
    let (m, g) = weighted_row_means(l, n, w);
    let mut total = 0.0;
    for i in 0..n {
        let (kr, lr) = (&k[i * n..(i + 1) * n], &l[i * n..(i + 1) * n]);
        let c = g - m[i];
        let mut row = 0.0;
        for j in 0..n {
            row += w[j] * kr[j] * (lr[j] - m[j] + c);
        }
        total += w[i] * row;
    }
    let nf = n as f64;
    total / (nf * nf)
}

/// V-statistic `(1/n²) Tr(K H L H)` with `H` the centering matrix.
pub fn hsic_v(gram_x: &GramMatrix, gram_y: &GramMatrix) -> Result<f64> {
    let n = check_pair(gram_x, gram_y)?;
    Ok(weighted_core(gram_x.entries(), gram_y.entries(), n, &alloc::vec![1.0; n]))
}

/// The same estimator as [`hsic_v`] written as three plain sums; O(n³).
pub fn hsic_v_naive(gram_x: &GramMatrix, gram_y: &GramMatrix) -> Result<f64> {
    let n = check_pair(gram_x, gram_y)?;
    let nf = n as f64;
    let (mut s1, mut sk, mut sl, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s1 += gram_x.get(i, j) * gram_y.get(i, j);
            sk += gram_x.get(i, j);
            sl += gram_y.get(i, j);
            for r in 0..n {
                s3 += gram_x.get(i, j) * gram_y.get(i, r);
            }
        }
    }
    Ok(s1 / (nf * nf) + sk * sl / (nf * nf * nf * nf) - 2.0 * s3 / (nf * nf * nf))
}

/// `hxy / sqrt(hxx · hyy)`.
pub fn r2_hsic(hxy: f64, hxx: f64, hyy: f64) -> Result<f64> {
    if !(hxx > 0.0) || !(hyy > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "R² normaliser not positive (HSIC(X,X) = {hxx}, HSIC(Y,Y) = {hyy}): constant input or output"
        )));
    }
    Ok(hxy / libm::sqrt(hxx * hyy))
}

/// Importance-weighted V-statistic `(1/n²) Tr(W K W H₁ L H₂)` with
/// `H₁ = I − UW/n`, `H₂ = I − WU/n`. Unit weights reproduce [`hsic_v`]
/// bit for bit.
pub fn weighted_hsic(gram_x: &GramMatrix, gram_y: &GramMatrix, weights: &[f64]) -> Result<f64> {
    let n = check_pair(gram_x, gram_y)?;
    check_weights(weights, n)?;
    Ok(weighted_core(gram_x.entries(), gram_y.entries(), n, weights))
}

/// The weighted estimator as `H¹ + H² H³ − 2 H⁴`, each term a plain
/// weighted V-statistic; O(n³).
pub fn weighted_hsic_naive(gram_x: &GramMatrix, gram_y: &GramMatrix, weights: &[f64]) -> Result<f64> {
    let n = check_pair(gram_x, gram_y)?;
    check_weights(weights, n)?;
    let w = weights;
    let nf = n as f64;
    let (mut h1, mut h2, mut h3, mut h4) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let ww = w[i] * w[j];
            h1 += ww * gram_x.get(i, j) * gram_y.get(i, j);
            h2 += ww * gram_x.get(i, j);
            h3 += ww * gram_y.get(i, j);
            for r in 0..n {
                h4 += ww * w[r] * gram_x.get(i, j) * gram_y.get(i, r);
            }
        }
    }
    let n2 = nf * nf;
    Ok(h1 / n2 + (h2 / n2) * (h3 / n2) - 2.0 * h4 / (n2 * nf))
}

/// Weighted R² index; all three HSIC terms use the same weights.
pub fn weighted_r2(gram_x: &GramMatrix, gram_y: &GramMatrix, weights: &[f64]) -> Result<f64> {
    let hxy = weighted_hsic(gram_x, gram_y, weights)?;
    let hxx = weighted_hsic(gram_x, gram_x, weights)?;
    let hyy = weighted_hsic(gram_y, gram_y, weights)?;
    r2_hsic(hxy, hxx, hyy)
}
