use alloc::format;
use alloc::vec::Vec;

use super::moments::{gamma_moments_classical, gamma_moments_weighted, gamma_test, MomentEstimates};
use super::perm::{permutation_pvalue, PermutationWeights, TestResult};
use super::{check_weights, r2_hsic, weighted_row_means, SampleSet};
use crate::densities::{weight_diagnostic, WeightVector};
use crate::exec::Executor;
use crate::kernels::{gram_matrix, standardized_bandwidth, BandwidthRule, GramMatrix, KernelSpec};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// `HSIC(X_k, Y)`, `HSIC(X_k, X_k)` and `HSIC(Y, Y)` for one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsicTriple {
    pub hxy: f64,
    pub hxx: f64,
    pub hyy: f64,
}

impl HsicTriple {
    pub fn r2(&self) -> Result<f64> {
        r2_hsic(self.hxy, self.hxx, self.hyy)
    }
}

/// Gram matrices of one sample, computed once and reused for any number of
/// reweightings (first-level analyses under many target laws).
#[derive(Debug, Clone)]
pub struct FirstLevel {
    inputs: Vec<GramMatrix>,
    output: GramMatrix,
}

impl FirstLevel {
    /// Resolves each kernel's bandwidth on its own column. `input_kernels`
    /// holds one spec per input, or a single spec shared by all inputs.
    pub fn new(sample: &SampleSet, input_kernels: &[KernelSpec], output_kernel: &KernelSpec) -> Result<Self> {
        let d = sample.dim();
        if input_kernels.len() != d && input_kernels.len() != 1 {
            return Err(Error::DimensionMismatch { expected: d, found: input_kernels.len() });
        }
        let inputs = (0..d)
            .map(|k| {
                let spec = input_kernels[if input_kernels.len() == 1 { 0 } else { k }];
                let col = sample.column(k);
                let spec = spec.resolve(col).map_err(|e| match e {
                    Error::DegenerateSample(r) => Error::DegenerateSample(format!("input {}: {r}", k + 1)),
                    e => e,
                })?;
                gram_matrix(col, &spec)
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = output_kernel.resolve(sample.outputs()).map_err(|e| match e {
            Error::DegenerateSample(r) => Error::DegenerateSample(format!("output: {r}")),
            e => e,
        })?;
        let output = gram_matrix(sample.outputs(), &spec)?;
        Ok(FirstLevel { inputs, output })
    }

    pub fn from_grams(inputs: Vec<GramMatrix>, output: GramMatrix) -> Result<Self> {
        if let Some(g) = inputs.iter().find(|g| g.n() != output.n()) {
            return Err(Error::DimensionMismatch { expected: output.n(), found: g.n() });
        }
        if inputs.is_empty() {
            return Err(Error::invalid("no input Gram matrices"));
        }
        Ok(FirstLevel { inputs, output })
    }

    pub fn n(&self) -> usize {
        self.output.n()
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_gram(&self, k: usize) -> &GramMatrix {
        &self.inputs[k]
    }

    pub fn output_gram(&self) -> &GramMatrix {
        &self.output
    }

    /// All HSIC triples in one pass over the Gram matrices; `None` means
    /// unit weights. Values equal [`super::weighted_hsic`] bit for bit.
    pub fn triples(&self, weights: Option<&[f64]>) -> Result<Vec<HsicTriple>> {
        let n = self.n();
        let ones;
        let w = match weights {
            Some(w) => {
                check_weights(w, n)?;
                w
            }
            None => {
                ones = alloc::vec![1.0; n];
                &ones
            }
        };
        let d = self.dim();
        let l = self.output.entries();
        let (ml, gl) = weighted_row_means(l, n, w);
        let mk: Vec<(Vec<f64>, f64)> = self.inputs.iter().map(|g| weighted_row_means(g.entries(), n, w)).collect();
        let mut sxy = alloc::vec![0.0; d];
        let mut sxx = alloc::vec![0.0; d];
        let mut syy = 0.0;
        let mut rxy = alloc::vec![0.0; d];
        let mut rxx = alloc::vec![0.0; d];
        for i in 0..n {
            let lr = &l[i * n..(i + 1) * n];
            let cl = gl - ml[i];
            let mut ryy = 0.0;
            for j in 0..n {
                ryy += w[j] * lr[j] * (lr[j] - ml[j] + cl);
            }
            syy += w[i] * ryy;
            for k in 0..d {
                let kr = &self.inputs[k].entries()[i * n..(i + 1) * n];
                let (mkk, gk) = (&mk[k].0, mk[k].1);
                let ck = gk - mkk[i];
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..n {
                    let t = w[j] * kr[j];
                    a += t * (lr[j] - ml[j] + cl);
                    b += t * (kr[j] - mkk[j] + ck);
                }
                rxy[k] = a;
                rxx[k] = b;
                sxy[k] += w[i] * rxy[k];
                sxx[k] += w[i] * rxx[k];
            }
        }
        let n2 = (n * n) as f64;
        Ok((0..d).map(|k| HsicTriple { hxy: sxy[k] / n2, hxx: sxx[k] / n2, hyy: syy / n2 }).collect())
    }

    /// R² index of every input. With weights, a non-positive normaliser is
    /// reported together with the variance of each weight factor.
    pub fn r2(&self, weights: Option<&WeightVector>) -> Result<Vec<f64>> {
        let triples = self.triples(weights.map(|w| w.values.as_slice()))?;
        triples
            .iter()
            .enumerate()
            .map(|(k, t)| match (t.r2(), weights) {
                (Ok(v), _) => Ok(v),
                (Err(Error::DegenerateSample(reason)), Some(w)) if !w.is_unit() => Err(Error::DegenerateEstimate {
                    reason: format!("input {}: {reason}", k + 1),
                    weight_variances: weight_diagnostic(w).unwrap_or_default(),
                }),
                (Err(Error::DegenerateSample(reason)), _) => {
                    Err(Error::DegenerateSample(format!("input {}: {reason}", k + 1)))
                }
                (Err(e), _) => Err(e),
            })
            .collect()
    }

    /// Null moments per input: weighted plug-ins when weights are given,
    /// classical ones otherwise.
    pub fn moments(&self, weights: Option<&WeightVector>) -> Result<Vec<MomentEstimates>> {
        (0..self.dim())
            .map(|k| match weights {
                Some(w) if !w.is_unit() => {
                    gamma_moments_weighted(&self.inputs[k], &self.output, w.omega_k(k), &w.omega_minus_k(k))
                }
                _ => gamma_moments_classical(&self.inputs[k], &self.output),
            })
            .collect()
    }

    /// Gamma-approximation test of every input.
    pub fn gamma_tests(&self, weights: Option<&WeightVector>) -> Result<Vec<TestResult>> {
        let triples = self.triples(weights.map(|w| w.values.as_slice()))?;
        let moments = self.moments(weights)?;
        triples.iter().zip(&moments).map(|(t, m)| gamma_test(t.hxy, self.n(), m)).collect()
    }

    /// Permutation test of every input with `b` permutations; input `k` uses
    /// the seed derived from `(seed, k)`.
    pub fn permutation_tests<E: Executor>(
        &self,
        weights: Option<&WeightVector>,
        b: usize,
        seed: u64,
        exec: &E,
    ) -> Result<Vec<TestResult>> {
        (0..self.dim())
            .map(|k| {
                let s = derive_seed(seed, &[k as u64]);
                match weights {
                    Some(w) if !w.is_unit() => {
                        let rest = w.omega_minus_k(k);
                        permutation_pvalue(
                            &self.inputs[k],
                            &self.output,
                            PermutationWeights::Factors { omega_k: w.omega_k(k), omega_minus_k: &rest },
                            b,
                            s,
                            exec,
                        )
                    }
                    _ => permutation_pvalue(&self.inputs[k], &self.output, PermutationWeights::Unweighted, b, s, exec),
                }
            })
            .collect()
    }
}

/// Classical R² indices of scalar inputs against a scalar output without
/// storing any Gram matrix: kernel values are recomputed in two O(n²)
/// passes, so memory stays O(n) for large reference runs.
pub fn streaming_r2(columns: &[Vec<f64>], outputs: &[f64], rule: BandwidthRule) -> Result<Vec<f64>> {
    let n = outputs.len();
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: c.len() });
    }
    let d = columns.len();
    let lam_x = columns.iter().map(|c| standardized_bandwidth(c, rule)).collect::<Result<Vec<_>>>()?;
    let lam_y = standardized_bandwidth(outputs, rule)?;
    let kern = |v: &[f64], lam: f64, i: usize, j: usize| {
        let t = v[i] - v[j];
        libm::exp(-lam * t * t)
    };
    let nf = n as f64;
    // pass 1: row means (unit diagonal included)
    let mut mx = alloc::vec![alloc::vec![1.0; n]; d];
    let mut my = alloc::vec![1.0; n];
    for i in 0..n {
        for j in 0..i {
            let v = kern(outputs, lam_y, i, j);
            my[i] += v;
            my[j] += v;
            for k in 0..d {
                let v = kern(&columns[k], lam_x[k], i, j);
                mx[k][i] += v;
                mx[k][j] += v;
            }
        }
    }
    for m in mx.iter_mut().chain(core::iter::once(&mut my)) {
        m.iter_mut().for_each(|v| *v /= nf);
    }
    let gy: f64 = my.iter().sum::<f64>() / nf;
    let gx: Vec<f64> = mx.iter().map(|m| m.iter().sum::<f64>() / nf).collect();
    // pass 2: Σ_ij K_ij (L_ij − m_i − m_j + g), off-diagonal pairs twice
    let mut sxy = alloc::vec![0.0; d];
    let mut sxx = alloc::vec![0.0; d];
    let mut syy = 0.0;
    for i in 0..n {
        let cy = |j: usize, l: f64| l - my[i] - my[j] + gy;
        syy += cy(i, 1.0);
        for k in 0..d {
            sxy[k] += cy(i, 1.0);
            sxx[k] += 1.0 - 2.0 * mx[k][i] + gx[k];
        }
        for j in 0..i {
            let l = kern(outputs, lam_y, i, j);
            syy += 2.0 * l * cy(j, l);
            for k in 0..d {
                let kv = kern(&columns[k], lam_x[k], i, j);
                sxy[k] += 2.0 * kv * cy(j, l);
                sxx[k] += 2.0 * kv * (kv - mx[k][i] - mx[k][j] + gx[k]);
            }
        }
    }
    (0..d).map(|k| r2_hsic(sxy[k], sxx[k], syy)).collect()
}
