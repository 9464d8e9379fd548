//! Kernels, Gram matrices and bandwidth rules.
//!
//! Three characteristic kernel families are provided: the Gaussian kernel on
//! real vectors, the MMD-based Gaussian kernel on one-dimensional probability
//! laws ([`mmd`]) and the Mallows kernel on rankings ([`rank`]).

use alloc::format;
use alloc::vec::Vec;

use crate::math::{median, population_variance};
use crate::{Error, Result};

mod mmd;
mod rank;

pub use mmd::{
    distribution_bandwidth, distribution_gram, distribution_kernel, mmd_squared, MmdEmbedding,
};
pub use rank::{discordant_pairs, mallows_bandwidth, mallows_gram, mallows_kernel, Ranking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Gaussian,
    DistributionMmd,
    Mallows,
}

/// How a kernel's bandwidth λ is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandwidthRule {
    /// λ given explicitly.
    Fixed,
    /// λ = 1 / empirical variance of the sample.
    InverseVariance,
    /// λ = 1 / median of the pairwise squared distances.
    InverseMedian,
    /// λ = 1 / s², s² the mean squared MMD to the averaged law.
    MmdSk2,
    /// λ = 1 / mean number of discordant pairs.
    MallowsMeanDiscordance,
}

/// Kernel family, bandwidth and the rule producing it. `bandwidth` is `None`
/// until the rule has been applied to data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Option<f64>,
    pub rule: BandwidthRule,
}

impl KernelSpec {
    /// Gaussian kernel with a fixed λ.
    pub fn gaussian(lambda: f64) -> Result<Self> {
        let k = KernelSpec { family: KernelFamily::Gaussian, bandwidth: Some(lambda), rule: BandwidthRule::Fixed };
        k.validate()?;
        Ok(k)
    }

    /// Gaussian kernel whose λ is calibrated on the data by `rule`.
    pub fn gaussian_rule(rule: BandwidthRule) -> Result<Self> {
        let k = KernelSpec { family: KernelFamily::Gaussian, bandwidth: None, rule };
        k.validate()?;
        Ok(k)
    }

    /// Standardized Gaussian kernel (inverse-variance rule).
    pub fn standardized() -> Self {
        KernelSpec { family: KernelFamily::Gaussian, bandwidth: None, rule: BandwidthRule::InverseVariance }
    }

    pub fn mallows() -> Self {
        KernelSpec { family: KernelFamily::Mallows, bandwidth: None, rule: BandwidthRule::MallowsMeanDiscordance }
    }

    pub fn distribution() -> Self {
        KernelSpec { family: KernelFamily::DistributionMmd, bandwidth: None, rule: BandwidthRule::MmdSk2 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.bandwidth {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!("bandwidth must be positive and finite, got {l}")));
            }
        }
        let ok = match self.rule {
            BandwidthRule::Fixed => self.bandwidth.is_some(),
            BandwidthRule::InverseVariance | BandwidthRule::InverseMedian => {
                self.family == KernelFamily::Gaussian
            }
            BandwidthRule::MmdSk2 => self.family == KernelFamily::DistributionMmd,
            BandwidthRule::MallowsMeanDiscordance => self.family == KernelFamily::Mallows,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "bandwidth rule {:?} does not apply to a {:?} kernel",
                self.rule, self.family
            )));
        }
        Ok(())
    }

    /// The resolved λ.
    pub fn lambda(&self) -> Result<f64> {
        self.bandwidth
            .ok_or_else(|| Error::invalid(format!("{:?} bandwidth has not been resolved", self.rule)))
    }

    /// Same kernel with λ set.
    pub fn with_bandwidth(&self, lambda: f64) -> Result<Self> {
        let k = KernelSpec { bandwidth: Some(lambda), ..*self };
        k.validate()?;
        Ok(k)
    }

    /// Resolves a Gaussian kernel's bandwidth on `sample` (no-op when fixed).
    pub fn resolve<P: Point>(&self, sample: &[P]) -> Result<Self> {
        if self.family != KernelFamily::Gaussian {
            return Err(Error::invalid("only Gaussian kernels are resolved on point samples"));
        }
        match self.rule {
            BandwidthRule::Fixed => Ok(*self),
            rule => self.with_bandwidth(standardized_bandwidth(sample, rule)?),
        }
    }
}

/// A point of a kernel's input space.
pub trait Point {
    fn coords(&self) -> &[f64];
}

impl Point for f64 {
    fn coords(&self) -> &[f64] {
        core::slice::from_ref(self)
    }
}

impl Point for Vec<f64> {
    fn coords(&self) -> &[f64] {
        self
    }
}

impl Point for &[f64] {
    fn coords(&self) -> &[f64] {
        self
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-λ‖z − z2‖²)`.
pub fn gaussian_kernel(z: &[f64], z2: &[f64], lambda: f64) -> Result<f64> {
    if z.len() != z2.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: z2.len() });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {lambda}")));
    }
    Ok(libm::exp(-lambda * sq_dist(z, z2)))
}

/// Data-driven Gaussian bandwidth.
///
/// `InverseVariance` uses the population variance (divisor n), summed over
/// coordinates for vector samples; `InverseMedian` uses the median of the
/// squared distances over pairs i < j.
pub fn standardized_bandwidth<P: Point>(sample: &[P], rule: BandwidthRule) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::invalid("bandwidth calibration needs at least two points"));
    }
    let dim = sample[0].coords().len();
    if let Some(p) = sample.iter().find(|p| p.coords().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.coords().len() });
    }
    let spread = match rule {
        BandwidthRule::InverseVariance => (0..dim)
            .map(|c| {
                let col: Vec<f64> = sample.iter().map(|p| p.coords()[c]).collect();
                population_variance(&col)
            })
            .sum(),
        BandwidthRule::InverseMedian => {
            let n = sample.len();
            let mut d = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    d.push(sq_dist(sample[i].coords(), sample[j].coords()));
                }
            }
            median(&d)
        }
        other => {
            return Err(Error::invalid(format!("{other:?} is not a point-sample bandwidth rule")))
        }
    };
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::DegenerateSample(format!(
            "{rule:?} bandwidth undefined: sample has no spread"
        )));
    }
    Ok(1.0 / spread)
}

/// Symmetric n×n matrix of kernel evaluations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Vec<f64>,
    kernel: KernelSpec,
}

impl GramMatrix {
    /// Wraps explicit entries; they must form a symmetric n×n matrix.
    pub fn from_entries(n: usize, entries: Vec<f64>, kernel: KernelSpec) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: entries.len() });
        }
        for i in 0..n {
            for j in 0..i {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::invalid(format!("Gram matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("Gram matrix has non-finite entries"));
        }
        Ok(GramMatrix { n, entries, kernel })
    }

    /// Fills the upper triangle with `f(i, j)` (i ≤ j) and mirrors it.
    pub(crate) fn symmetric_from_fn(n: usize, kernel: KernelSpec, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        GramMatrix { n, entries, kernel }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 1.0)
    }

    /// True when every entry equals the first one.
    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(|&v| v == self.entries[0])
    }

    /// The Gram matrix of the reordered sample `perm[0], perm[1], ...`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        GramMatrix { n, entries, kernel: self.kernel }
    }
}

/// Gaussian Gram matrix of `sample`; the kernel's bandwidth must be resolved.
pub fn gram_matrix<P: Point>(sample: &[P], kernel: &KernelSpec) -> Result<GramMatrix> {
    if sample.is_empty() {
        return Err(Error::invalid("Gram matrix of an empty sample"));
    }
    if kernel.family != KernelFamily::Gaussian {
        return Err(Error::invalid(format!("gram_matrix takes point samples, not {:?} kernels", kernel.family)));
    }
    kernel.validate()?;
    let lambda = kernel.lambda()?;
    let dim = sample[0].coords().len();
    if let Some(p) = sample.iter().find(|p| p.coords().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.coords().len() });
    }
    Ok(GramMatrix::symmetric_from_fn(sample.len(), *kernel, |i, j| {
        libm::exp(-lambda * sq_dist(sample[i].coords(), sample[j].coords()))
    }))
}

/// Gram matrix of real vectors under the standardized Gaussian kernel:
/// `λ = 1 / Σ_c Var(coordinate c)` (population variances over the points).
/// A point set with no spread gives the all-ones matrix.
pub fn standardized_vector_gram(points: &[Vec<f64>]) -> Result<GramMatrix> {
    if points.is_empty() {
        return Err(Error::invalid("Gram matrix of an empty sample"));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite coordinate in kernel input"));
    }
    let spread: f64 = (0..dim)
        .map(|c| {
            let col: Vec<f64> = points.iter().map(|p| p[c]).collect();
            population_variance(&col)
        })
        .sum();
    let lambda = if spread > 0.0 { 1.0 / spread } else { 1.0 };
    let kernel = KernelSpec { family: KernelFamily::Gaussian, bandwidth: Some(lambda), rule: BandwidthRule::InverseVariance };
    Ok(GramMatrix::symmetric_from_fn(points.len(), kernel, |i, j| {
        libm::exp(-lambda * sq_dist(&points[i], &points[j]))
    }))
}
