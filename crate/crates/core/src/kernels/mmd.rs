use alloc::format;
use alloc::vec::Vec;

use super::{BandwidthRule, GramMatrix, KernelFamily, KernelSpec};
use crate::densities::UnivariateDensity;
use crate::quadrature::{QuadGrid, QuadratureSpec};
use crate::{Error, Result};

/// Quadrature embedding of densities sharing one support: a density `p`
/// maps to the vector `e[m] = w_m p(z_m)` over the rule's nodes, and mean
/// embeddings' inner products become `eᵀ G f` with `G` the base-kernel Gram
/// matrix of the nodes.
#[derive(Debug, Clone)]
pub struct MmdEmbedding {
    grid: QuadGrid,
    support: (f64, f64),
    base: Vec<f64>,
    tolerance: f64,
}

fn same_support(a: (f64, f64), b: (f64, f64)) -> bool {
    let tol = 1e-12 * (a.1 - a.0).abs().max(1.0);
    (a.0 - b.0).abs() <= tol && (a.1 - b.1).abs() <= tol
}

impl MmdEmbedding {
    /// Rule for `densities`, split at all their breakpoints. All densities
    /// must share a support; the base kernel must be a resolved Gaussian.
    pub fn new(densities: &[&UnivariateDensity], base_kernel: &KernelSpec, scheme: &QuadratureSpec) -> Result<Self> {
        scheme.validate()?;
        if base_kernel.family != KernelFamily::Gaussian {
            return Err(Error::invalid("MMD base kernel must be Gaussian"));
        }
        let lambda = base_kernel.lambda()?;
        let first = densities.first().ok_or_else(|| Error::invalid("no densities to embed"))?;
        let support = first.support();
        if let Some(d) = densities.iter().find(|d| !same_support(d.support(), support)) {
            let (a, b) = d.support();
            return Err(Error::SupportMismatch(format!(
                "[{a}, {b}] differs from [{}, {}]",
                support.0, support.1
            )));
        }
        let breaks: Vec<f64> = densities.iter().flat_map(|d| d.breakpoints()).collect();
        let grid = QuadGrid::composite(support.0, support.1, &breaks, scheme.nodes);
        let m = grid.len();
        let mut base = alloc::vec![0.0; m * m];
        for i in 0..m {
            base[i * m + i] = 1.0;
            for j in 0..i {
                let t = grid.nodes[i] - grid.nodes[j];
                let v = libm::exp(-lambda * t * t);
                base[i * m + j] = v;
                base[j * m + i] = v;
            }
        }
        Ok(MmdEmbedding { grid, support, base, tolerance: scheme.tolerance })
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn embed(&self, q: &UnivariateDensity) -> Result<Vec<f64>> {
        if !same_support(q.support(), self.support) {
            return Err(Error::SupportMismatch("density outside the embedding's support".into()));
        }
        Ok(self.grid.nodes.iter().zip(&self.grid.weights).map(|(&z, &w)| w * q.pdf(z)).collect())
    }

    /// `G e`.
    pub fn apply(&self, e: &[f64]) -> Vec<f64> {
        let m = self.grid.len();
        (0..m).map(|i| dot(&self.base[i * m..(i + 1) * m], e)).collect()
    }

    /// Squared MMD between two embeddings, difference form.
    pub fn distance_sq(&self, e1: &[f64], e2: &[f64]) -> Result<f64> {
        let d: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a - b).collect();
        self.clamp(dot(&d, &self.apply(&d)))
    }

    /// Clamps small negative quadrature noise to 0; larger negative values
    /// mean the rule is broken.
    fn clamp(&self, raw: f64) -> Result<f64> {
        if raw >= 0.0 {
            Ok(raw)
        } else if -raw <= self.tolerance {
            Ok(0.0)
        } else {
            Err(Error::numerical(format!("negative squared MMD {raw} beyond quadrature tolerance")))
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `E K(Z1, Z1') − 2 E K(Z1, Z2) + E K(Z2, Z2')` by tensor Gauss-Legendre
/// quadrature on the common support.
pub fn mmd_squared(
    q1: &UnivariateDensity,
    q2: &UnivariateDensity,
    base_kernel: &KernelSpec,
    scheme: &QuadratureSpec,
) -> Result<f64> {
    let emb = MmdEmbedding::new(&[q1, q2], base_kernel, scheme)?;
    emb.distance_sq(&emb.embed(q1)?, &emb.embed(q2)?)
}

/// `exp(-λ · MMD²(q1, q2))`.
pub fn distribution_kernel(
    q1: &UnivariateDensity,
    q2: &UnivariateDensity,
    base_kernel: &KernelSpec,
    lambda: f64,
    scheme: &QuadratureSpec,
) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {lambda}")));
    }
    Ok(libm::exp(-lambda * mmd_squared(q1, q2, base_kernel, scheme)?))
}

// Distinct densities of `draws` and the index of each draw among them.
fn dedup(draws: &[UnivariateDensity]) -> (Vec<&UnivariateDensity>, Vec<usize>) {
    let mut uniq: Vec<&UnivariateDensity> = Vec::new();
    let idx = draws
        .iter()
        .map(|d| match uniq.iter().position(|u| *u == d) {
            Some(p) => p,
            None => {
                uniq.push(d);
                uniq.len() - 1
            }
        })
        .collect();
    (uniq, idx)
}

struct Embedded {
    emb: MmdEmbedding,
    // per distinct density: embedding, G·embedding, squared norm
    vecs: Vec<Vec<f64>>,
    applied: Vec<Vec<f64>>,
    norms: Vec<f64>,
    idx: Vec<usize>,
    counts: Vec<usize>,
}

fn embed_all(draws: &[UnivariateDensity], base_kernel: &KernelSpec, scheme: &QuadratureSpec) -> Result<Embedded> {
    let (uniq, idx) = dedup(draws);
    let emb = MmdEmbedding::new(&uniq, base_kernel, scheme)?;
    let vecs = uniq.iter().map(|u| emb.embed(u)).collect::<Result<Vec<_>>>()?;
    let applied: Vec<Vec<f64>> = vecs.iter().map(|e| emb.apply(e)).collect();
    let norms = vecs.iter().zip(&applied).map(|(e, g)| dot(e, g)).collect();
    let mut counts = alloc::vec![0; uniq.len()];
    for &i in &idx {
        counts[i] += 1;
    }
    Ok(Embedded { emb, vecs, applied, norms, idx, counts })
}

impl Embedded {
    fn pair(&self, u: usize, v: usize) -> Result<f64> {
        if u == v {
            return Ok(0.0);
        }
        self.emb.clamp(self.norms[u] + self.norms[v] - 2.0 * dot(&self.vecs[u], &self.applied[v]))
    }

    // (1/n²) Σ_i MMD²(P_i, P†), P† the average of the draws.
    fn spread(&self) -> Result<f64> {
        let n = self.idx.len() as f64;
        let m = self.emb.nodes();
        let mut avg = alloc::vec![0.0; m];
        for (e, &c) in self.vecs.iter().zip(&self.counts) {
            let w = c as f64 / n;
            for (a, x) in avg.iter_mut().zip(e) {
                *a += w * x;
            }
        }
        let mut total = 0.0;
        for (e, &c) in self.vecs.iter().zip(&self.counts) {
            total += c as f64 * self.emb.distance_sq(e, &avg)?;
        }
        Ok(total / (n * n))
    }
}

/// `λ = 1 / s²` with `s² = (1/n²) Σ_i MMD²(P_i, P†)` and `P†` the uniform
/// mixture of the `n` candidates.
pub fn distribution_bandwidth(
    candidates: &[UnivariateDensity],
    base_kernel: &KernelSpec,
    scheme: &QuadratureSpec,
) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(Error::invalid("distribution bandwidth needs at least two laws"));
    }
    let s2 = embed_all(candidates, base_kernel, scheme)?.spread()?;
    if !(s2 > 0.0) {
        return Err(Error::DegenerateSample("all laws are identical: MMD spread is zero".into()));
    }
    Ok(1.0 / s2)
}

/// Gram matrix of the distribution kernel over `draws`. With `lambda = None`
/// the bandwidth is `distribution_bandwidth(draws)`. Repeated laws are
/// embedded once.
pub fn distribution_gram(
    draws: &[UnivariateDensity],
    base_kernel: &KernelSpec,
    lambda: Option<f64>,
    scheme: &QuadratureSpec,
) -> Result<GramMatrix> {
    if draws.is_empty() {
        return Err(Error::invalid("Gram matrix of an empty sample"));
    }
    let e = embed_all(draws, base_kernel, scheme)?;
    let (lambda, rule) = match lambda {
        Some(l) => (l, BandwidthRule::Fixed),
        None => {
            if draws.len() < 2 {
                return Err(Error::invalid("distribution bandwidth needs at least two laws"));
            }
            let s2 = e.spread()?;
            if !(s2 > 0.0) {
                return Err(Error::DegenerateSample("all laws are identical: MMD spread is zero".into()));
            }
            (1.0 / s2, BandwidthRule::MmdSk2)
        }
    };
    let kernel = KernelSpec { family: KernelFamily::DistributionMmd, bandwidth: Some(lambda), rule };
    kernel.validate()?;
    let u = e.vecs.len();
    let mut kd = alloc::vec![0.0; u * u];
    for a in 0..u {
        for b in 0..a {
            let v = libm::exp(-lambda * e.pair(a, b)?);
            kd[a * u + b] = v;
            kd[b * u + a] = v;
        }
        kd[a * u + a] = 1.0;
    }
    Ok(GramMatrix::symmetric_from_fn(draws.len(), kernel, |i, j| kd[e.idx[i] * u + e.idx[j]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn u01() -> UnivariateDensity {
        UnivariateDensity::uniform(0.0, 1.0).unwrap()
    }

    fn t04() -> UnivariateDensity {
        UnivariateDensity::triangular(0.0, 1.0, 0.4).unwrap()
    }

    fn k1() -> KernelSpec {
        KernelSpec::gaussian(1.0).unwrap()
    }

    #[test]
    fn same_law_is_zero() {
        let q = QuadratureSpec::default();
        let t = t04();
        assert_eq!(mmd_squared(&t, &t, &k1(), &q).unwrap(), 0.0);
        assert!(mmd_squared(&u01(), &u01(), &k1(), &q).unwrap() <= 1e-6);
        assert_eq!(distribution_kernel(&t, &t, &k1(), 2.0, &q).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        let q = QuadratureSpec::default();
        let wide = UnivariateDensity::uniform(0.0, 2.0).unwrap();
        assert!(matches!(mmd_squared(&u01(), &wide, &k1(), &q), Err(Error::SupportMismatch(_))));
        let bad = QuadratureSpec { nodes: 1, ..q };
        assert!(mmd_squared(&u01(), &t04(), &k1(), &bad).is_err());
        assert!(distribution_bandwidth(&[u01(), u01()], &k1(), &q).is_err());
    }

    #[test]
    fn symmetric() {
        let q = QuadratureSpec::default();
        let a = mmd_squared(&u01(), &t04(), &k1(), &q).unwrap();
        let b = mmd_squared(&t04(), &u01(), &k1(), &q).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn uniform_vs_triangular_matches_fine_quadrature() {
        // independent evaluation: 2000×2000 midpoint double sum of
        // (p − q)(z) (p − q)(z') exp(−(z − z')²)
        let (p, t) = (u01(), t04());
        let n = 2000;
        let h = 1.0 / n as f64;
        let z: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let diff: Vec<f64> = z.iter().map(|&x| (p.pdf(x) - t.pdf(x)) * h).collect();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += diff[i] * diff[j] * libm::exp(-(z[i] - z[j]).powi(2));
            }
        }
        let got = mmd_squared(&p, &t, &k1(), &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(got, s, epsilon = 1e-7);
    }

    #[test]
    fn kernel_from_given_mmd() {
        assert_abs_diff_eq!(libm::exp(-5.0 * 0.2), 0.367_879_441_171_442_3, epsilon = 1e-15);
        let q = QuadratureSpec::default();
        let m = mmd_squared(&u01(), &t04(), &k1(), &q).unwrap();
        let k = distribution_kernel(&u01(), &t04(), &k1(), 3.0, &q).unwrap();
        assert_abs_diff_eq!(k, libm::exp(-3.0 * m), epsilon = 1e-15);
    }

    #[test]
    fn bandwidth_two_candidates() {
        use crate::densities::{mixture_density, EnsembleEntry};
        let q = QuadratureSpec::default();
        let mix = mixture_density(&EnsembleEntry::finite(alloc::vec![u01(), t04()], None).unwrap()).unwrap();
        // via the tabulated mixture, on a fine single-panel rule
        let fine = QuadratureSpec { nodes: 1024, ..q };
        let s2 = 0.25 * (mmd_squared(&u01(), &mix, &k1(), &fine).unwrap() + mmd_squared(&t04(), &mix, &k1(), &fine).unwrap());
        let lam = distribution_bandwidth(&[u01(), t04()], &k1(), &q).unwrap();
        assert_abs_diff_eq!(1.0 / lam, s2, epsilon = 1e-5 * s2);
        // both candidates sit at the same distance MMD/2 from the mixture
        let m = mmd_squared(&u01(), &t04(), &k1(), &q).unwrap();
        assert_abs_diff_eq!(1.0 / lam, 0.25 * 2.0 * m / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicating_candidates_scales_spread_by_half() {
        // s² carries a 1/n² prefactor over n terms, so it halves when each
        // law is repeated once (same mixture, same per-law distances).
        let q = QuadratureSpec::default();
        let n_t = UnivariateDensity::truncated_normal(0.0, 1.0, 0.6, 0.2).unwrap();
        let once = [u01(), t04(), n_t.clone()];
        let twice = [u01(), t04(), n_t, u01(), t04(), UnivariateDensity::truncated_normal(0.0, 1.0, 0.6, 0.2).unwrap()];
        let a = 1.0 / distribution_bandwidth(&once, &k1(), &q).unwrap();
        let b = 1.0 / distribution_bandwidth(&twice, &k1(), &q).unwrap();
        assert_abs_diff_eq!(b, a / 2.0, epsilon = 1e-12 * a);
    }

    #[test]
    fn gram_entries_match_pairwise_kernel() {
        let q = QuadratureSpec::default();
        let n_t = UnivariateDensity::truncated_normal(0.0, 1.0, 0.6, 0.2).unwrap();
        let draws = [u01(), t04(), n_t.clone(), t04(), u01()];
        let g = distribution_gram(&draws, &k1(), Some(4.0), &q).unwrap();
        assert!(g.has_unit_diagonal());
        for i in 0..5 {
            for j in 0..5 {
                let direct = distribution_kernel(&draws[i], &draws[j], &k1(), 4.0, &q).unwrap();
                assert_abs_diff_eq!(g.get(i, j), direct, epsilon = 1e-12);
            }
        }
        let auto = distribution_gram(&draws, &k1(), None, &q).unwrap();
        let lam = distribution_bandwidth(&draws, &k1(), &q).unwrap();
        assert_abs_diff_eq!(auto.kernel().bandwidth.unwrap(), lam, epsilon = 1e-12 * lam);
    }
}
