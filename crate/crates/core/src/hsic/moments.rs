//! Null-distribution moments of the HSIC estimators and the Gamma test.
//!
//! Under independence `n · HSIC` is approximately Gamma distributed; its
//! shape and scale follow from the estimator's null mean `e` and variance
//! `v` as `γ = e²/v`, `β = n v / e`.

use alloc::format;
use alloc::vec::Vec;

use super::{check_pair, check_weights, dot};
use crate::kernels::GramMatrix;
use crate::math::gamma_q;
use crate::{Error, Result};

/// Plug-in estimates of the expectation terms of the weighted estimator's
/// null mean and variance, with the assembled mean and variance.
///
/// With `a = ω_k`, `b = ω_{-k}` and `w = a·b`:
/// `e_omega = mean(w²)`, `e_omega_k = mean(a²)`, `e_omega_minus_k = mean(b²)`,
/// `e_xk` / `e_y` are off-diagonal pair means of `K_ij a_i a_j` / `L_ij b_i b_j`,
/// and `e_xk_omega` / `e_y_omega` the same with `a_i²` / `b_i²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimates {
    pub e_omega: f64,
    pub e_xk: f64,
    pub e_y: f64,
    pub e_xk_omega: f64,
    pub e_y_omega: f64,
    pub e_omega_k: f64,
    pub e_omega_minus_k: f64,
    /// Off-diagonal mean of `E_{3,4}[h̃(i, j, 3, 4)]²`.
    pub variance_core: f64,
    /// Null mean of the estimator.
    pub mean: f64,
    /// Null variance of the estimator.
    pub variance: f64,
    /// Set when the weighted plug-ins were unusable and the classical
    /// moments of the unweighted Gram matrices were substituted.
    pub fallback: bool,
}

impl MomentEstimates {
    pub fn gamma_shape(&self) -> f64 {
        self.mean * self.mean / self.variance
    }

    /// Scale of the Gamma law of `n · HSIC`.
    pub fn gamma_scale(&self, n: usize) -> f64 {
        n as f64 * self.variance / self.mean
    }
}

fn variance_factor(n: usize) -> f64 {
    let nf = n as f64;
    72.0 * (nf - 4.0) * (nf - 5.0) / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0))
}

fn require_unit_diagonal(g: &GramMatrix, name: &str) -> Result<()> {
    if !g.has_unit_diagonal() {
        return Err(Error::invalid(format!("{name} kernel must have a unit diagonal")));
    }
    Ok(())
}

// Off-diagonal mean of a Gram matrix.
fn offdiag_mean(g: &GramMatrix) -> f64 {
    let n = g.n();
    let total: f64 = g.entries().iter().sum();
    let diag: f64 = (0..n).map(|i| g.get(i, i)).sum();
    (total - diag) / (n * (n - 1)) as f64
}

/// Classical null moments of `hsic_v` for kernels with a unit diagonal:
/// mean `(1 + μx μy − μx − μy)/n` from off-diagonal Gram means, variance
/// `72(n−4)(n−5)/(n(n−1)(n−2)(n−3))` times the off-diagonal mean of
/// `(Kc ∘ Lc / 6)²` with `Kc = HKH`, `Lc = HLH`.
pub fn gamma_moments_classical(gram_x: &GramMatrix, gram_y: &GramMatrix) -> Result<MomentEstimates> {
    let n = check_pair(gram_x, gram_y)?;
    if n < 4 {
        return Err(Error::invalid("Gamma moments need n ≥ 4"));
    }
    require_unit_diagonal(gram_x, "input")?;
    require_unit_diagonal(gram_y, "output")?;
    let nf = n as f64;
    let (k, l) = (gram_x.entries(), gram_y.entries());
    let rk: Vec<f64> = (0..n).map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>() / nf).collect();
    let rl: Vec<f64> = (0..n).map(|i| l[i * n..(i + 1) * n].iter().sum::<f64>() / nf).collect();
    let k0 = rk.iter().sum::<f64>() / nf;
    let l0 = rl.iter().sum::<f64>() / nf;
    let mut core = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let kc = k[i * n + j] - rk[i] - rk[j] + k0;
            let lc = l[i * n + j] - rl[i] - rl[j] + l0;
            let t = kc * lc / 6.0;
            core += t * t;
        }
    }
    core /= nf * (nf - 1.0);
    let mx = offdiag_mean(gram_x);
    let my = offdiag_mean(gram_y);
    let mean = (1.0 + mx * my - mx - my) / nf;
    Ok(MomentEstimates {
        e_omega: 1.0,
        e_xk: mx,
        e_y: my,
        e_xk_omega: mx,
        e_y_omega: my,
        e_omega_k: 1.0,
        e_omega_minus_k: 1.0,
        variance_core: core,
        mean,
        variance: variance_factor(n) * core,
        fallback: false,
    })
}

/// Plug-in null moments of the weighted estimator for input factor
/// `omega_k` and complementary factor `omega_minus_k` (the full weight is
/// their product).
///
/// The mean is the O(1/n) bias expression (the estimand is 0 under
/// independence). The variance core is computed exactly in O(n²): for each
/// pair (i, j) the inner expectation over two further points drawn
/// independently on the input and output sides has a closed form in the
/// weighted row means of the two Gram matrices. If either moment comes out
/// non-positive, the classical moments of the unweighted Grams are returned
/// with `fallback` set.
pub fn gamma_moments_weighted(
    gram_x: &GramMatrix,
    gram_y: &GramMatrix,
    omega_k: &[f64],
    omega_minus_k: &[f64],
) -> Result<MomentEstimates> {
    let n = check_pair(gram_x, gram_y)?;
    if n < 6 {
        return Err(Error::invalid("weighted Gamma moments need n ≥ 6"));
    }
    check_weights(omega_k, n)?;
    check_weights(omega_minus_k, n)?;
    require_unit_diagonal(gram_x, "input")?;
    require_unit_diagonal(gram_y, "output")?;
    let (a, b) = (omega_k, omega_minus_k);
    let (k, l) = (gram_x.entries(), gram_y.entries());
    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    let w: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / nf;
    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<f64>>();
    let (a2, b2) = (sq(a), sq(b));

    // κ_i = (1/n) Σ_q a_q K_iq and friends
    let kap: Vec<f64> = (0..n).map(|i| dot(&k[i * n..(i + 1) * n], a) / nf).collect();
    let lam: Vec<f64> = (0..n).map(|i| dot(&l[i * n..(i + 1) * n], b) / nf).collect();
    let kap0 = dot(&kap, a) / nf;
    let lam0 = dot(&lam, b) / nf;

    let e_omega = mean_of(&sq(&w));
    let e_omega_k = mean_of(&a2);
    let e_omega_minus_k = mean_of(&b2);
    // unit diagonal: Σ_{i≠j} K_ij a_i a_j = n² κ0 − Σ a_i²
    let e_xk = (nf * nf * kap0 - a2.iter().sum::<f64>()) / pairs;
    let e_y = (nf * nf * lam0 - b2.iter().sum::<f64>()) / pairs;
    let a3: f64 = a.iter().map(|x| x * x * x).sum();
    let b3: f64 = b.iter().map(|x| x * x * x).sum();
    let e_xk_omega = (nf * dot(&a2, &kap) - a3) / pairs;
    let e_y_omega = (nf * dot(&b2, &lam) - b3) / pairs;

    let mean = 2.0 / nf * (e_omega_k - e_xk_omega) * (e_omega_minus_k - e_y_omega)
        - 1.0 / nf * (e_omega - e_xk) * (e_omega - e_y)
        + 1.0 / nf * e_omega * (e_omega - 1.0);

    let abar = mean_of(a);
    let bbar = mean_of(b);
    let cross = 2.0 * abar * bbar - 1.0;
    let single: Vec<f64> = (0..n)
        .map(|i| w[i] * ((2.0 - abar * bbar) * kap[i] * lam[i] - abar * kap[i] * lam0 - bbar * kap0 * lam[i]))
        .collect();
    let (ka, lb) = (abar * abar * lam0, bbar * bbar * kap0);
    let mut core = 0.0;
    for i in 0..n {
        let (kr, lr) = (&k[i * n..(i + 1) * n], &l[i * n..(i + 1) * n]);
        let mut row = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let (kij, lij) = (kr[j], lr[j]);
            let paired = kij * lij + ka * kij + lb * lij + cross * (kap[i] * lam[j] + kap[j] * lam[i])
                - abar * kij * (lam[i] + lam[j])
                - bbar * lij * (kap[i] + kap[j]);
            let g = (w[i] * w[j] * paired + single[i] + single[j] + kap0 * lam0) / 6.0;
            row += g * g;
        }
        core += row;
    }
    core /= pairs;
    let variance = variance_factor(n) * core;

    if !(mean > 0.0) || !(variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
        let mut m = gamma_moments_classical(gram_x, gram_y)?;
        m.fallback = true;
        return Ok(m);
    }
    Ok(MomentEstimates {
        e_omega,
        e_xk,
        e_y,
        e_xk_omega,
        e_y_omega,
        e_omega_k,
        e_omega_minus_k,
        variance_core: core,
        mean,
        variance,
        fallback: false,
    })
}

/// Upper tail `1 − F(statistic)` of the Gamma law with the given shape and scale.
pub fn gamma_pvalue(statistic: f64, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0) || !(scale > 0.0) || !shape.is_finite() || !scale.is_finite() {
        return Err(Error::invalid(format!("Gamma parameters must be positive (shape {shape}, scale {scale})")));
    }
    if statistic.is_nan() {
        return Err(Error::numerical("NaN test statistic"));
    }
    Ok(gamma_q(shape, statistic / scale).clamp(0.0, 1.0))
}

/// Gamma-approximation test of `hsic` (an estimate from `n` rows) given its
/// null moments.
pub fn gamma_test(hsic: f64, n: usize, moments: &MomentEstimates) -> Result<super::perm::TestResult> {
    let statistic = n as f64 * hsic;
    let pvalue = gamma_pvalue(statistic, moments.gamma_shape(), moments.gamma_scale(n))?;
    Ok(super::perm::TestResult { statistic, pvalue, method: super::perm::TestMethod::GammaAsymptotic, resamples: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gram_matrix, KernelSpec};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn setup(n: usize, seed: u64) -> (GramMatrix, GramMatrix, Vec<f64>, Vec<f64>) {
        let mut rng = crate::rng::stream_rng(seed, 3);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5 * x[0]).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..2.0)).collect();
        let k = KernelSpec::standardized();
        (
            gram_matrix(&x, &k.resolve(&x).unwrap()).unwrap(),
            gram_matrix(&y, &k.resolve(&y).unwrap()).unwrap(),
            a,
            b,
        )
    }

    #[test]
    fn classical_positive_and_identity() {
        let (gx, gy, _, _) = setup(40, 1);
        let m = gamma_moments_classical(&gx, &gy).unwrap();
        assert!(m.mean > 0.0 && m.variance > 0.0);
        let (g, s, n) = (m.gamma_shape(), m.gamma_scale(40), 40.0);
        assert_abs_diff_eq!(g * s / n, m.mean, epsilon = 1e-15);
        assert_abs_diff_eq!(g * s * s / (n * n), m.variance, epsilon = 1e-18);
    }

    #[test]
    fn weighted_reduces_at_unit_weights() {
        let (gx, gy, _, _) = setup(30, 2);
        let ones = alloc::vec![1.0; 30];
        let w = gamma_moments_weighted(&gx, &gy, &ones, &ones).unwrap();
        let c = gamma_moments_classical(&gx, &gy).unwrap();
        assert_eq!((w.e_omega, w.e_omega_k, w.e_omega_minus_k), (1.0, 1.0, 1.0));
        assert!(!w.fallback);
        assert_abs_diff_eq!(w.mean, c.mean, epsilon = 1e-14);
        assert_abs_diff_eq!(w.variance_core, c.variance_core, epsilon = 1e-14 * c.variance_core);
        assert_abs_diff_eq!(w.e_xk, c.e_xk, epsilon = 1e-14);
    }

    #[test]
    fn pair_means_match_loops() {
        let (gx, gy, a, b) = setup(7, 3);
        let m = gamma_moments_weighted(&gx, &gy, &a, &b).unwrap();
        let (mut exk, mut eyw) = (0.0, 0.0);
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    exk += gx.get(i, j) * a[i] * a[j];
                    eyw += gy.get(i, j) * b[i] * b[i] * b[j];
                }
            }
        }
        assert_abs_diff_eq!(m.e_xk, exk / 42.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.e_y_omega, eyw / 42.0, epsilon = 1e-14);
    }

    // Brute force: E over two extra points (q, q') and (r, r'), input side from
    // the first index, output side from the second, of the weighted symmetrised
    // kernel over all 24 orderings.
    fn core_by_enumeration(gx: &GramMatrix, gy: &GramMatrix, a: &[f64], b: &[f64]) -> f64 {
        let n = gx.n();
        let mut perms = Vec::new();
        for c in 0..256usize {
            let p = [c & 3, (c >> 2) & 3, (c >> 4) & 3, (c >> 6) & 3];
            if (0..4).all(|i| (0..i).all(|j| p[i] != p[j])) {
                perms.push(p);
            }
        }
        assert_eq!(perms.len(), 24);
        let h = |pts: [(usize, usize); 4]| {
            let om: Vec<f64> = pts.iter().map(|p| a[p.0] * b[p.1]).collect();
            let kk = |i: usize, j: usize| gx.get(pts[i].0, pts[j].0);
            let ll = |i: usize, j: usize| gy.get(pts[i].1, pts[j].1);
            let mut s = 0.0;
            for &[t, u, v, w] in &perms {
                s += om[t] * om[u] * kk(t, u) * ll(t, u) + om[t] * om[u] * om[v] * om[w] * kk(t, u) * ll(v, w)
                    - 2.0 * om[t] * om[u] * om[v] * kk(t, u) * ll(t, v);
            }
            s / 24.0
        };
        let mut core = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut g = 0.0;
                for q in 0..n {
                    for q2 in 0..n {
                        for r in 0..n {
                            for r2 in 0..n {
                                g += h([(i, i), (j, j), (q, q2), (r, r2)]);
                            }
                        }
                    }
                }
                g /= (n * n * n * n) as f64;
                core += g * g;
            }
        }
        core / (n * (n - 1)) as f64
    }

    #[test]
    fn variance_core_matches_enumeration() {
        for (n, seed) in [(6, 4), (7, 5)] {
            let (gx, gy, a, b) = setup(n, seed);
            let m = gamma_moments_weighted(&gx, &gy, &a, &b).unwrap();
            let brute = core_by_enumeration(&gx, &gy, &a, &b);
            assert!(!m.fallback);
            assert_abs_diff_eq!(m.variance_core, brute, epsilon = 1e-12 * brute.max(1e-6));
        }
        // unit weights: enumeration reproduces the classical core
        let (gx, gy, _, _) = setup(6, 9);
        let ones = alloc::vec![1.0; 6];
        let c = gamma_moments_classical(&gx, &gy).unwrap();
        assert_abs_diff_eq!(core_by_enumeration(&gx, &gy, &ones, &ones), c.variance_core, epsilon = 1e-14);
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(gamma_pvalue(0.0, 2.0, 3.0).unwrap(), 1.0);
        for x in [0.1, 1.0, 4.0] {
            assert_abs_diff_eq!(gamma_pvalue(x, 1.0, 2.0).unwrap(), libm::exp(-x / 2.0), epsilon = 1e-14);
        }
        assert!(gamma_pvalue(1e6, 2.0, 1.0).unwrap() < 1e-300);
        assert!(gamma_pvalue(1.0, 0.0, 1.0).is_err());
        assert!(gamma_pvalue(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn non_unit_diagonal_rejected() {
        let g = GramMatrix::from_entries(4, alloc::vec![2.0; 16], KernelSpec::gaussian(1.0).unwrap()).unwrap();
        assert!(gamma_moments_classical(&g, &g).is_err());
    }
}
