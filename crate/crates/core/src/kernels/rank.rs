use alloc::format;
use alloc::vec::Vec;

use super::{BandwidthRule, GramMatrix, KernelFamily, KernelSpec};
use crate::{Error, Result};

/// Ordering of `d` inputs by influence: `perm[k] = j` means input `j` is the
/// `k`-th most influential. Stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    perm: Vec<usize>,
}

impl Ranking {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let d = perm.len();
        let mut seen = alloc::vec![false; d];
        for &j in &perm {
            if j >= d || seen[j] {
                return Err(Error::invalid(format!("{perm:?} is not a permutation of 0..{d}")));
            }
            seen[j] = true;
        }
        Ok(Ranking { perm })
    }

    /// From 1-based labels, e.g. `[2, 1, 3]`.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::invalid("1-based ranking contains 0"));
        }
        Ranking::new(labels.iter().map(|j| j - 1).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.perm.iter().map(|j| j + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

/// Number of position pairs r < s on which the two rankings disagree in order.
pub fn discordant_pairs(sigma1: &Ranking, sigma2: &Ranking) -> Result<usize> {
    let (a, b) = (&sigma1.perm, &sigma2.perm);
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let mut count = 0;
    for r in 0..a.len() {
        for s in r + 1..a.len() {
            if (a[r] < a[s]) != (b[r] < b[s]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// `exp(-λ · n_D(σ1, σ2))`.
pub fn mallows_kernel(sigma1: &Ranking, sigma2: &Ranking, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {lambda}")));
    }
    Ok(libm::exp(-lambda * discordant_pairs(sigma1, sigma2)? as f64))
}

/// Inverse of the mean discordance over all pairs i < j.
pub fn mallows_bandwidth(rankings: &[Ranking]) -> Result<f64> {
    let n = rankings.len();
    if n < 2 {
        return Err(Error::invalid("Mallows bandwidth needs at least two rankings"));
    }
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += discordant_pairs(&rankings[i], &rankings[j])?;
        }
    }
    if total == 0 {
        return Err(Error::DegenerateSample("all rankings are identical".into()));
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(pairs / total as f64)
}

/// Mallows Gram matrix; `lambda = None` applies the mean-discordance rule.
pub fn mallows_gram(rankings: &[Ranking], lambda: Option<f64>) -> Result<GramMatrix> {
    if rankings.is_empty() {
        return Err(Error::invalid("Gram matrix of an empty sample"));
    }
    let d = rankings[0].len();
    if let Some(r) = rankings.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: r.len() });
    }
    let (lambda, rule) = match lambda {
        Some(l) => (l, BandwidthRule::Fixed),
        None => (mallows_bandwidth(rankings)?, BandwidthRule::MallowsMeanDiscordance),
    };
    let kernel = KernelSpec { family: KernelFamily::Mallows, bandwidth: Some(lambda), rule };
    kernel.validate()?;
    Ok(GramMatrix::symmetric_from_fn(rankings.len(), kernel, |i, j| {
        let nd = discordant_pairs(&rankings[i], &rankings[j]).expect("lengths checked");
        libm::exp(-lambda * nd as f64)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn r(v: &[usize]) -> Ranking {
        Ranking::from_one_based(v).unwrap()
    }

    #[test]
    fn ranking_validation() {
        assert!(Ranking::new(alloc::vec![0, 0, 1]).is_err());
        assert!(Ranking::new(alloc::vec![0, 3, 1]).is_err());
        assert_eq!(r(&[2, 1, 3]).one_based(), alloc::vec![2, 1, 3]);
    }

    #[test]
    fn discordance_examples() {
        assert_eq!(discordant_pairs(&r(&[2, 3, 1]), &r(&[2, 3, 1])).unwrap(), 0);
        assert_eq!(discordant_pairs(&r(&[1, 2, 3]), &r(&[3, 2, 1])).unwrap(), 3);
        assert_eq!(discordant_pairs(&r(&[1, 2, 3]), &r(&[2, 1, 3])).unwrap(), 1);
        assert!(discordant_pairs(&r(&[1, 2]), &r(&[1, 2, 3])).is_err());
    }

    #[test]
    fn mallows_examples() {
        assert_eq!(mallows_kernel(&r(&[3, 1, 2]), &r(&[3, 1, 2]), 0.7).unwrap(), 1.0);
        assert_abs_diff_eq!(mallows_kernel(&r(&[1, 2, 3]), &r(&[2, 1, 3]), 1.0).unwrap(), libm::exp(-1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(
            mallows_kernel(&r(&[1, 2, 3]), &r(&[3, 2, 1]), 0.5).unwrap(),
            0.223_130_160_148_429_8,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bandwidth_examples() {
        assert_abs_diff_eq!(mallows_bandwidth(&[r(&[1, 2, 3]), r(&[3, 2, 1])]).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mallows_bandwidth(&[r(&[1, 2]), r(&[1, 2]), r(&[2, 1])]).unwrap(), 1.5, epsilon = 1e-15);
        assert!(matches!(mallows_bandwidth(&[r(&[1, 2]), r(&[1, 2])]), Err(Error::DegenerateSample(_))));
    }
}
