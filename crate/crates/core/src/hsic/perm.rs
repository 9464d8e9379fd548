use alloc::vec::Vec;

use rand::Rng;

use super::{check_pair, check_weights, weighted_row_means};
use crate::exec::Executor;
use crate::kernels::GramMatrix;
use crate::rng::stream_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestMethod {
    GammaAsymptotic,
    Permutation,
}

/// Outcome of an independence test; `statistic` is `n · HSIC`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub method: TestMethod,
    /// Number of permutations, for permutation tests.
    pub resamples: Option<usize>,
}

/// How importance weights behave when the input column is permuted.
#[derive(Debug, Clone, Copy)]
pub enum PermutationWeights<'a> {
    Unweighted,
    /// `ω_k` moves with the permuted input value, `ω_{-k}` stays with its
    /// row. This keeps each factor attached to the variable it reweights.
    Factors { omega_k: &'a [f64], omega_minus_k: &'a [f64] },
    /// The whole row weight moves with the input value.
    Full(&'a [f64]),
}

// Weighted HSIC of the input Gram reindexed by `perm` against the output Gram.
fn permuted_hsic(k: &[f64], l: &[f64], n: usize, perm: &[usize], w: &[f64]) -> f64 {
    let (m, g) = weighted_row_means(l, n, w);
    let mut total = 0.0;
    for i in 0..n {
        let kr = &k[perm[i] * n..(perm[i] + 1) * n];
        let lr = &l[i * n..(i + 1) * n];
        let c = g - m[i];
        let mut row = 0.0;
        for j in 0..n {
            row += w[j] * kr[perm[j]] * (lr[j] - m[j] + c);
        }
        total += w[i] * row;
    }
    let nf = n as f64;
    total / (nf * nf)
}

fn shuffle<R: Rng>(rng: &mut R, v: &mut [usize]) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Permutation test: the input sample is shuffled `b` times (the output
/// stays in place) and `p = #{HSIC_perm > HSIC_obs} / b`. Permutation `t`
/// uses random stream `t` of `seed`, so the result does not depend on the
/// executor.
pub fn permutation_pvalue<E: Executor>(
    gram_x: &GramMatrix,
    gram_y: &GramMatrix,
    weights: PermutationWeights<'_>,
    b: usize,
    seed: u64,
    exec: &E,
) -> Result<TestResult> {
    let n = check_pair(gram_x, gram_y)?;
    if b < 1 {
        return Err(Error::invalid("permutation test needs at least one permutation"));
    }
    let (a, rest): (Vec<f64>, Vec<f64>) = match weights {
        PermutationWeights::Unweighted => (alloc::vec![1.0; n], alloc::vec![1.0; n]),
        PermutationWeights::Factors { omega_k, omega_minus_k } => {
            check_weights(omega_k, n)?;
            check_weights(omega_minus_k, n)?;
            (omega_k.to_vec(), omega_minus_k.to_vec())
        }
        PermutationWeights::Full(w) => {
            check_weights(w, n)?;
            (w.to_vec(), alloc::vec![1.0; n])
        }
    };
    let (k, l) = (gram_x.entries(), gram_y.entries());
    let identity: Vec<usize> = (0..n).collect();
    let w: Vec<f64> = a.iter().zip(&rest).map(|(x, y)| x * y).collect();
    let observed = permuted_hsic(k, l, n, &identity, &w);
    let exceed = exec.map(b, |t| {
        let mut rng = stream_rng(seed, t as u64);
        let mut perm = identity.clone();
        shuffle(&mut rng, &mut perm);
        let wp: Vec<f64> = (0..n).map(|i| a[perm[i]] * rest[i]).collect();
        permuted_hsic(k, l, n, &perm, &wp) > observed
    });
    let count = exceed.iter().filter(|&&e| e).count();
    Ok(TestResult {
        statistic: n as f64 * observed,
        pvalue: count as f64 / b as f64,
        method: TestMethod::Permutation,
        resamples: Some(b),
    })
}
