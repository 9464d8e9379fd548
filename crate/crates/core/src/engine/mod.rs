//! Second-level sensitivity analysis: quantities of interest computed from
//! first-level HSIC results, distribution draws, and the single-loop and
//! double-loop estimators of second-level HSIC indices.

use alloc::format;
use alloc::vec::Vec;

use crate::densities::WeightVector;
use crate::exec::Executor;
use crate::hsic::FirstLevel;
use crate::kernels::Ranking;
use crate::{Error, Result};

mod draws;
mod gsa2;

pub use draws::{sample_draws, DistributionDraw, DrawRecord, DrawSampling};
pub use gsa2::{
    double_loop_gsa2, second_level, second_level_hsic, second_level_r2, single_loop_gsa2, single_loop_qois,
    target_first_level, Calibration, Gsa2Config, Gsa2Result, LoopKind, QoiBatch, SampleSource, SecondLevel,
};

/// Which first-level summary feeds the second level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QoiOption {
    /// Vector of R² indices.
    R2,
    /// Inputs ordered by decreasing R².
    Ranking,
    /// Gamma-approximation p-values.
    GammaPvalues,
    /// Permutation-test p-values with `b` permutations.
    PermutationPvalues { b: usize },
}

impl QoiOption {
    /// Default number of permutations for permutation p-values.
    pub const DEFAULT_PERMUTATIONS: usize = 300;

    pub fn tag(&self) -> QoiTag {
        match self {
            QoiOption::R2 => QoiTag::R2,
            QoiOption::Ranking => QoiTag::Ranking,
            QoiOption::GammaPvalues => QoiTag::GammaPvalues,
            QoiOption::PermutationPvalues { .. } => QoiTag::PermutationPvalues,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QoiTag {
    R2,
    Ranking,
    GammaPvalues,
    PermutationPvalues,
}

/// One first-level result summarised as a quantity of interest.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantityOfInterest {
    R2(Vec<f64>),
    Ranking(Ranking),
    GammaPvalues(Vec<f64>),
    PermutationPvalues(Vec<f64>),
}

impl QuantityOfInterest {
    pub fn tag(&self) -> QoiTag {
        match self {
            QuantityOfInterest::R2(_) => QoiTag::R2,
            QuantityOfInterest::Ranking(_) => QoiTag::Ranking,
            QuantityOfInterest::GammaPvalues(_) => QoiTag::GammaPvalues,
            QuantityOfInterest::PermutationPvalues(_) => QoiTag::PermutationPvalues,
        }
    }

    /// Real-vector payload, `None` for rankings.
    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            QuantityOfInterest::R2(v) | QuantityOfInterest::GammaPvalues(v) | QuantityOfInterest::PermutationPvalues(v) => {
                Some(v)
            }
            QuantityOfInterest::Ranking(_) => None,
        }
    }

    pub fn as_ranking(&self) -> Option<&Ranking> {
        match self {
            QuantityOfInterest::Ranking(r) => Some(r),
            _ => None,
        }
    }
}

/// Inputs ordered by decreasing R²; ties go to the smaller input index.
pub fn ranking_from_r2(r2: &[f64]) -> Result<Ranking> {
    if r2.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot rank NaN indices"));
    }
    let mut idx: Vec<usize> = (0..r2.len()).collect();
    // stable sort keeps ascending index order among equal values
    idx.sort_by(|&a, &b| r2[b].total_cmp(&r2[a]));
    Ranking::new(idx)
}

/// Quantity of interest from cached first-level Gram matrices, under the
/// target law encoded by `weights` (`None`: the sample's own law).
/// Permutation p-values use seeds derived from `seed`.
pub fn compute_qoi<E: Executor>(
    first: &FirstLevel,
    weights: Option<&WeightVector>,
    option: QoiOption,
    seed: u64,
    exec: &E,
) -> Result<QuantityOfInterest> {
    Ok(match option {
        QoiOption::R2 => QuantityOfInterest::R2(first.r2(weights)?),
        QoiOption::Ranking => QuantityOfInterest::Ranking(ranking_from_r2(&first.r2(weights)?)?),
        QoiOption::GammaPvalues => {
            QuantityOfInterest::GammaPvalues(first.gamma_tests(weights)?.iter().map(|t| t.pvalue).collect())
        }
        QoiOption::PermutationPvalues { b } => QuantityOfInterest::PermutationPvalues(
            first.permutation_tests(weights, b, seed, exec)?.iter().map(|t| t.pvalue).collect(),
        ),
    })
}

/// Fraction of `results` equal to `reference`.
pub fn good_ranking_rate(results: &[Ranking], reference: &Ranking) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::invalid("good ranking rate of an empty list"));
    }
    if let Some(r) = results.iter().find(|r| r.len() != reference.len()) {
        return Err(Error::DimensionMismatch { expected: reference.len(), found: r.len() });
    }
    Ok(results.iter().filter(|r| *r == reference).count() as f64 / results.len() as f64)
}

/// [`good_ranking_rate`] of index vectors, each ranked by [`ranking_from_r2`].
pub fn good_ranking_rate_r2(results: &[Vec<f64>], reference: &Ranking) -> Result<f64> {
    let ranks = results.iter().map(|v| ranking_from_r2(v)).collect::<Result<Vec<_>>>()?;
    good_ranking_rate(&ranks, reference).map_err(|e| match e {
        Error::DimensionMismatch { .. } => Error::invalid(format!("index vectors must have {} entries", reference.len())),
        e => e,
    })
}
