use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::densities::{DistributionEnsemble, EnsembleEntry, UnivariateDensity};
use crate::rng::{open_unit, stream_rng};
use crate::{Error, Result};

/// How the `n1` input laws are drawn from the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DrawSampling {
    /// Independent draws per input.
    MonteCarlo,
    /// Every combination of candidates once (finite, equiprobable entries).
    Exhaustive,
    /// One draw per stratum of each input's law, strata paired at random.
    LatinHypercube,
}

/// What was drawn for one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DrawRecord {
    /// Index of a finite entry's candidate.
    Candidate(usize),
    /// Parameter value of a family.
    Parameter(f64),
}

/// One law per input.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionDraw {
    pub densities: Vec<UnivariateDensity>,
    pub records: Vec<DrawRecord>,
}

// Realisation of `entry` at probability level `u` ∈ (0, 1).
fn realize(entry: &EnsembleEntry, u: f64) -> Result<(UnivariateDensity, DrawRecord)> {
    match entry {
        EnsembleEntry::Finite { candidates, weights } => {
            let mut acc = 0.0;
            let mut pick = candidates.len() - 1;
            for (r, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = r;
                    break;
                }
            }
            Ok((candidates[pick].clone(), DrawRecord::Candidate(pick)))
        }
        EnsembleEntry::Param(f) => {
            let theta = f.law().quantile(u);
            Ok((f.realize(theta)?, DrawRecord::Parameter(theta)))
        }
    }
}

/// Draws `n1` laws per input, deterministically in `seed`.
///
/// For exhaustive enumeration `n1` must equal the number of combinations;
/// they are listed with the last input varying fastest.
pub fn sample_draws(
    ensemble: &DistributionEnsemble,
    n1: usize,
    sampling: DrawSampling,
    seed: u64,
) -> Result<Vec<DistributionDraw>> {
    if n1 == 0 {
        return Err(Error::invalid("n1 must be at least 1"));
    }
    let entries = ensemble.entries();
    let d = entries.len();
    let mut rng = stream_rng(seed, 1);
    let mut out: Vec<DistributionDraw> =
        (0..n1).map(|_| DistributionDraw { densities: Vec::with_capacity(d), records: Vec::with_capacity(d) }).collect();
    match sampling {
        DrawSampling::MonteCarlo => {
            for draw in out.iter_mut() {
                for e in entries {
                    let (dens, rec) = realize(e, open_unit(&mut rng))?;
                    draw.densities.push(dens);
                    draw.records.push(rec);
                }
            }
        }
        DrawSampling::LatinHypercube => {
            for e in entries {
                let mut strata: Vec<usize> = (0..n1).collect();
                for i in (1..n1).rev() {
                    strata.swap(i, rng.random_range(0..=i));
                }
                for (draw, s) in out.iter_mut().zip(strata) {
                    let u = (s as f64 + open_unit(&mut rng)) / n1 as f64;
                    let (dens, rec) = realize(e, u.min(1.0 - f64::EPSILON))?;
                    draw.densities.push(dens);
                    draw.records.push(rec);
                }
            }
        }
        DrawSampling::Exhaustive => {
            let mut sizes = Vec::with_capacity(d);
            for (k, e) in entries.iter().enumerate() {
                match e {
                    EnsembleEntry::Finite { candidates, weights } => {
                        let u = 1.0 / candidates.len() as f64;
                        if weights.iter().any(|w| (w - u).abs() > 1e-12) {
                            return Err(Error::invalid(format!(
                                "exhaustive draws need equiprobable candidates (input {})",
                                k + 1
                            )));
                        }
                        sizes.push(candidates.len());
                    }
                    EnsembleEntry::Param(_) => {
                        return Err(Error::invalid(format!(
                            "exhaustive draws need finite entries (input {} is a family)",
                            k + 1
                        )))
                    }
                }
            }
            let total: usize = sizes.iter().product();
            if total != n1 {
                return Err(Error::invalid(format!("exhaustive enumeration has {total} combinations, n1 = {n1}")));
            }
            for (t, draw) in out.iter_mut().enumerate() {
                let mut rem = t;
                let mut picks = alloc::vec![0; d];
                for k in (0..d).rev() {
                    picks[k] = rem % sizes[k];
                    rem /= sizes[k];
                }
                for (k, &p) in picks.iter().enumerate() {
                    if let EnsembleEntry::Finite { candidates, .. } = &entries[k] {
                        draw.densities.push(candidates[p].clone());
                        draw.records.push(DrawRecord::Candidate(p));
                    }
                }
            }
        }
    }
    Ok(out)
}
