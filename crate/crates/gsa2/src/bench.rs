//! Replication studies: estimator dispersion and good-ranking rates over a
//! grid of sample sizes, and the single- versus double-loop comparison at a
//! fixed simulation budget.
//!
//! Replication `r` of grid point `s` runs with seed
//! `derive_seed(seed, [s, r])`, so each study is reproducible bit for bit
//! whatever the number of workers.

use std::fmt::Write as _;
use std::path::Path;

use gsa2_core::densities::{likelihood_weights, sample_product, DistributionEnsemble, ProductDensity};
use gsa2_core::engine::{
    double_loop_gsa2, ranking_from_r2, single_loop_gsa2, target_first_level, Calibration, Gsa2Config, LoopKind,
    SampleSource,
};
use gsa2_core::hsic::{streaming_r2, FirstLevel, SampleSet};
use gsa2_core::kernels::{BandwidthRule, KernelSpec, Ranking};
use gsa2_core::math;
use gsa2_core::models::{evaluate, Model};
use gsa2_core::rng::derive_seed;
use gsa2_core::{Executor, Serial};
use serde::Serialize;

use crate::error::{AppError, Result};

// stream tags keeping reference runs apart from replications
const REFERENCE_TAG: u64 = 1 << 32;

/// The estimator a study replicates.
#[derive(Debug, Clone)]
pub enum Estimator {
    /// First-level R² under `target` from samples drawn under `drawing`.
    Gsa1 {
        drawing: ProductDensity,
        target: ProductDensity,
        input_kernel: KernelSpec,
        output_kernel: KernelSpec,
        calibration: Calibration,
    },
    /// Second-level R²; the study size is the shared-sample size (single
    /// loop) or the inner-sample size (double loop).
    Gsa2 { ensemble: DistributionEnsemble, engine: Gsa2Config, kind: LoopKind },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Gsa1 { .. } => "gsa1",
            Estimator::Gsa2 { kind: LoopKind::Single, .. } => "gsa2-single",
            Estimator::Gsa2 { kind: LoopKind::Double, .. } => "gsa2-double",
        }
    }

    /// Index estimates of one replication of size `n`. Replications run in
    /// parallel, so the estimator itself runs serially.
    pub fn estimate(&self, model: &dyn Model, n: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            Estimator::Gsa1 { drawing, target, input_kernel, output_kernel, calibration } => {
                let cols = sample_product(drawing, n, seed)?;
                let y = evaluate(model, &cols, &Serial);
                let w = likelihood_weights(&cols, target, drawing)?;
                let s = SampleSet::new(cols, y)?;
                let first = FirstLevel::new(&s, &[*input_kernel], output_kernel)?;
                let own = match calibration {
                    Calibration::Target => target_first_level(&s, &first, &w, &[*input_kernel], output_kernel)?,
                    Calibration::Drawing => None,
                };
                Ok(own.as_ref().unwrap_or(&first).r2((!w.is_unit()).then_some(&w))?)
            }
            Estimator::Gsa2 { ensemble, engine, kind } => {
                let mut cfg = engine.clone();
                cfg.n2 = n;
                cfg.seed = seed;
                let r = match kind {
                    LoopKind::Single => single_loop_gsa2(ensemble, SampleSource::Model(model), &cfg, &Serial)?,
                    LoopKind::Double => double_loop_gsa2(ensemble, model, &cfg, &Serial)?,
                };
                Ok(r.r2())
            }
        }
    }
}

/// Replication statistics at one sample size. Standard deviations use the
/// n − 1 divisor.
#[derive(Debug, Clone, Serialize)]
pub struct SizeStats {
    pub n: usize,
    pub replications: usize,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub q05: Vec<f64>,
    pub median: Vec<f64>,
    pub q95: Vec<f64>,
    pub good_ranking_rate: f64,
    pub seeds: Vec<u64>,
    #[serde(skip)]
    pub estimates: Vec<Vec<f64>>,
}

fn stats(n: usize, seeds: Vec<u64>, estimates: Vec<Vec<f64>>, reference: &Ranking) -> Result<SizeStats> {
    let d = reference.len();
    let col = |k: usize| estimates.iter().map(|e| e[k]).collect::<Vec<_>>();
    let per = |f: &dyn Fn(&[f64]) -> f64| (0..d).map(|k| f(&col(k))).collect::<Vec<_>>();
    let ranks = estimates.iter().map(|e| ranking_from_r2(e)).collect::<gsa2_core::Result<Vec<_>>>()?;
    let good = gsa2_core::engine::good_ranking_rate(&ranks, reference)?;
    Ok(SizeStats {
        n,
        replications: estimates.len(),
        mean: per(&math::mean),
        sd: per(&|v| math::sample_variance(v).map_or(0.0, f64::sqrt)),
        q05: per(&|v| math::quantile(v, 0.05)),
        median: per(&|v| math::quantile(v, 0.5)),
        q95: per(&|v| math::quantile(v, 0.95)),
        good_ranking_rate: good,
        seeds,
        estimates,
    })
}

/// How the reference ranking was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    /// 1-based input labels, most influential first.
    pub ranking: Vec<usize>,
    pub note: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl ReferenceInfo {
    pub fn given(r: &Ranking) -> Self {
        ReferenceInfo { ranking: r.one_based(), note: "given in the configuration".into(), scores: None }
    }

    pub fn ranking(&self) -> Ranking {
        Ranking::from_one_based(&self.ranking).expect("reference labels form a permutation")
    }
}

/// Reference ranking from large runs averaged over `seeds` seeds: classical
/// R² on direct target samples of size `n` for first-level studies, the
/// double loop with `n` inner samples for second-level ones.
pub fn reference_ranking<E: Executor>(
    estimator: &Estimator,
    model: &dyn Model,
    n: usize,
    seeds: usize,
    seed: u64,
    exec: &E,
) -> Result<ReferenceInfo> {
    if seeds == 0 {
        return Err(AppError::config("study.reference_seeds", "must be at least 1"));
    }
    let runs = exec.map(seeds, |s| -> Result<Vec<f64>> {
        let sd = derive_seed(seed, &[REFERENCE_TAG, s as u64]);
        match estimator {
            Estimator::Gsa1 { target, .. } => {
                let cols = sample_product(target, n, sd)?;
                let y = evaluate(model, &cols, &Serial);
                Ok(streaming_r2(&cols, &y, BandwidthRule::InverseVariance)?)
            }
            Estimator::Gsa2 { ensemble, engine, .. } => {
                let mut cfg = engine.clone();
                cfg.n2 = n;
                cfg.seed = sd;
                Ok(double_loop_gsa2(ensemble, model, &cfg, &Serial)?.r2())
            }
        }
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let d = runs[0].len();
    let scores: Vec<f64> = (0..d).map(|k| runs.iter().map(|r| r[k]).sum::<f64>() / seeds as f64).collect();
    let note = match estimator {
        Estimator::Gsa1 { .. } => format!("classical R² on direct target samples, n = {n}, mean of {seeds} seeds"),
        Estimator::Gsa2 { .. } => format!("double-loop second-level R², {n} inner samples, mean of {seeds} seeds"),
    };
    Ok(ReferenceInfo { ranking: ranking_from_r2(&scores)?.one_based(), note, scores: Some(scores) })
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub estimator: &'static str,
    pub seed: u64,
    pub reference: ReferenceInfo,
    pub sizes: Vec<SizeStats>,
}

fn replicate<E: Executor>(
    estimator: &Estimator,
    model: &dyn Model,
    n: usize,
    replications: usize,
    seeds: Vec<u64>,
    exec: &E,
) -> Result<Vec<Vec<f64>>> {
    debug_assert_eq!(seeds.len(), replications);
    exec.map(replications, |r| estimator.estimate(model, n, seeds[r])).into_iter().collect()
}

/// Runs `replications` fresh estimates at every size of `sizes`.
pub fn convergence_study<E: Executor>(
    estimator: &Estimator,
    model: &dyn Model,
    sizes: &[usize],
    replications: usize,
    reference: ReferenceInfo,
    seed: u64,
    exec: &E,
) -> Result<StudyReport> {
    if sizes.is_empty() {
        return Err(AppError::config("study.sizes", "size grid is empty"));
    }
    if replications == 0 {
        return Err(AppError::config("study.replications", "must be at least 1"));
    }
    let rank = reference.ranking();
    let mut out = Vec::with_capacity(sizes.len());
    for (s, &n) in sizes.iter().enumerate() {
        let seeds: Vec<u64> = (0..replications).map(|r| derive_seed(seed, &[s as u64, r as u64])).collect();
        let est = replicate(estimator, model, n, replications, seeds.clone(), exec)?;
        out.push(stats(n, seeds, est, &rank)?);
    }
    Ok(StudyReport { estimator: estimator.name(), seed, reference, sizes: out })
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetReport {
    pub budget: usize,
    pub n1: usize,
    /// Inner-sample size of the double loop, `budget / n1`.
    pub n2_inner: usize,
    pub seed: u64,
    pub reference: ReferenceInfo,
    pub single: SizeStats,
    pub double: SizeStats,
}

/// Single loop with `budget` model calls against the double loop with
/// `n1` draws of `budget / n1` calls each; both replicated with the same
/// per-replication seeds.
pub fn budget_comparison<E: Executor>(
    ensemble: &DistributionEnsemble,
    engine: &Gsa2Config,
    model: &dyn Model,
    budget: usize,
    replications: usize,
    reference: ReferenceInfo,
    seed: u64,
    exec: &E,
) -> Result<BudgetReport> {
    let n1 = engine.n1;
    if n1 == 0 || budget % n1 != 0 {
        return Err(AppError::config("study.budget", format!("budget {budget} is not a multiple of n1 = {n1}")));
    }
    if replications == 0 {
        return Err(AppError::config("study.replications", "must be at least 1"));
    }
    let inner = budget / n1;
    let rank = reference.ranking();
    let seeds: Vec<u64> = (0..replications).map(|r| derive_seed(seed, &[0, r as u64])).collect();
    let single = Estimator::Gsa2 { ensemble: ensemble.clone(), engine: engine.clone(), kind: LoopKind::Single };
    let double = Estimator::Gsa2 { ensemble: ensemble.clone(), engine: engine.clone(), kind: LoopKind::Double };
    let double_est = replicate(&double, model, inner, replications, seeds.clone(), exec)?;
    let single_est = replicate(&single, model, budget, replications, seeds.clone(), exec)?;
    Ok(BudgetReport {
        budget,
        n1,
        n2_inner: inner,
        seed,
        reference,
        single: stats(budget, seeds.clone(), single_est, &rank)?,
        double: stats(inner, seeds, double_est, &rank)?,
    })
}

/// Per-replication table: `rep,seed,est_1..est_d,ranking,good`.
pub fn write_size_csv(path: &Path, s: &SizeStats, reference: &Ranking) -> Result<()> {
    let d = reference.len();
    let mut out = String::from("rep,seed");
    for k in 1..=d {
        let _ = write!(out, ",est_{k}");
    }
    out.push_str(",ranking,good\n");
    for (r, (e, seed)) in s.estimates.iter().zip(&s.seeds).enumerate() {
        let _ = write!(out, "{},{seed}", r + 1);
        for v in e {
            let _ = write!(out, ",{v:?}");
        }
        let rank = ranking_from_r2(e)?;
        let labels: Vec<String> = rank.one_based().iter().map(usize::to_string).collect();
        let _ = writeln!(out, ",{},{}", labels.join("-"), u8::from(rank == *reference));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    std::fs::write(path, out).map_err(|e| AppError::io(path, e))
}
