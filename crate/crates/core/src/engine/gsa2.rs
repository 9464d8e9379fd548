use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::draws::{sample_draws, DistributionDraw, DrawSampling};
use super::{compute_qoi, QoiOption, QoiTag, QuantityOfInterest};
use crate::densities::{
    likelihood_weights, mixture_density, sample_product, weight_diagnostic, DistributionEnsemble, DrawingRule,
    ProductDensity, WeightVector,
};
use crate::exec::{Executor, Serial};
use crate::hsic::{hsic_v, r2_hsic, FirstLevel, SampleSet};
use crate::kernels::{
    distribution_gram, gram_matrix, mallows_gram, standardized_vector_gram, BandwidthRule, GramMatrix, KernelSpec,
    Ranking,
};
use crate::math::weighted_variance;
use crate::models::{evaluate, Model};
use crate::quadrature::QuadratureSpec;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Where the single-loop sample comes from.
#[derive(Clone, Copy)]
pub enum SampleSource<'a> {
    /// Draw `n2` rows from the drawing density and evaluate the model.
    Model(&'a dyn Model),
    /// Use an existing sample. Its recorded drawing law, if any, overrides
    /// the one built from the ensemble.
    Sample(&'a SampleSet),
}

impl core::fmt::Debug for SampleSource<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SampleSource::Model(m) => write!(f, "Model(dim = {})", m.dim()),
            SampleSource::Sample(s) => write!(f, "Sample(n = {})", s.n()),
        }
    }
}

/// Which law data-driven first-level bandwidths refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Calibration {
    /// Each draw's own product law: inverse-variance bandwidths are
    /// recomputed per draw from likelihood-weighted variances (single loop)
    /// or from each inner sample (double loop).
    Target,
    /// The law that generated the data: bandwidths are fixed once on the
    /// shared sample (single loop) or on the pooled inner samples (double
    /// loop).
    Drawing,
}

/// Settings shared by the single-loop and double-loop estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct Gsa2Config {
    /// Number of distribution draws.
    pub n1: usize,
    /// Single loop: size of the shared sample. Double loop: size of each
    /// inner sample.
    pub n2: usize,
    pub rule: DrawingRule,
    pub qoi: QoiOption,
    pub sampling: DrawSampling,
    /// One spec per input, or a single spec shared by all inputs.
    pub input_kernels: Vec<KernelSpec>,
    pub output_kernel: KernelSpec,
    pub calibration: Calibration,
    pub quadrature: QuadratureSpec,
    pub seed: u64,
}

impl Gsa2Config {
    /// Standardized Gaussian kernels, mixture drawing, Monte Carlo draws.
    pub fn new(n1: usize, n2: usize, qoi: QoiOption, seed: u64) -> Self {
        Gsa2Config {
            n1,
            n2,
            rule: DrawingRule::Mixture,
            qoi,
            sampling: DrawSampling::MonteCarlo,
            input_kernels: alloc::vec![KernelSpec::standardized()],
            output_kernel: KernelSpec::standardized(),
            calibration: Calibration::Target,
            quadrature: QuadratureSpec::default(),
            seed,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n2 < 6 {
            return Err(Error::invalid(format!("n2 must be at least 6, got {}", self.n2)));
        }
        if self.n1 == 0 {
            return Err(Error::invalid("n1 must be at least 1"));
        }
        if self.input_kernels.len() != 1 && self.input_kernels.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.input_kernels.len() });
        }
        for k in self.input_kernels.iter().chain([&self.output_kernel]) {
            k.validate()?;
        }
        if let QoiOption::PermutationPvalues { b } = self.qoi {
            if b == 0 {
                return Err(Error::invalid("permutation count must be at least 1"));
            }
        }
        self.quadrature.validate()
    }

    fn input_kernel(&self, k: usize) -> &KernelSpec {
        &self.input_kernels[if self.input_kernels.len() == 1 { 0 } else { k }]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoopKind {
    Single,
    Double,
}

/// Second-level HSIC terms and index for one input law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondLevel {
    pub hsic: f64,
    pub hsic_dist: f64,
    pub hsic_qoi: f64,
    pub r2: f64,
    /// Bandwidth of the distribution kernel.
    pub bandwidth: f64,
}

/// Per-draw QoIs of a single-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct QoiBatch {
    pub qois: Vec<QuantityOfInterest>,
    /// Per draw, unbiased variance of each input's likelihood-ratio factor.
    pub weight_variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gsa2Result {
    pub kind: LoopKind,
    /// One entry per input law.
    pub indices: Vec<SecondLevel>,
    pub n1: usize,
    pub n2: usize,
    pub qoi: QoiTag,
    /// Drawing rule (single loop only).
    pub rule: Option<DrawingRule>,
    pub sampling: DrawSampling,
    pub seed: u64,
    pub draws: Vec<DistributionDraw>,
    pub qois: Vec<QuantityOfInterest>,
    /// Single loop only; empty for the double loop.
    pub weight_variances: Vec<Vec<f64>>,
    /// Number of model evaluations (0 when a sample was supplied).
    pub evaluations: usize,
    /// Bandwidth of the Mallows kernel for ranking QoIs.
    pub qoi_bandwidth: Option<f64>,
}

impl Gsa2Result {
    pub fn hsic(&self) -> Vec<f64> {
        self.indices.iter().map(|s| s.hsic).collect()
    }

    pub fn r2(&self) -> Vec<f64> {
        self.indices.iter().map(|s| s.r2).collect()
    }
}

/// Plain V-statistic HSIC between the distribution Gram and the QoI Gram.
pub fn second_level_hsic(dist_gram: &GramMatrix, qoi_gram: &GramMatrix) -> Result<f64> {
    hsic_v(dist_gram, qoi_gram)
}

pub fn second_level_r2(hxy: f64, hxx: f64, hyy: f64) -> Result<f64> {
    r2_hsic(hxy, hxx, hyy)
}

/// All three HSIC terms and the index.
pub fn second_level(dist_gram: &GramMatrix, qoi_gram: &GramMatrix) -> Result<SecondLevel> {
    let hsic = second_level_hsic(dist_gram, qoi_gram)?;
    let hsic_dist = hsic_v(dist_gram, dist_gram)?;
    let hsic_qoi = hsic_v(qoi_gram, qoi_gram)?;
    let r2 = second_level_r2(hsic, hsic_dist, hsic_qoi)?;
    Ok(SecondLevel { hsic, hsic_dist, hsic_qoi, r2, bandwidth: dist_gram.kernel().bandwidth.unwrap_or(f64::NAN) })
}

fn target_lambda(values: &[f64], w: &[f64], what: &str) -> Result<f64> {
    let v = weighted_variance(values, w);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::degenerate(format!("{what}: weighted variance is {v}")));
    }
    Ok(1.0 / v)
}

fn adapts(spec: &KernelSpec) -> bool {
    spec.bandwidth.is_none() && spec.rule == BandwidthRule::InverseVariance
}

/// First-level Grams whose inverse-variance bandwidths are taken under the
/// target law encoded by `w`: input `k` uses the weighted variance with
/// weights `ω_k`, the output the one with the full weights. Kernels with a
/// fixed bandwidth or another rule keep the Grams of `first`. Returns `None`
/// when nothing differs from `first`.
pub fn target_first_level(
    sample: &SampleSet,
    first: &FirstLevel,
    w: &WeightVector,
    input_kernels: &[KernelSpec],
    output_kernel: &KernelSpec,
) -> Result<Option<FirstLevel>> {
    if w.is_unit() {
        return Ok(None);
    }
    let d = sample.dim();
    if input_kernels.len() != d && input_kernels.len() != 1 {
        return Err(Error::DimensionMismatch { expected: d, found: input_kernels.len() });
    }
    let mut inputs = Vec::with_capacity(d);
    for k in 0..d {
        let spec = &input_kernels[if input_kernels.len() == 1 { 0 } else { k }];
        let omega = w.omega_k(k);
        if adapts(spec) && omega.iter().any(|&v| v != 1.0) {
            let lambda = target_lambda(sample.column(k), omega, &format!("input {}", k + 1))?;
            inputs.push(gram_matrix(sample.column(k), &spec.with_bandwidth(lambda)?)?);
        } else {
            inputs.push(first.input_gram(k).clone());
        }
    }
    let output = if adapts(output_kernel) {
        let lambda = target_lambda(sample.outputs(), &w.values, "output")?;
        gram_matrix(sample.outputs(), &output_kernel.with_bandwidth(lambda)?)?
    } else {
        first.output_gram().clone()
    };
    FirstLevel::from_grams(inputs, output).map(Some)
}

/// QoIs of every draw, from the one sample `sample` reweighted towards each
/// draw's product law. `first` holds the Grams calibrated on the sample
/// itself; under [`Calibration::Target`] the data-driven bandwidths are
/// recomputed per draw.
pub fn single_loop_qois<E: Executor>(
    sample: &SampleSet,
    first: &FirstLevel,
    drawing: &ProductDensity,
    draws: &[DistributionDraw],
    config: &Gsa2Config,
    exec: &E,
) -> Result<QoiBatch> {
    let out = exec.map(draws.len(), |t| -> Result<(QuantityOfInterest, Vec<f64>)> {
        let target = ProductDensity::new(draws[t].densities.clone());
        let w = likelihood_weights(sample.inputs(), &target, drawing)?;
        let diag = weight_diagnostic(&w)?;
        let own = match config.calibration {
            Calibration::Target => target_first_level(sample, first, &w, &config.input_kernels, &config.output_kernel)?,
            Calibration::Drawing => None,
        };
        let fl = own.as_ref().unwrap_or(first);
        let q = compute_qoi(fl, Some(&w), config.qoi, derive_seed(config.seed, &[2, t as u64]), &Serial)?;
        Ok((q, diag))
    });
    let mut qois = Vec::with_capacity(draws.len());
    let mut weight_variances = Vec::with_capacity(draws.len());
    for r in out {
        let (q, v) = r?;
        qois.push(q);
        weight_variances.push(v);
    }
    Ok(QoiBatch { qois, weight_variances })
}

fn qoi_gram(qois: &[QuantityOfInterest]) -> Result<(GramMatrix, Option<f64>)> {
    let g = if let Some(QuantityOfInterest::Ranking(_)) = qois.first() {
        let ranks: Vec<Ranking> = qois
            .iter()
            .map(|q| q.as_ranking().cloned().ok_or_else(|| Error::invalid("mixed QoI kinds")))
            .collect::<Result<_>>()?;
        mallows_gram(&ranks, None).map_err(|e| match e {
            Error::DegenerateSample(r) => Error::degenerate(format!("QoI: {r}")),
            e => e,
        })?
    } else {
        let vecs: Vec<Vec<f64>> = qois
            .iter()
            .map(|q| q.as_vector().map(|v| v.to_vec()).ok_or_else(|| Error::invalid("mixed QoI kinds")))
            .collect::<Result<_>>()?;
        standardized_vector_gram(&vecs)?
    };
    if g.is_constant() {
        return Err(Error::degenerate("QoI: every draw produced the same value"));
    }
    let bw = match g.kernel().rule {
        BandwidthRule::MallowsMeanDiscordance => g.kernel().bandwidth,
        _ => None,
    };
    Ok((g, bw))
}

fn degenerate_input(k: usize, e: Error) -> Error {
    match e {
        Error::DegenerateSample(reason) => Error::DegenerateInput { input: k, reason },
        e => e,
    }
}

// Second level for every input: distribution kernel on draws with base
// kernel `bases[k]`, against the QoI Gram.
fn second_stage<E: Executor>(
    draws: &[DistributionDraw],
    qois: &[QuantityOfInterest],
    bases: &[KernelSpec],
    quadrature: &QuadratureSpec,
    exec: &E,
) -> Result<(Vec<SecondLevel>, Option<f64>)> {
    let d = bases.len();
    if draws.len() < 2 {
        return Err(Error::DegenerateInput { input: 0, reason: "a single distribution draw carries no spread".into() });
    }
    let (qg, bw) = qoi_gram(qois)?;
    let out = exec.map(d, |k| -> Result<SecondLevel> {
        let col: Vec<_> = draws.iter().map(|dr| dr.densities[k].clone()).collect();
        let dg = distribution_gram(&col, &bases[k], None, quadrature).map_err(|e| degenerate_input(k, e))?;
        if dg.is_constant() {
            return Err(Error::DegenerateInput { input: k, reason: "distribution Gram matrix is constant".into() });
        }
        second_level(&dg, &qg).map_err(|e| degenerate_input(k, e))
    });
    Ok((out.into_iter().collect::<Result<Vec<_>>>()?, bw))
}

/// Single-loop second-level analysis: one sample drawn from the ensemble's
/// drawing density serves every distribution draw through likelihood-ratio
/// reweighting. The model is called exactly `n2` times.
pub fn single_loop_gsa2<E: Executor>(
    ensemble: &DistributionEnsemble,
    source: SampleSource<'_>,
    config: &Gsa2Config,
    exec: &E,
) -> Result<Gsa2Result> {
    let d = ensemble.dim();
    config.validate(d)?;
    let built;
    let mut drawing = ensemble.drawing_density(config.rule)?;
    let (sample, evaluations) = match source {
        SampleSource::Model(m) => {
            if m.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
            }
            let cols = sample_product(&drawing, config.n2, config.seed)?;
            let y = evaluate(m, &cols, exec);
            built = SampleSet::new(cols, y)?;
            (&built, config.n2)
        }
        SampleSource::Sample(s) => {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
            }
            if s.n() < 6 {
                return Err(Error::invalid(format!("sample needs at least 6 rows, got {}", s.n())));
            }
            if let Some(g) = s.drawing() {
                drawing = g.clone();
            }
            (s, 0)
        }
    };
    let first = FirstLevel::new(sample, &config.input_kernels, &config.output_kernel)?;
    let draws = sample_draws(ensemble, config.n1, config.sampling, config.seed)?;
    let batch = single_loop_qois(sample, &first, &drawing, &draws, config, exec)?;
    let bases: Vec<KernelSpec> = (0..d).map(|k| *first.input_gram(k).kernel()).collect();
    let (indices, qoi_bandwidth) = second_stage(&draws, &batch.qois, &bases, &config.quadrature, exec)?;
    Ok(Gsa2Result {
        kind: LoopKind::Single,
        indices,
        n1: config.n1,
        n2: sample.n(),
        qoi: config.qoi.tag(),
        rule: Some(config.rule),
        sampling: config.sampling,
        seed: config.seed,
        draws,
        qois: batch.qois,
        weight_variances: batch.weight_variances,
        evaluations,
        qoi_bandwidth,
    })
}

/// Reference double-loop analysis: a fresh sample of size `n2` per
/// distribution draw, classical estimators, `n1 · n2` model calls.
///
/// Data-driven input bandwidths are resolved on each inner sample under
/// [`Calibration::Target`] and on the pooled inner samples under
/// [`Calibration::Drawing`]; the distribution kernel's base bandwidth comes from the
/// ensemble's mixture law so it is common to all draws.
pub fn double_loop_gsa2<E: Executor>(
    ensemble: &DistributionEnsemble,
    model: &dyn Model,
    config: &Gsa2Config,
    exec: &E,
) -> Result<Gsa2Result> {
    let d = ensemble.dim();
    config.validate(d)?;
    if model.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: model.dim() });
    }
    let (n1, n2) = (config.n1, config.n2);
    let draws = sample_draws(ensemble, n1, config.sampling, config.seed)?;
    let mut all: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(n1 * n2); d];
    for (t, dr) in draws.iter().enumerate() {
        let cols = sample_product(&ProductDensity::new(dr.densities.clone()), n2, derive_seed(config.seed, &[3, t as u64]))?;
        for (a, c) in all.iter_mut().zip(cols) {
            a.extend(c);
        }
    }
    let y = evaluate(model, &all, exec);
    let (input_kernels, output_kernel) = match config.calibration {
        Calibration::Target => (config.input_kernels.clone(), config.output_kernel),
        Calibration::Drawing => {
            let pooled = SampleSet::new(all.clone(), y.clone())?;
            let first = FirstLevel::new(&pooled, &config.input_kernels, &config.output_kernel)?;
            ((0..d).map(|k| *first.input_gram(k).kernel()).collect(), *first.output_gram().kernel())
        }
    };
    let qois = exec.map(n1, |t| -> Result<QuantityOfInterest> {
        let cols: Vec<Vec<f64>> = all.iter().map(|c| c[t * n2..(t + 1) * n2].to_vec()).collect();
        let s = SampleSet::new(cols, y[t * n2..(t + 1) * n2].to_vec())?;
        let first = FirstLevel::new(&s, &input_kernels, &output_kernel)?;
        compute_qoi(&first, None, config.qoi, derive_seed(config.seed, &[2, t as u64]), &Serial)
    });
    let qois = qois.into_iter().collect::<Result<Vec<_>>>()?;
    let bases = (0..d)
        .map(|k| {
            let spec = config.input_kernel(k);
            if spec.bandwidth.is_some() {
                return Ok(*spec);
            }
            let mix = mixture_density(&ensemble.entries()[k])?;
            let v = mix.variance();
            if !(v > 0.0) {
                return Err(Error::DegenerateInput { input: k, reason: String::from("mixture law has zero variance") });
            }
            spec.with_bandwidth(1.0 / v)
        })
        .collect::<Result<Vec<_>>>()?;
    let (indices, qoi_bandwidth) = second_stage(&draws, &qois, &bases, &config.quadrature, exec)?;
    Ok(Gsa2Result {
        kind: LoopKind::Double,
        indices,
        n1,
        n2,
        qoi: config.qoi.tag(),
        rule: None,
        sampling: config.sampling,
        seed: config.seed,
        draws,
        qois,
        weight_variances: Vec::new(),
        evaluations: n1 * n2,
        qoi_bandwidth,
    })
}
