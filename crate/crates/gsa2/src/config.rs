//! Run configuration: one TOML or JSON document per study.
//!
//! Unknown keys are rejected. Every value the document leaves out is filled
//! with its default, and the key paths of those defaults are reported so a
//! run can be reproduced from its report alone.

use std::path::{Path, PathBuf};

use gsa2_core::densities::{
    make_density, DensitySpec, DistributionEnsemble, DrawingRule, EnsembleEntry, ParamFamily, ProductDensity,
    UncertainParam, UnivariateDensity,
};
use gsa2_core::engine::{Calibration, DrawSampling, Gsa2Config, QoiOption};
use gsa2_core::kernels::{BandwidthRule, KernelSpec, Ranking};
use gsa2_core::quadrature::QuadratureSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// JSON for `.json` files, TOML otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    Uniform { a: f64, b: f64 },
    Triangular { a: f64, b: f64, mode: f64 },
    TruncatedNormal { a: f64, b: f64, mean: f64, sd: f64 },
}

impl DensityConfig {
    pub fn spec(&self) -> DensitySpec {
        match *self {
            DensityConfig::Uniform { a, b } => DensitySpec::Uniform { a, b },
            DensityConfig::Triangular { a, b, mode } => DensitySpec::Triangular { a, b, mode },
            DensityConfig::TruncatedNormal { a, b, mean, sd } => DensitySpec::TruncatedNormal { a, b, mean, sd },
        }
    }

    pub fn build(&self) -> gsa2_core::Result<UnivariateDensity> {
        make_density(self.spec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamName {
    Mode,
    Mean,
    Sd,
}

/// Family with one uncertain parameter distributed as `law`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub base: DensityConfig,
    pub param: ParamName,
    pub law: DensityConfig,
}

/// One input's uncertain law: either finitely many candidates or a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<DensityConfig>>,
    /// Candidate probabilities; equal by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    IshigamiVariant {},
    /// Simulations supplied as a sample CSV, relative to the config file.
    ExternalCsv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    InverseVariance,
    InverseMedian,
    Fixed { bandwidth: f64 },
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::InverseVariance
    }
}

impl KernelConfig {
    pub fn spec(&self) -> gsa2_core::Result<KernelSpec> {
        match *self {
            KernelConfig::InverseVariance => KernelSpec::gaussian_rule(BandwidthRule::InverseVariance),
            KernelConfig::InverseMedian => KernelSpec::gaussian_rule(BandwidthRule::InverseMedian),
            KernelConfig::Fixed { bandwidth } => KernelSpec::gaussian(bandwidth),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Mixture,
    Skl,
    Wasserstein,
}

impl From<RuleName> for DrawingRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Mixture => DrawingRule::Mixture,
            RuleName::Skl => DrawingRule::Skl,
            RuleName::Wasserstein => DrawingRule::Wasserstein,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QoiName {
    R2,
    Ranking,
    PvaluesGamma,
    PvaluesPermutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingName {
    MonteCarlo,
    Exhaustive,
    LatinHypercube,
}

impl From<SamplingName> for DrawSampling {
    fn from(s: SamplingName) -> Self {
        match s {
            SamplingName::MonteCarlo => DrawSampling::MonteCarlo,
            SamplingName::Exhaustive => DrawSampling::Exhaustive,
            SamplingName::LatinHypercube => DrawSampling::LatinHypercube,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationName {
    Target,
    Drawing,
}

/// First-level analysis with a fixed target law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gsa1Section {
    /// Sample size when the model is evaluated in-process.
    #[serde(default = "default_gsa1_n")]
    pub n: usize,
    /// Law the sample is drawn from; defaults to the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drawing: Option<Vec<DensityConfig>>,
    /// Law the indices refer to; defaults to the drawing law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<DensityConfig>>,
}

fn default_gsa1_n() -> usize {
    500
}

impl Default for Gsa1Section {
    fn default() -> Self {
        Gsa1Section { n: default_gsa1_n(), drawing: None, target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gsa2Section {
    #[serde(default = "default_n1")]
    pub n1: usize,
    /// Shared-sample size (single loop) or inner-sample size (double loop).
    #[serde(default = "default_n2")]
    pub n2: usize,
    #[serde(default = "default_rule")]
    pub rule: RuleName,
    #[serde(default = "default_qoi")]
    pub qoi: QoiName,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingName,
    #[serde(default = "default_calibration")]
    pub calibration: CalibrationName,
    #[serde(default)]
    pub input_kernel: KernelConfig,
    #[serde(default)]
    pub output_kernel: KernelConfig,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_tolerance")]
    pub quadrature_tolerance: f64,
}

fn default_n1() -> usize {
    100
}
fn default_n2() -> usize {
    1000
}
fn default_rule() -> RuleName {
    RuleName::Mixture
}
fn default_qoi() -> QoiName {
    QoiName::R2
}
fn default_sampling() -> SamplingName {
    SamplingName::MonteCarlo
}
fn default_calibration() -> CalibrationName {
    CalibrationName::Target
}
fn default_nodes() -> usize {
    QuadratureSpec::default().nodes
}
fn default_tolerance() -> f64 {
    QuadratureSpec::default().tolerance
}

impl Default for Gsa2Section {
    fn default() -> Self {
        Gsa2Section {
            n1: default_n1(),
            n2: default_n2(),
            rule: default_rule(),
            qoi: default_qoi(),
            sampling: default_sampling(),
            calibration: default_calibration(),
            input_kernel: KernelConfig::default(),
            output_kernel: KernelConfig::default(),
            quadrature_nodes: default_nodes(),
            quadrature_tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestsSection {
    /// Significance level for the first-level independence tests.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Permutations per permutation test.
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Warn when the variance of a likelihood-ratio factor exceeds this.
    #[serde(default = "default_threshold")]
    pub weight_threshold: f64,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_permutations() -> usize {
    QoiOption::DEFAULT_PERMUTATIONS
}
fn default_threshold() -> f64 {
    10.0
}

impl Default for TestsSection {
    fn default() -> Self {
        TestsSection { alpha: default_alpha(), permutations: default_permutations(), weight_threshold: default_threshold() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Gsa1,
    Gsa2Single,
    Gsa2Double,
}

/// Replication studies (`converge`, `budget`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorName,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Reference ranking (1-based labels, most influential first); computed
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<usize>>,
    /// Sample size of the reference computation: 10 000 for first-level
    /// studies, 1000 inner samples for second-level ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_n: Option<usize>,
    #[serde(default = "default_reference_seeds")]
    pub reference_seeds: usize,
    /// Total number of model calls compared by `budget`.
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_estimator() -> EstimatorName {
    EstimatorName::Gsa1
}
fn default_sizes() -> Vec<usize> {
    vec![100, 200, 300, 500]
}
fn default_replications() -> usize {
    200
}
fn default_reference_seeds() -> usize {
    20
}
fn default_budget() -> usize {
    1026
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            estimator: default_estimator(),
            sizes: default_sizes(),
            replications: default_replications(),
            reference: None,
            reference_n: None,
            reference_seeds: default_reference_seeds(),
            budget: default_budget(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("gsa2-out")
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 0, workers: None, out: default_out() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// One entry per input.
    #[serde(default)]
    pub ensemble: Vec<InputConfig>,
    #[serde(default)]
    pub gsa1: Gsa1Section,
    #[serde(default)]
    pub gsa2: Gsa2Section,
    #[serde(default)]
    pub tests: TestsSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub run: RunSection,
}

/// A validated configuration and the key paths that took default values.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: RunConfig,
    pub defaults: Vec<String>,
}

fn parse_tree(doc: &str, format: Format) -> Result<Value> {
    match format {
        Format::Json => serde_json::from_str(doc).map_err(|e| AppError::config("<document>", e.to_string())),
        Format::Toml => {
            let v: toml::Value = toml::from_str(doc).map_err(|e| AppError::config("<document>", e.to_string()))?;
            serde_json::to_value(v).map_err(|e| AppError::config("<document>", e.to_string()))
        }
    }
}

fn key_path(p: &serde_path_to_error::Path) -> String {
    let s = p.to_string();
    if s == "." { "<document>".into() } else { s }
}

// Paths present in `full` but absent from `given`.
fn missing_paths(given: &Value, full: &Value, prefix: &str, out: &mut Vec<String>) {
    match full {
        Value::Object(m) => {
            for (k, v) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match given.get(k) {
                    None if v.is_object() => missing_paths(&Value::Null, v, &p, out),
                    None if !v.is_null() => out.push(p),
                    None => {}
                    Some(g) => missing_paths(g, v, &p, out),
                }
            }
        }
        Value::Array(items) => {
            if let Value::Array(g) = given {
                for (i, (gi, fi)) in g.iter().zip(items).enumerate() {
                    missing_paths(gi, fi, &format!("{prefix}[{i}]"), out);
                }
            }
        }
        _ => {}
    }
}

/// Parses, fills defaults and checks a configuration document. Relative
/// file paths are checked against `base_dir`.
pub fn validate_config(doc: &str, format: Format, base_dir: Option<&Path>) -> Result<Resolved> {
    let tree = parse_tree(doc, format)?;
    let mut config: RunConfig = serde_path_to_error::deserialize(tree.clone())
        .map_err(|e| AppError::config(key_path(e.path()), e.inner().to_string()))?;
    resolve(&mut config);
    check(&config, base_dir)?;
    let full = serde_json::to_value(&config).map_err(|e| AppError::config("<document>", e.to_string()))?;
    let mut defaults = Vec::new();
    missing_paths(&tree, &full, "", &mut defaults);
    Ok(Resolved { config, defaults })
}

pub fn load_config(path: &Path) -> Result<Resolved> {
    let doc = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    validate_config(&doc, Format::from_path(path), path.parent())
}

/// The resolved configuration as a document `validate_config` accepts.
pub fn emit_config(config: &RunConfig, format: Format) -> Result<String> {
    match format {
        Format::Json => serde_json::to_string_pretty(config).map_err(|e| AppError::config("<document>", e.to_string())),
        Format::Toml => toml::to_string(config).map_err(|e| AppError::config("<document>", e.to_string())),
    }
}

fn resolve(c: &mut RunConfig) {
    for e in &mut c.ensemble {
        if let (Some(cands), None) = (&e.candidates, &e.weights) {
            e.weights = Some(vec![1.0 / cands.len().max(1) as f64; cands.len()]);
        }
    }
    if c.gsa1.drawing.is_none() && !matches!(c.model, ModelConfig::ExternalCsv { .. }) {
        c.gsa1.drawing = c.gsa1.target.clone();
    }
    if c.study.reference_n.is_none() {
        c.study.reference_n = Some(match c.study.estimator {
            EstimatorName::Gsa1 => 10_000,
            _ => 1000,
        });
    }
}

fn check(c: &RunConfig, base_dir: Option<&Path>) -> Result<()> {
    if !(c.tests.alpha > 0.0 && c.tests.alpha < 1.0) {
        return Err(AppError::config("tests.alpha", format!("must lie in (0, 1), got {}", c.tests.alpha)));
    }
    if c.tests.permutations == 0 {
        return Err(AppError::config("tests.permutations", "must be at least 1"));
    }
    if !(c.tests.weight_threshold > 0.0) {
        return Err(AppError::config("tests.weight_threshold", "must be positive"));
    }
    if c.run.workers == Some(0) {
        return Err(AppError::config("run.workers", "must be at least 1"));
    }
    if c.gsa1.n < crate::io::MIN_ROWS {
        return Err(AppError::config("gsa1.n", format!("must be at least {}", crate::io::MIN_ROWS)));
    }
    if c.gsa2.n1 == 0 {
        return Err(AppError::config("gsa2.n1", "must be at least 1"));
    }
    if c.gsa2.n2 < 6 {
        return Err(AppError::config("gsa2.n2", "must be at least 6"));
    }
    if c.gsa2.quadrature_nodes < 2 {
        return Err(AppError::config("gsa2.quadrature_nodes", "must be at least 2"));
    }
    if !(c.gsa2.quadrature_tolerance >= 0.0) {
        return Err(AppError::config("gsa2.quadrature_tolerance", "must be non-negative"));
    }
    for (name, k) in [("gsa2.input_kernel", c.gsa2.input_kernel), ("gsa2.output_kernel", c.gsa2.output_kernel)] {
        k.spec().map_err(|e| AppError::config(format!("{name}.bandwidth"), e.to_string()))?;
    }
    if c.study.replications == 0 {
        return Err(AppError::config("study.replications", "must be at least 1"));
    }
    if c.study.sizes.is_empty() {
        return Err(AppError::config("study.sizes", "size grid is empty"));
    }
    if let Some(i) = c.study.sizes.iter().position(|&n| n < 6) {
        return Err(AppError::config(format!("study.sizes[{i}]"), "sizes must be at least 6"));
    }
    if c.study.reference_seeds == 0 {
        return Err(AppError::config("study.reference_seeds", "must be at least 1"));
    }
    if let Some(r) = &c.study.reference {
        Ranking::from_one_based(r).map_err(|e| AppError::config("study.reference", e.to_string()))?;
    }
    if let ModelConfig::ExternalCsv { path } = &c.model {
        let full = base_dir.map_or_else(|| path.clone(), |b| b.join(path));
        if !full.is_file() {
            return Err(AppError::config("model.path", format!("no such file: {}", full.display())));
        }
    }
    if !c.ensemble.is_empty() {
        ensemble(c)?;
        if c.ensemble.len() != model_dim(c).unwrap_or(c.ensemble.len()) {
            return Err(AppError::config("ensemble", format!("model has {} inputs", model_dim(c).unwrap_or(0))));
        }
    }
    for (name, laws) in [("gsa1.drawing", &c.gsa1.drawing), ("gsa1.target", &c.gsa1.target)] {
        if let Some(laws) = laws {
            product(laws, name)?;
        }
    }
    if let (Some(d), Some(t)) = (&c.gsa1.drawing, &c.gsa1.target) {
        if d.len() != t.len() {
            return Err(AppError::config("gsa1.target", format!("{} laws for {} drawing laws", t.len(), d.len())));
        }
        for (k, (a, b)) in d.iter().zip(t).enumerate() {
            if a.spec().support() != b.spec().support() {
                return Err(AppError::config(
                    format!("gsa1.target[{k}]"),
                    format!("input {}: target and drawing supports differ", k + 1),
                ));
            }
        }
    }
    Ok(())
}

fn model_dim(c: &RunConfig) -> Option<usize> {
    match c.model {
        ModelConfig::IshigamiVariant {} => Some(3),
        ModelConfig::ExternalCsv { .. } => None,
    }
}

/// Product law of `laws`, with errors pointing at `name[k]`.
pub fn product(laws: &[DensityConfig], name: &str) -> Result<ProductDensity> {
    let margins = laws
        .iter()
        .enumerate()
        .map(|(k, l)| l.build().map_err(|e| AppError::config(format!("{name}[{k}]"), format!("input {}: {e}", k + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProductDensity::new(margins))
}

/// The configured distribution ensemble.
pub fn ensemble(c: &RunConfig) -> Result<DistributionEnsemble> {
    if c.ensemble.is_empty() {
        return Err(AppError::config("ensemble", "no ensemble entries"));
    }
    let entries = c
        .ensemble
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let at = |m: String| AppError::config(format!("ensemble[{k}]"), format!("input {}: {m}", k + 1));
            match (&e.candidates, &e.family) {
                (Some(cands), None) => {
                    if cands.is_empty() {
                        return Err(at("no candidates".into()));
                    }
                    let dens = cands.iter().map(|d| d.build()).collect::<gsa2_core::Result<Vec<_>>>();
                    let dens = dens.map_err(|e| at(e.to_string()))?;
                    EnsembleEntry::finite(dens, e.weights.clone()).map_err(|e| at(e.to_string()))
                }
                (None, Some(f)) => {
                    if e.weights.is_some() {
                        return Err(at("weights apply to candidates only".into()));
                    }
                    let param = match f.param {
                        ParamName::Mode => UncertainParam::Mode,
                        ParamName::Mean => UncertainParam::Mean,
                        ParamName::Sd => UncertainParam::Sd,
                    };
                    let law = f.law.build().map_err(|e| at(e.to_string()))?;
                    ParamFamily::new(f.base.spec(), param, law).map(EnsembleEntry::param).map_err(|e| at(e.to_string()))
                }
                _ => Err(at("give exactly one of `candidates` or `family`".into())),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistributionEnsemble::new(entries)?)
}

impl RunConfig {
    pub fn qoi_option(&self) -> QoiOption {
        match self.gsa2.qoi {
            QoiName::R2 => QoiOption::R2,
            QoiName::Ranking => QoiOption::Ranking,
            QoiName::PvaluesGamma => QoiOption::GammaPvalues,
            QoiName::PvaluesPermutation => QoiOption::PermutationPvalues { b: self.tests.permutations },
        }
    }

    pub fn calibration(&self) -> Calibration {
        match self.gsa2.calibration {
            CalibrationName::Target => Calibration::Target,
            CalibrationName::Drawing => Calibration::Drawing,
        }
    }

    /// Engine settings with the given seed.
    pub fn engine(&self, seed: u64) -> Result<Gsa2Config> {
        let mut g = Gsa2Config::new(self.gsa2.n1, self.gsa2.n2, self.qoi_option(), seed);
        g.rule = self.gsa2.rule.into();
        g.sampling = self.gsa2.sampling.into();
        g.calibration = self.calibration();
        g.input_kernels = vec![self.gsa2.input_kernel.spec()?];
        g.output_kernel = self.gsa2.output_kernel.spec()?;
        g.quadrature = QuadratureSpec { nodes: self.gsa2.quadrature_nodes, tolerance: self.gsa2.quadrature_tolerance };
        Ok(g)
    }

    pub fn reference(&self) -> Result<Option<Ranking>> {
        self.study
            .reference
            .as_ref()
            .map(|r| Ranking::from_one_based(r).map_err(|e| AppError::config("study.reference", e.to_string())))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
kind = "ishigami-variant"

[[ensemble]]
candidates = [
  { family = "uniform", a = 0.0, b = 1.0 },
  { family = "triangular", a = 0.0, b = 1.0, mode = 0.4 },
  { family = "truncated-normal", a = 0.0, b = 1.0, mean = 0.6, sd = 0.2 },
]

[[ensemble]]
candidates = [
  { family = "uniform", a = 0.0, b = 1.0 },
  { family = "triangular", a = 0.0, b = 1.0, mode = 0.4 },
  { family = "truncated-normal", a = 0.0, b = 1.0, mean = 0.6, sd = 0.2 },
]

[[ensemble]]
candidates = [
  { family = "uniform", a = 0.0, b = 1.0 },
  { family = "triangular", a = 0.0, b = 1.0, mode = 0.4 },
  { family = "truncated-normal", a = 0.0, b = 1.0, mean = 0.6, sd = 0.2 },
]

[gsa2]
n1 = 27
sampling = "exhaustive"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let r = validate_config(MINIMAL, Format::Toml, None).unwrap();
        assert_eq!(r.config.gsa2.rule, RuleName::Mixture);
        assert_eq!(r.config.gsa2.qoi, QoiName::R2);
        assert_eq!(r.config.tests.permutations, 300);
        for p in ["gsa2.rule", "gsa2.qoi", "tests.permutations", "ensemble[0].weights", "run.seed"] {
            assert!(r.defaults.iter().any(|d| d == p), "{p} not in {:?}", r.defaults);
        }
        assert!(!r.defaults.iter().any(|d| d == "gsa2.n1"));
        assert_eq!(ensemble(&r.config).unwrap().dim(), 3);
    }

    #[test]
    fn round_trip_is_identity() {
        let r = validate_config(MINIMAL, Format::Toml, None).unwrap();
        for f in [Format::Toml, Format::Json] {
            let doc = emit_config(&r.config, f).unwrap();
            let again = validate_config(&doc, f, None).unwrap();
            assert_eq!(again.config, r.config);
            assert!(again.defaults.is_empty(), "{:?}", again.defaults);
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let e = validate_config(&format!("{MINIMAL}\nbogus = 1\n"), Format::Toml, None).unwrap_err();
        assert!(e.to_string().contains("gsa2"), "{e}");
        let doc = MINIMAL.replace("mode = 0.4 },\n  { family = \"truncated", "mode = 0.4, typo = 1 },\n  { family = \"truncated");
        let e = validate_config(&doc, Format::Toml, None).unwrap_err();
        assert!(e.to_string().contains("ensemble[0]"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn semantic_errors() {
        let e = validate_config(&format!("{MINIMAL}\n[tests]\nalpha = 1.5\n"), Format::Toml, None).unwrap_err();
        assert!(e.to_string().contains("tests.alpha"), "{e}");
        let e = validate_config("[gsa2]\nn1 = 3\n", Format::Toml, None).unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
        // widen the support of one candidate of the third input only
        let mut parts: Vec<&str> = MINIMAL.rsplitn(2, "{ family = \"uniform\", a = 0.0, b = 1.0 }").collect();
        parts.reverse();
        let doc = parts.join("{ family = \"uniform\", a = 0.0, b = 2.0 }");
        let e = validate_config(&doc, Format::Toml, None).unwrap_err();
        assert!(e.to_string().contains("input 3"), "{e}");
        assert!(e.to_string().contains("ensemble[2]"), "{e}");
    }

    #[test]
    fn missing_external_file() {
        let doc = "[model]\nkind = \"external-csv\"\npath = \"nope.csv\"\n";
        let e = validate_config(doc, Format::Toml, Some(Path::new("/nonexistent"))).unwrap_err();
        assert!(e.to_string().contains("model.path"), "{e}");
    }
}
