//! JSON run reports.
//!
//! `report.json` holds the schema tag, the resolved configuration, the list
//! of defaulted keys, warnings, wall-clock time and the payload. The payload
//! alone is also written to `payload.json`; it depends only on the
//! configuration and seed, so it is byte-identical across worker counts.

use std::io::Write;
use std::path::Path;

use gsa2_core::densities::DrawingRule;
use gsa2_core::engine::{DrawSampling, Gsa2Result, LoopKind, QoiTag};
use gsa2_core::hsic::TestResult;
use serde::Serialize;

use crate::error::{AppError, Result};

pub const SCHEMA: &str = "v1";

/// A diagnostic attached to one input (1-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub input: usize,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Warnings for likelihood-ratio factors whose variance exceeds
/// `threshold`; `context` says which target law they belong to.
pub fn weight_warnings(variances: &[f64], threshold: f64, context: &str) -> Vec<Warning> {
    variances
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > threshold)
        .map(|(k, &v)| Warning {
            input: k + 1,
            message: format!("{context}: variance of the likelihood ratio is {v:.4} (threshold {threshold})"),
            value: Some(v),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TestOut {
    pub statistic: f64,
    pub pvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
}

impl From<&TestResult> for TestOut {
    fn from(t: &TestResult) -> Self {
        TestOut { statistic: t.statistic, pvalue: t.pvalue, permutations: t.resamples }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Gsa1Input {
    pub input: usize,
    pub hsic: f64,
    pub r2: f64,
    pub gamma: TestOut,
    pub permutation: TestOut,
    /// Dependence detected by the Gamma test at the configured level.
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Gsa1Payload {
    pub n: usize,
    pub weighted: bool,
    pub alpha: f64,
    pub seed: u64,
    pub indices: Vec<Gsa1Input>,
    /// Inputs from most to least influential by R² (1-based labels).
    pub ranking: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Gsa2Input {
    pub input: usize,
    pub hsic: f64,
    pub r2: f64,
    pub hsic_dist: f64,
    pub hsic_qoi: f64,
    /// Bandwidth of the distribution kernel.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Gsa2Payload {
    #[serde(rename = "loop")]
    pub kind: &'static str,
    pub n1: usize,
    pub n2: usize,
    pub qoi: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<&'static str>,
    pub sampling: &'static str,
    pub seed: u64,
    pub evaluations: usize,
    pub indices: Vec<Gsa2Input>,
    pub ranking: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qoi_bandwidth: Option<f64>,
    /// Largest likelihood-ratio variance over draws, per input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_weight_variances: Option<Vec<f64>>,
}

pub fn rule_name(r: DrawingRule) -> &'static str {
    match r {
        DrawingRule::Mixture => "mixture",
        DrawingRule::Skl => "skl",
        DrawingRule::Wasserstein => "wasserstein",
    }
}

fn qoi_name(q: QoiTag) -> &'static str {
    match q {
        QoiTag::R2 => "r2",
        QoiTag::Ranking => "ranking",
        QoiTag::GammaPvalues => "pvalues-gamma",
        QoiTag::PermutationPvalues => "pvalues-permutation",
    }
}

fn sampling_name(s: DrawSampling) -> &'static str {
    match s {
        DrawSampling::MonteCarlo => "monte-carlo",
        DrawSampling::Exhaustive => "exhaustive",
        DrawSampling::LatinHypercube => "latin-hypercube",
    }
}

/// 1-based labels by decreasing score; ties keep input order.
pub fn order_of(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.into_iter().map(|k| k + 1).collect()
}

impl From<&Gsa2Result> for Gsa2Payload {
    fn from(r: &Gsa2Result) -> Self {
        let max_w = (!r.weight_variances.is_empty()).then(|| {
            let d = r.indices.len();
            (0..d)
                .map(|k| r.weight_variances.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max))
                .collect()
        });
        Gsa2Payload {
            kind: match r.kind {
                LoopKind::Single => "single",
                LoopKind::Double => "double",
            },
            n1: r.n1,
            n2: r.n2,
            qoi: qoi_name(r.qoi),
            rule: r.rule.map(rule_name),
            sampling: sampling_name(r.sampling),
            seed: r.seed,
            evaluations: r.evaluations,
            indices: r
                .indices
                .iter()
                .enumerate()
                .map(|(k, s)| Gsa2Input {
                    input: k + 1,
                    hsic: s.hsic,
                    r2: s.r2,
                    hsic_dist: s.hsic_dist,
                    hsic_qoi: s.hsic_qoi,
                    bandwidth: s.bandwidth,
                })
                .collect(),
            ranking: order_of(&r.r2()),
            qoi_bandwidth: r.qoi_bandwidth,
            max_weight_variances: max_w,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<P: Serialize> {
    pub schema: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub defaults: Vec<String>,
    pub warnings: Vec<Warning>,
    pub wall_clock_seconds: f64,
    pub payload: P,
}

/// Writes every float with 17 significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exact;

impl serde_json::ser::Formatter for Exact {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with 17-significant-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Exact);
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    std::fs::write(path, to_json(value)).map_err(|e| AppError::io(path, e))
}

/// Machine-readable error document printed on failure.
pub fn error_json(e: &AppError) -> String {
    let v = serde_json::json!({
        "schema": SCHEMA,
        "error": { "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() },
    });
    to_json(&v)
}
