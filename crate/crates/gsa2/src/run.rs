//! Subcommand orchestration: builds everything a command needs from a
//! resolved configuration, runs it and writes the output directory.
//!
//! Output layout (all under `run.out`):
//!
//! | file | commands |
//! |------|----------|
//! | `report.json`, `payload.json` | all |
//! | `indices.csv` | gsa1, gsa2, gsa2-double |
//! | `sample.csv` | gsa1, gsa2 with an in-process model |
//! | `qois.csv` | gsa2, gsa2-double |
//! | `drawing_<k>.csv` | gsa2 (the drawing law of input k) |
//! | `study_n<size>.csv` | converge |
//! | `budget_single.csv`, `budget_double.csv` | budget |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gsa2_core::densities::{likelihood_weights, sample_product, weight_diagnostic, ProductDensity};
use gsa2_core::engine::{
    double_loop_gsa2, single_loop_gsa2, target_first_level, Calibration, Gsa2Result, LoopKind, SampleSource,
};
use gsa2_core::hsic::{FirstLevel, SampleSet};
use gsa2_core::models::{evaluate, IshigamiVariant, Model};
use gsa2_core::rng::derive_seed;
use serde::Serialize;

use crate::bench::{self, Estimator, ReferenceInfo};
use crate::config::{self, EstimatorName, ModelConfig, Resolved, RunConfig};
use crate::error::{AppError, Result};
use crate::exec::{resolve_workers, PoolExecutor};
use crate::io;
use crate::report::{self, Gsa1Input, Gsa1Payload, Gsa2Payload, RunReport, TestOut, Warning};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gsa1,
    Gsa2,
    Gsa2Double,
    Converge,
    Budget,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gsa1 => "gsa1",
            Command::Gsa2 => "gsa2",
            Command::Gsa2Double => "gsa2-double",
            Command::Converge => "converge",
            Command::Budget => "budget",
        }
    }
}

/// Command-line values that take precedence over the configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out: PathBuf,
    /// Contents of `payload.json`.
    pub payload: String,
    pub warnings: Vec<Warning>,
}

enum Simulator {
    InProcess(IshigamiVariant),
    Sample(SampleSet),
}

impl Simulator {
    fn model(&self, command: Command) -> Result<&dyn Model> {
        match self {
            Simulator::InProcess(m) => Ok(m),
            Simulator::Sample(_) => Err(AppError::config(
                "model.kind",
                format!("`{}` needs an in-process model; external-csv only supplies one fixed sample", command.name()),
            )),
        }
    }
}

fn simulator(c: &RunConfig, base_dir: &Path) -> Result<Simulator> {
    match &c.model {
        ModelConfig::IshigamiVariant {} => Ok(Simulator::InProcess(IshigamiVariant)),
        ModelConfig::ExternalCsv { path } => Ok(Simulator::Sample(io::load_sample_csv(&base_dir.join(path), None)?)),
    }
}

fn check_dim(what: &str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(AppError::config(what, format!("{found} laws for a model with {expected} inputs")));
    }
    Ok(())
}

struct Done<P: Serialize> {
    payload: P,
    warnings: Vec<Warning>,
}

/// Runs `command` and writes its outputs. `base_dir` anchors relative file
/// paths of the configuration.
pub fn run(command: Command, resolved: &Resolved, base_dir: &Path, overrides: &Overrides) -> Result<Outcome> {
    let start = Instant::now();
    let mut config = resolved.config.clone();
    let mut defaults = resolved.defaults.clone();
    if let Some(s) = overrides.seed {
        config.run.seed = s;
        defaults.retain(|d| d != "run.seed");
    }
    if let Some(o) = &overrides.out {
        config.run.out = o.clone();
        defaults.retain(|d| d != "run.out");
    }
    let workers = resolve_workers(overrides.workers, config.run.workers)?;
    let exec = PoolExecutor::new(workers)?;
    let sim = simulator(&config, base_dir)?;
    let out = config.run.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| AppError::io(&out, e))?;

    let finish = |payload_json: String, warnings: Vec<Warning>, payload: serde_json::Value| -> Result<Outcome> {
        let rep = RunReport {
            schema: report::SCHEMA,
            command: command.name().into(),
            config: serde_json::to_value(&config).map_err(|e| AppError::config("<document>", e.to_string()))?,
            defaults: defaults.clone(),
            warnings: warnings.clone(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            payload,
        };
        report::write_json(&out.join("report.json"), &rep)?;
        let p = out.join("payload.json");
        std::fs::write(&p, &payload_json).map_err(|e| AppError::io(&p, e))?;
        Ok(Outcome { out: out.clone(), payload: payload_json, warnings })
    };
    macro_rules! emit {
        ($done:expr) => {{
            let d = $done;
            let v = serde_json::to_value(&d.payload).map_err(|e| AppError::config("<document>", e.to_string()))?;
            finish(report::to_json(&d.payload), d.warnings, v)
        }};
    }

    match command {
        Command::Gsa1 => emit!(gsa1(&config, &sim, &out, &exec)?),
        Command::Gsa2 => emit!(gsa2_single(&config, &sim, &out, &exec)?),
        Command::Gsa2Double => emit!(gsa2_double(&config, sim.model(command)?, &out, &exec)?),
        Command::Converge => emit!(converge(&config, sim.model(command)?, &out, &exec)?),
        Command::Budget => emit!(budget(&config, sim.model(command)?, &out, &exec)?),
    }
}

/// Loads and validates `path`, then runs `command`.
pub fn run_file(command: Command, path: &Path, overrides: &Overrides) -> Result<Outcome> {
    let resolved = config::load_config(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    run(command, &resolved, &base, overrides)
}

fn gsa1(c: &RunConfig, sim: &Simulator, out: &Path, exec: &PoolExecutor) -> Result<Done<Gsa1Payload>> {
    let seed = c.run.seed;
    let target = c.gsa1.target.as_deref().map(|t| config::product(t, "gsa1.target")).transpose()?;
    let drawing = c.gsa1.drawing.as_deref().map(|t| config::product(t, "gsa1.drawing")).transpose()?;
    let (sample, drawing) = match sim {
        Simulator::InProcess(m) => {
            let drawing = drawing.ok_or_else(|| AppError::config("gsa1.target", "give the target law of every input"))?;
            check_dim("gsa1.drawing", drawing.dim(), m.dim())?;
            let cols = sample_product(&drawing, c.gsa1.n, seed)?;
            let y = evaluate(m, &cols, exec);
            let s = SampleSet::new(cols, y)?;
            io::write_sample_csv(&out.join("sample.csv"), &s)?;
            (s, Some(drawing))
        }
        Simulator::Sample(s) => {
            if target.is_some() && drawing.is_none() {
                return Err(AppError::config("gsa1.drawing", "reweighting a supplied sample needs the law it was drawn from"));
            }
            if let Some(d) = &drawing {
                check_dim("gsa1.drawing", d.dim(), s.dim())?;
            }
            (s.clone(), drawing)
        }
    };
    let weights = match (&target, &drawing) {
        (Some(t), Some(d)) => {
            check_dim("gsa1.target", t.dim(), sample.dim())?;
            Some(likelihood_weights(sample.inputs(), t, d)?).filter(|w| !w.is_unit())
        }
        _ => None,
    };
    let (ik, ok) = (c.gsa2.input_kernel.spec()?, c.gsa2.output_kernel.spec()?);
    let first = FirstLevel::new(&sample, &[ik], &ok)?;
    let own = match (c.calibration(), &weights) {
        (Calibration::Target, Some(w)) => target_first_level(&sample, &first, w, &[ik], &ok)?,
        _ => None,
    };
    let first = own.unwrap_or(first);
    let w = weights.as_ref();
    let triples = first.triples(w.map(|w| w.values.as_slice()))?;
    let r2 = first.r2(w)?;
    let gamma = first.gamma_tests(w)?;
    let perm = first.permutation_tests(w, c.tests.permutations, derive_seed(seed, &[1]), exec)?;
    let (variances, warnings) = match w {
        Some(w) => {
            let v = weight_diagnostic(w)?;
            let warn = report::weight_warnings(&v, c.tests.weight_threshold, "target law");
            (Some(v), warn)
        }
        None => (None, Vec::new()),
    };
    let indices: Vec<Gsa1Input> = (0..sample.dim())
        .map(|k| Gsa1Input {
            input: k + 1,
            hsic: triples[k].hxy,
            r2: r2[k],
            gamma: TestOut::from(&gamma[k]),
            permutation: TestOut::from(&perm[k]),
            significant: gamma[k].pvalue < c.tests.alpha,
        })
        .collect();
    let mut csv = String::from("input,hsic,r2,pvalue_gamma,pvalue_permutation\n");
    for i in &indices {
        let _ = writeln!(csv, "{},{:?},{:?},{:?},{:?}", i.input, i.hsic, i.r2, i.gamma.pvalue, i.permutation.pvalue);
    }
    write_text(&out.join("indices.csv"), &csv)?;
    Ok(Done {
        payload: Gsa1Payload {
            n: sample.n(),
            weighted: w.is_some(),
            alpha: c.tests.alpha,
            seed,
            ranking: report::order_of(&r2),
            indices,
            weight_variances: variances,
        },
        warnings,
    })
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| AppError::io(path, e))
}

fn gsa2_outputs(r: &Gsa2Result, c: &RunConfig, out: &Path) -> Result<Done<Gsa2Payload>> {
    io::write_qoi_csv(&out.join("qois.csv"), r)?;
    let mut csv = String::from("input,hsic,r2,hsic_dist,hsic_qoi,bandwidth\n");
    for (k, s) in r.indices.iter().enumerate() {
        let _ = writeln!(csv, "{},{:?},{:?},{:?},{:?},{:?}", k + 1, s.hsic, s.r2, s.hsic_dist, s.hsic_qoi, s.bandwidth);
    }
    write_text(&out.join("indices.csv"), &csv)?;
    let warnings = r
        .weight_variances
        .iter()
        .enumerate()
        .flat_map(|(t, v)| report::weight_warnings(v, c.tests.weight_threshold, &format!("draw {}", t + 1)))
        .collect();
    Ok(Done { payload: Gsa2Payload::from(r), warnings })
}

fn gsa2_single(c: &RunConfig, sim: &Simulator, out: &Path, exec: &PoolExecutor) -> Result<Done<Gsa2Payload>> {
    let ens = config::ensemble(c)?;
    let engine = c.engine(c.run.seed)?;
    let (r, drawing) = match sim {
        Simulator::InProcess(m) => {
            // same sample the engine draws, kept for reuse as an external-csv input
            let drawing = ens.drawing_density(engine.rule)?;
            let cols = sample_product(&drawing, engine.n2, engine.seed)?;
            let y = evaluate(m, &cols, exec);
            let s = SampleSet::new(cols, y)?.with_drawing(drawing.clone())?;
            io::write_sample_csv(&out.join("sample.csv"), &s)?;
            let mut r = single_loop_gsa2(&ens, SampleSource::Sample(&s), &engine, exec)?;
            r.evaluations = engine.n2;
            (r, drawing)
        }
        Simulator::Sample(s) => {
            check_dim("ensemble", ens.dim(), s.dim())?;
            let s = match c.gsa1.drawing.as_deref() {
                Some(d) => s.clone().with_drawing(config::product(d, "gsa1.drawing")?)?,
                None => s.clone(),
            };
            let drawing = match s.drawing() {
                Some(d) => d.clone(),
                None => ens.drawing_density(engine.rule)?,
            };
            (single_loop_gsa2(&ens, SampleSource::Sample(&s), &engine, exec)?, drawing)
        }
    };
    dump_drawing(&drawing, out)?;
    gsa2_outputs(&r, c, out)
}

fn dump_drawing(drawing: &ProductDensity, out: &Path) -> Result<()> {
    for (k, m) in drawing.margins.iter().enumerate() {
        io::write_density_csv(&out.join(format!("drawing_{}.csv", k + 1)), m, 257)?;
    }
    Ok(())
}

fn gsa2_double(c: &RunConfig, model: &dyn Model, out: &Path, exec: &PoolExecutor) -> Result<Done<Gsa2Payload>> {
    let ens = config::ensemble(c)?;
    let r = double_loop_gsa2(&ens, model, &c.engine(c.run.seed)?, exec)?;
    gsa2_outputs(&r, c, out)
}

fn estimator(c: &RunConfig, model: &dyn Model) -> Result<Estimator> {
    Ok(match c.study.estimator {
        EstimatorName::Gsa1 => {
            let target = c
                .gsa1
                .target
                .as_deref()
                .ok_or_else(|| AppError::config("gsa1.target", "a first-level study needs target laws"))?;
            let target = config::product(target, "gsa1.target")?;
            let drawing = match c.gsa1.drawing.as_deref() {
                Some(d) => config::product(d, "gsa1.drawing")?,
                None => target.clone(),
            };
            check_dim("gsa1.target", target.dim(), model.dim())?;
            Estimator::Gsa1 {
                drawing,
                target,
                input_kernel: c.gsa2.input_kernel.spec()?,
                output_kernel: c.gsa2.output_kernel.spec()?,
                calibration: c.calibration(),
            }
        }
        EstimatorName::Gsa2Single | EstimatorName::Gsa2Double => Estimator::Gsa2 {
            ensemble: config::ensemble(c)?,
            engine: c.engine(c.run.seed)?,
            kind: if c.study.estimator == EstimatorName::Gsa2Single { LoopKind::Single } else { LoopKind::Double },
        },
    })
}

fn reference(c: &RunConfig, est: &Estimator, model: &dyn Model, exec: &PoolExecutor) -> Result<ReferenceInfo> {
    match c.reference()? {
        Some(r) => {
            if r.len() != model.dim() {
                return Err(AppError::config("study.reference", format!("needs {} labels", model.dim())));
            }
            Ok(ReferenceInfo::given(&r))
        }
        None => {
            let n = c.study.reference_n.unwrap_or(10_000);
            bench::reference_ranking(est, model, n, c.study.reference_seeds, c.run.seed, exec)
        }
    }
}

fn converge(c: &RunConfig, model: &dyn Model, out: &Path, exec: &PoolExecutor) -> Result<Done<bench::StudyReport>> {
    let est = estimator(c, model)?;
    let refi = reference(c, &est, model, exec)?;
    let rank = refi.ranking();
    let rep = bench::convergence_study(&est, model, &c.study.sizes, c.study.replications, refi, c.run.seed, exec)?;
    for s in &rep.sizes {
        bench::write_size_csv(&out.join(format!("study_n{}.csv", s.n)), s, &rank)?;
    }
    Ok(Done { payload: rep, warnings: Vec::new() })
}

fn budget(c: &RunConfig, model: &dyn Model, out: &Path, exec: &PoolExecutor) -> Result<Done<bench::BudgetReport>> {
    let ens = config::ensemble(c)?;
    let engine = c.engine(c.run.seed)?;
    let est = Estimator::Gsa2 { ensemble: ens.clone(), engine: engine.clone(), kind: LoopKind::Double };
    let refi = reference(c, &est, model, exec)?;
    let rank = refi.ranking();
    let rep = bench::budget_comparison(&ens, &engine, model, c.study.budget, c.study.replications, refi, c.run.seed, exec)?;
    bench::write_size_csv(&out.join("budget_single.csv"), &rep.single, &rank)?;
    bench::write_size_csv(&out.join("budget_double.csv"), &rep.double, &rank)?;
    Ok(Done { payload: rep, warnings: Vec::new() })
}
