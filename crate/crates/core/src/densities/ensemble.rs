use alloc::format;
use alloc::vec::Vec;

use super::tabulated::{Tabulated, DEFAULT_GRID_POINTS};
use super::{DensitySpec, ProductDensity, UnivariateDensity};
use crate::{Error, Result};

/// Quadrature nodes used for expectations over a one-dimensional parameter law.
pub const PARAM_QUADRATURE_NODES: usize = 128;

/// Which parameter of a [`ParamFamily`] is uncertain. Support endpoints are
/// never uncertain: all realisations of one input must share a support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UncertainParam {
    Mode,
    Mean,
    Sd,
}

/// A density family with one uncertain parameter drawn from `law`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFamily {
    base: DensitySpec,
    param: UncertainParam,
    law: UnivariateDensity,
}

impl ParamFamily {
    /// `base` carries the fixed parameters; the value it holds for `param` is
    /// ignored.
    pub fn new(base: DensitySpec, param: UncertainParam, law: UnivariateDensity) -> Result<Self> {
        let fits = matches!(
            (base, param),
            (DensitySpec::Triangular { .. }, UncertainParam::Mode)
                | (DensitySpec::TruncatedNormal { .. }, UncertainParam::Mean)
                | (DensitySpec::TruncatedNormal { .. }, UncertainParam::Sd)
        );
        if !fits {
            return Err(Error::invalid(format!(
                "parameter {param:?} is not an uncertain parameter of {:?}",
                base.family()
            )));
        }
        let family = ParamFamily { base, param, law };
        let (lo, hi) = family.law.support();
        family.realize(lo)?;
        family.realize(hi)?;
        Ok(family)
    }

    pub fn base(&self) -> DensitySpec {
        self.base
    }

    pub fn param(&self) -> UncertainParam {
        self.param
    }

    pub fn law(&self) -> &UnivariateDensity {
        &self.law
    }

    pub fn support(&self) -> (f64, f64) {
        self.base.support()
    }

    /// The member of the family at parameter value `theta`.
    pub fn realize(&self, theta: f64) -> Result<UnivariateDensity> {
        let spec = match (self.base, self.param) {
            (DensitySpec::Triangular { a, b, .. }, UncertainParam::Mode) => {
                DensitySpec::Triangular { a, b, mode: theta }
            }
            (DensitySpec::TruncatedNormal { a, b, sd, .. }, UncertainParam::Mean) => {
                DensitySpec::TruncatedNormal { a, b, mean: theta, sd }
            }
            (DensitySpec::TruncatedNormal { a, b, mean, .. }, UncertainParam::Sd) => {
                DensitySpec::TruncatedNormal { a, b, mean, sd: theta }
            }
            _ => unreachable!("validated in ParamFamily::new"),
        };
        super::make_density(spec)
    }
}

/// Second-level uncertainty on one input's law.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleEntry {
    /// Finitely many candidate laws with probabilities.
    Finite { candidates: Vec<UnivariateDensity>, weights: Vec<f64> },
    /// A family with a random parameter.
    Param(ParamFamily),
}

impl EnsembleEntry {
    /// Finite entry; `weights = None` means equiprobable. Enforces a common
    /// support and a probability vector.
    pub fn finite(candidates: Vec<UnivariateDensity>, weights: Option<Vec<f64>>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::invalid("an ensemble entry needs at least one candidate"));
        }
        let weights = weights
            .unwrap_or_else(|| alloc::vec![1.0 / candidates.len() as f64; candidates.len()]);
        if weights.len() != candidates.len() {
            return Err(Error::DimensionMismatch { expected: candidates.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("candidate weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("candidate weights sum to {total}, not 1")));
        }
        let support = candidates[0].support();
        if let Some(c) = candidates.iter().find(|c| c.support() != support) {
            let (a, b) = c.support();
            return Err(Error::SupportMismatch(format!(
                "candidate on [{a}, {b}] differs from [{}, {}]",
                support.0, support.1
            )));
        }
        Ok(EnsembleEntry::Finite { candidates, weights })
    }

    /// Finite entry without the common-support check.
    pub fn finite_unchecked(candidates: Vec<UnivariateDensity>, weights: Vec<f64>) -> Self {
        EnsembleEntry::Finite { candidates, weights }
    }

    pub fn param(family: ParamFamily) -> Self {
        EnsembleEntry::Param(family)
    }

    /// Smallest interval containing every candidate's support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            EnsembleEntry::Finite { candidates, .. } => candidates.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), c| {
                    let (a, b) = c.support();
                    (lo.min(a), hi.max(b))
                },
            ),
            EnsembleEntry::Param(f) => f.support(),
        }
    }

    /// Weighted components: the candidates themselves, or parameter-quadrature
    /// realisations for a family. Identical candidates are merged.
    pub fn components(&self) -> Result<Vec<(f64, UnivariateDensity)>> {
        match self {
            EnsembleEntry::Finite { candidates, weights } => {
                let mut out: Vec<(f64, UnivariateDensity)> = Vec::new();
                for (c, &w) in candidates.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    match out.iter_mut().find(|(_, d)| d == c) {
                        Some(slot) => slot.0 += w,
                        None => out.push((w, c.clone())),
                    }
                }
                Ok(out)
            }
            EnsembleEntry::Param(f) => {
                let grid = f.law.quadrature(PARAM_QUADRATURE_NODES);
                let raw: Vec<f64> = grid
                    .nodes
                    .iter()
                    .zip(&grid.weights)
                    .map(|(&t, &w)| w * f.law.pdf(t))
                    .collect();
                let total: f64 = raw.iter().sum();
                grid.nodes
                    .iter()
                    .zip(raw)
                    .filter(|(_, w)| *w > 0.0)
                    .map(|(&t, w)| Ok((w / total, f.realize(t)?)))
                    .collect()
            }
        }
    }

    /// Candidate count for finite entries.
    pub fn len_finite(&self) -> Option<usize> {
        match self {
            EnsembleEntry::Finite { candidates, .. } => Some(candidates.len()),
            EnsembleEntry::Param(_) => None,
        }
    }
}

/// Per-input laws of laws; entries are independent across inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionEnsemble {
    entries: Vec<EnsembleEntry>,
}

/// Construction of the single drawing law from an ensemble entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DrawingRule {
    Mixture,
    /// Symmetrical Kullback-Leibler barycenter.
    Skl,
    Wasserstein,
}

impl DistributionEnsemble {
    pub fn new(entries: Vec<EnsembleEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("ensemble needs at least one input"));
        }
        Ok(DistributionEnsemble { entries })
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Product of the per-input drawing densities.
    pub fn drawing_density(&self, rule: DrawingRule) -> Result<ProductDensity> {
        let margins = self
            .entries
            .iter()
            .map(|e| match rule {
                DrawingRule::Mixture => mixture_density(e),
                DrawingRule::Skl => skl_barycenter(e),
                DrawingRule::Wasserstein => wasserstein_barycenter(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductDensity::new(margins))
    }
}

fn single(components: &[(f64, UnivariateDensity)]) -> Option<UnivariateDensity> {
    match components {
        [(_, d)] => Some(d.clone()),
        _ => None,
    }
}

// Uniform grid on the support plus every component breakpoint.
fn x_grid(support: (f64, f64), components: &[(f64, UnivariateDensity)]) -> Vec<f64> {
    let (a, b) = support;
    let n = DEFAULT_GRID_POINTS;
    let mut xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    xs[n - 1] = b;
    for (_, c) in components {
        xs.extend(c.breakpoints().into_iter().filter(|&t| t > a && t < b));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|x, y| (*x - *y).abs() <= 1e-13 * (b - a));
    xs
}

/// Weighted average of the component pdfs, tabulated.
pub fn mixture_density(entry: &EnsembleEntry) -> Result<UnivariateDensity> {
    let comps = entry.components()?;
    if let Some(d) = single(&comps) {
        return Ok(d);
    }
    let xs = x_grid(entry.support(), &comps);
    let pdf: Vec<f64> = xs.iter().map(|&x| comps.iter().map(|(w, c)| w * c.pdf(x)).sum()).collect();
    if pdf.iter().any(|p| !p.is_finite()) {
        return Err(Error::numerical("mixture pdf is not finite"));
    }
    Ok(UnivariateDensity::from_tabulated(Tabulated::from_pdf(xs, pdf)?))
}

/// Approximate symmetrical Kullback-Leibler barycenter: the average of the
/// arithmetic mixture and the normalised geometric (log-pdf) mixture.
pub fn skl_barycenter(entry: &EnsembleEntry) -> Result<UnivariateDensity> {
    let comps = entry.components()?;
    if let Some(d) = single(&comps) {
        return Ok(d);
    }
    let (a, b) = entry.support();
    let xs = x_grid((a, b), &comps);
    let mut arith = Vec::with_capacity(xs.len());
    let mut geom = Vec::with_capacity(xs.len());
    for &x in &xs {
        let mut m = 0.0;
        let mut log_m = 0.0;
        let mut zero = false;
        for (w, c) in &comps {
            let p = c.pdf(x);
            m += w * p;
            if p > 0.0 {
                log_m += w * libm::log(p);
            } else {
                zero = true;
            }
        }
        if zero && x > a && x < b {
            return Err(Error::numerical(format!(
                "a component pdf vanishes at interior point {x}; geometric mean undefined"
            )));
        }
        arith.push(m);
        geom.push(if zero { 0.0 } else { libm::exp(log_m) });
    }
    let mass: f64 = (1..xs.len()).map(|i| 0.5 * (geom[i] + geom[i - 1]) * (xs[i] - xs[i - 1])).sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::numerical("geometric mixture has no mass"));
    }
    let pdf: Vec<f64> = arith.iter().zip(&geom).map(|(m, g)| 0.5 * (m + g / mass)).collect();
    Ok(UnivariateDensity::from_tabulated(Tabulated::from_pdf(xs, pdf)?))
}

/// One-dimensional Wasserstein barycenter: its quantile function is the
/// weighted average of the component quantile functions.
pub fn wasserstein_barycenter(entry: &EnsembleEntry) -> Result<UnivariateDensity> {
    let comps = entry.components()?;
    if let Some(d) = single(&comps) {
        return Ok(d);
    }
    let n = DEFAULT_GRID_POINTS;
    let ps: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let xs: Vec<f64> = ps.iter().map(|&p| comps.iter().map(|(w, c)| w * c.quantile(p)).sum()).collect();
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::numerical("barycenter quantile function is not strictly increasing"));
    }
    Ok(UnivariateDensity::from_tabulated(Tabulated::from_cdf(xs, ps)?))
}
