//! One-dimensional densities on bounded supports, product laws, ensembles of
//! candidate laws, drawing-law constructions and likelihood-ratio weights.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{norm_cdf, norm_pdf, norm_ppf};
use crate::quadrature::QuadGrid;
use crate::rng::{open_unit, stream_rng};
use crate::{Error, Result};

mod ensemble;
mod tabulated;
mod weights;

pub use ensemble::{
    mixture_density, skl_barycenter, wasserstein_barycenter, DistributionEnsemble, DrawingRule,
    EnsembleEntry, ParamFamily, UncertainParam,
};
pub use tabulated::{Interpolation, Tabulated, DEFAULT_GRID_POINTS};
pub use weights::{likelihood_weights, weight_diagnostic, WeightVector};

/// Family of a [`UnivariateDensity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyTag {
    Uniform,
    Triangular,
    TruncatedNormal,
    Tabulated,
}

/// Parameters of an analytic density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensitySpec {
    Uniform { a: f64, b: f64 },
    Triangular { a: f64, b: f64, mode: f64 },
    /// Normal law with the given mean and standard deviation, truncated to
    /// [a, b] and renormalised.
    TruncatedNormal { a: f64, b: f64, mean: f64, sd: f64 },
}

impl DensitySpec {
    pub fn family(&self) -> FamilyTag {
        match self {
            DensitySpec::Uniform { .. } => FamilyTag::Uniform,
            DensitySpec::Triangular { .. } => FamilyTag::Triangular,
            DensitySpec::TruncatedNormal { .. } => FamilyTag::TruncatedNormal,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            DensitySpec::Uniform { a, b }
            | DensitySpec::Triangular { a, b, .. }
            | DensitySpec::TruncatedNormal { a, b, .. } => (a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Uniform { a: f64, b: f64 },
    Triangular { a: f64, b: f64, mode: f64 },
    TruncatedNormal { a: f64, b: f64, mean: f64, sd: f64, cdf_a: f64, mass: f64 },
    Tabulated(Arc<Tabulated>),
}

/// A density on a closed bounded interval with pdf, cdf, quantile and an
/// inverse-cdf sampler.
///
/// Cloning is cheap: tabulated densities share their grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateDensity {
    repr: Repr,
}

/// Builds an analytic density, validating its parameters.
pub fn make_density(spec: DensitySpec) -> Result<UnivariateDensity> {
    let finite = |v: f64, name: &str| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!("{name} must be finite")))
        }
    };
    let (a, b) = spec.support();
    finite(a, "a")?;
    finite(b, "b")?;
    if !(a < b) {
        return Err(Error::invalid(alloc::format!("support [{a}, {b}] is empty")));
    }
    let repr = match spec {
        DensitySpec::Uniform { a, b } => Repr::Uniform { a, b },
        DensitySpec::Triangular { a, b, mode } => {
            finite(mode, "mode")?;
            if !(a <= mode && mode <= b) {
                return Err(Error::invalid(alloc::format!(
                    "triangular mode {mode} outside [{a}, {b}]"
                )));
            }
            Repr::Triangular { a, b, mode }
        }
        DensitySpec::TruncatedNormal { a, b, mean, sd } => {
            finite(mean, "mean")?;
            finite(sd, "sd")?;
            if !(sd > 0.0) {
                return Err(Error::invalid("truncated normal needs sd > 0"));
            }
            let cdf_a = norm_cdf((a - mean) / sd);
            let mass = norm_cdf((b - mean) / sd) - cdf_a;
            if !(mass > 0.0) {
                return Err(Error::invalid("truncated normal has no mass on its support"));
            }
            Repr::TruncatedNormal { a, b, mean, sd, cdf_a, mass }
        }
    };
    Ok(UnivariateDensity { repr })
}

impl UnivariateDensity {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        make_density(DensitySpec::Uniform { a, b })
    }

    pub fn triangular(a: f64, b: f64, mode: f64) -> Result<Self> {
        make_density(DensitySpec::Triangular { a, b, mode })
    }

    pub fn truncated_normal(a: f64, b: f64, mean: f64, sd: f64) -> Result<Self> {
        make_density(DensitySpec::TruncatedNormal { a, b, mean, sd })
    }

    pub fn from_tabulated(table: Tabulated) -> Self {
        UnivariateDensity { repr: Repr::Tabulated(Arc::new(table)) }
    }

    pub fn family(&self) -> FamilyTag {
        match self.repr {
            Repr::Uniform { .. } => FamilyTag::Uniform,
            Repr::Triangular { .. } => FamilyTag::Triangular,
            Repr::TruncatedNormal { .. } => FamilyTag::TruncatedNormal,
            Repr::Tabulated(_) => FamilyTag::Tabulated,
        }
    }

    /// Parameters of analytic densities; `None` for tabulated ones.
    pub fn spec(&self) -> Option<DensitySpec> {
        match self.repr {
            Repr::Uniform { a, b } => Some(DensitySpec::Uniform { a, b }),
            Repr::Triangular { a, b, mode } => Some(DensitySpec::Triangular { a, b, mode }),
            Repr::TruncatedNormal { a, b, mean, sd, .. } => {
                Some(DensitySpec::TruncatedNormal { a, b, mean, sd })
            }
            Repr::Tabulated(_) => None,
        }
    }

    pub fn tabulated(&self) -> Option<&Tabulated> {
        match &self.repr {
            Repr::Tabulated(t) => Some(t),
            _ => None,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Uniform { a, b }
            | Repr::Triangular { a, b, .. }
            | Repr::TruncatedNormal { a, b, .. } => (*a, *b),
            Repr::Tabulated(t) => t.support(),
        }
    }

    /// Interior points where the pdf is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.repr {
            Repr::Triangular { a, b, mode } if mode > a && mode < b => alloc::vec![mode],
            _ => Vec::new(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        match &self.repr {
            Repr::Uniform { a, b } => 1.0 / (b - a),
            &Repr::Triangular { a, b, mode } => {
                if x < mode {
                    2.0 * (x - a) / ((b - a) * (mode - a))
                } else if x > mode {
                    2.0 * (b - x) / ((b - a) * (b - mode))
                } else {
                    2.0 / (b - a)
                }
            }
            &Repr::TruncatedNormal { mean, sd, mass, .. } => {
                norm_pdf((x - mean) / sd) / (sd * mass)
            }
            Repr::Tabulated(t) => t.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match &self.repr {
            Repr::Uniform { a, b } => (x - a) / (b - a),
            &Repr::Triangular { a, b, mode } => {
                if x <= mode {
                    (x - a) * (x - a) / ((b - a) * (mode - a))
                } else {
                    1.0 - (b - x) * (b - x) / ((b - a) * (b - mode))
                }
            }
            &Repr::TruncatedNormal { mean, sd, cdf_a, mass, .. } => {
                ((norm_cdf((x - mean) / sd) - cdf_a) / mass).clamp(0.0, 1.0)
            }
            Repr::Tabulated(t) => t.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let (lo, hi) = self.support();
        if p <= 0.0 {
            return lo;
        }
        if p >= 1.0 {
            return hi;
        }
        match &self.repr {
            Repr::Uniform { a, b } => a + p * (b - a),
            &Repr::Triangular { a, b, mode } => {
                if p < (mode - a) / (b - a) {
                    a + libm::sqrt(p * (b - a) * (mode - a))
                } else {
                    b - libm::sqrt((1.0 - p) * (b - a) * (b - mode))
                }
            }
            &Repr::TruncatedNormal { a, b, mean, sd, cdf_a, mass } => {
                (mean + sd * norm_ppf(cdf_a + p * mass)).clamp(a, b)
            }
            Repr::Tabulated(t) => t.quantile(p),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(open_unit(rng))
    }

    /// Quadrature rule on the support, split at the breakpoints.
    pub fn quadrature(&self, nodes: usize) -> QuadGrid {
        let (a, b) = self.support();
        QuadGrid::composite(a, b, &self.breakpoints(), nodes)
    }

    /// E[g(X)] by quadrature with 256 nodes.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.quadrature(256).integrate(|x| g(x) * self.pdf(x))
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }
}

/// Joint law of independent inputs: the pdf is the product of the margins.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDensity {
    pub margins: Vec<UnivariateDensity>,
}

impl ProductDensity {
    pub fn new(margins: Vec<UnivariateDensity>) -> Self {
        ProductDensity { margins }
    }

    pub fn dim(&self) -> usize {
        self.margins.len()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.margins.iter().zip(x).map(|(m, &v)| m.pdf(v)).product()
    }

    /// Draws `n` rows by inverse cdf, row by row; returns one column per input.
    pub fn sample_columns<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = self.margins.iter().map(|_| Vec::with_capacity(n)).collect();
        for _ in 0..n {
            for (col, m) in cols.iter_mut().zip(&self.margins) {
                col.push(m.sample(rng));
            }
        }
        cols
    }
}

/// `n` i.i.d. rows from `density`, deterministic in `seed`; one column per input.
pub fn sample_product(density: &ProductDensity, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut rng = stream_rng(seed, 0);
    Ok(density.sample_columns(&mut rng, n))
}
