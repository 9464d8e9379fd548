use alloc::vec::Vec;

use crate::{Error, Result};

/// Grid resolution used for densities without a closed form.
pub const DEFAULT_GRID_POINTS: usize = 2048;

/// How a [`Tabulated`] density interpolates between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// pdf linear between nodes, cdf its exact (piecewise quadratic) integral.
    LinearPdf,
    /// cdf linear between nodes, pdf constant on each cell.
    LinearCdf,
}

/// A density known on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    xs: Vec<f64>,
    /// node values for `LinearPdf`, cell values (one fewer) for `LinearCdf`
    dens: Vec<f64>,
    cdf: Vec<f64>,
    interp: Interpolation,
}

fn check_grid(xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::invalid("tabulated density needs at least two grid points"));
    }
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::numerical("tabulated grid must be finite and strictly increasing"));
    }
    Ok(())
}

impl Tabulated {
    /// Builds a density from pdf values at the grid nodes, renormalised so the
    /// piecewise-linear interpolant integrates to one.
    pub fn from_pdf(xs: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        check_grid(&xs)?;
        if pdf.len() != xs.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), found: pdf.len() });
        }
        if pdf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::numerical("tabulated pdf values must be finite and non-negative"));
        }
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 1..xs.len() {
            acc += 0.5 * (pdf[i] + pdf[i - 1]) * (xs[i] - xs[i - 1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::numerical("tabulated pdf has zero mass"));
        }
        let dens = pdf.iter().map(|p| p / acc).collect();
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Tabulated { xs, dens, cdf, interp: Interpolation::LinearPdf })
    }

    /// Builds a density from cdf values at the grid nodes (running from 0 to 1).
    pub fn from_cdf(xs: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        check_grid(&xs)?;
        if cdf.len() != xs.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), found: cdf.len() });
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::numerical("tabulated cdf must rise monotonically from 0 to 1"));
        }
        let dens = (0..xs.len() - 1)
            .map(|i| (cdf[i + 1] - cdf[i]) / (xs[i + 1] - xs[i]))
            .collect();
        Ok(Tabulated { xs, dens, cdf, interp: Interpolation::LinearCdf })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    pub fn grid(&self) -> &[f64] {
        &self.xs
    }

    fn cell(&self, x: f64) -> usize {
        let j = self.xs.partition_point(|&v| v <= x);
        j.saturating_sub(1).min(self.xs.len() - 2)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if !(x >= a && x <= b) {
            return 0.0;
        }
        let i = self.cell(x);
        match self.interp {
            Interpolation::LinearPdf => {
                let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
                self.dens[i] + t * (self.dens[i + 1] - self.dens[i])
            }
            Interpolation::LinearCdf => self.dens[i],
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        let i = self.cell(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = x - self.xs[i];
        let c = match self.interp {
            Interpolation::LinearPdf => {
                let slope = (self.dens[i + 1] - self.dens[i]) / h;
                self.cdf[i] + self.dens[i] * t + 0.5 * slope * t * t
            }
            Interpolation::LinearCdf => self.cdf[i] + self.dens[i] * t,
        };
        c.clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let (a, b) = self.support();
        if p <= 0.0 {
            return a;
        }
        if p >= 1.0 {
            return b;
        }
        let j = self.cdf.partition_point(|&c| c < p).clamp(1, self.xs.len() - 1);
        let i = j - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let target = p - self.cdf[i];
        let t = match self.interp {
            Interpolation::LinearCdf => target / self.dens[i],
            Interpolation::LinearPdf => {
                let p0 = self.dens[i];
                let slope = (self.dens[i + 1] - p0) / h;
                // root of p0 t + slope t²/2 = target, in the cancellation-free form
                let disc = (p0 * p0 + 2.0 * slope * target).max(0.0);
                let denom = p0 + libm::sqrt(disc);
                if denom > 0.0 {
                    2.0 * target / denom
                } else {
                    0.0
                }
            }
        };
        (self.xs[i] + t.clamp(0.0, h)).clamp(a, b)
    }

    /// (x, pdf, cdf) at every grid node, for inspection dumps.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.xs.len()).map(move |i| {
            let x = self.xs[i];
            let p = match self.interp {
                Interpolation::LinearPdf => self.dens[i],
                Interpolation::LinearCdf => self.dens[i.min(self.dens.len() - 1)],
            };
            (x, p, self.cdf[i])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_pdf_reproduces_triangle() {
        let t = Tabulated::from_pdf(alloc::vec![0.0, 0.4, 1.0], alloc::vec![0.0, 2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(t.pdf(0.2), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.cdf(0.4), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(t.cdf(0.2), 0.1, epsilon = 1e-15);
        for &p in &[0.01, 0.1, 0.4, 0.77, 0.999] {
            assert_abs_diff_eq!(t.cdf(t.quantile(p)), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_cdf_is_piecewise_uniform() {
        let t = Tabulated::from_cdf(alloc::vec![0.0, 1.0, 3.0], alloc::vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(t.pdf(0.5), 0.5);
        assert_eq!(t.pdf(2.0), 0.25);
        assert_eq!(t.quantile(0.75), 2.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Tabulated::from_pdf(alloc::vec![0.0, 0.0], alloc::vec![1.0, 1.0]).is_err());
        assert!(Tabulated::from_pdf(alloc::vec![0.0, 1.0], alloc::vec![-1.0, 1.0]).is_err());
        assert!(Tabulated::from_cdf(alloc::vec![0.0, 1.0, 2.0], alloc::vec![0.0, 0.7, 0.5]).is_err());
    }
}
