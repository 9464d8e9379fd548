//! Gauss-Legendre quadrature on bounded intervals.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// Node-count and tolerance settings for the deterministic quadrature used by
/// MMD evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Total nodes per axis, spread over the panels of the support.
    pub nodes: usize,
    /// Negative raw MMD² values with magnitude below this are clamped to 0.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes: 256, tolerance: 1e-9 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::invalid("quadrature needs at least 2 nodes"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("quadrature tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and P_{n-1}(z)
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// A quadrature rule mapped onto an interval, possibly split into panels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadGrid {
    /// Single `n`-point Gauss-Legendre panel on [a, b].
    pub fn interval(a: f64, b: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        QuadGrid {
            nodes: x.iter().map(|t| mid + half * t).collect(),
            weights: w.iter().map(|v| half * v).collect(),
        }
    }

    /// Composite rule on [a, b] split at the interior `breaks`, with roughly
    /// `total` nodes shared in proportion to panel length (at least 4 each).
    ///
    /// Splitting at the kinks of piecewise-smooth densities keeps the
    /// Gauss-Legendre convergence rate.
    pub fn composite(a: f64, b: f64, breaks: &[f64], total: usize) -> Self {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (b - a));
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(a);
        edges.extend(cuts);
        edges.push(b);
        let len = b - a;
        let mut grid = QuadGrid { nodes: Vec::new(), weights: Vec::new() };
        for pair in edges.windows(2) {
            let share = (pair[1] - pair[0]) / len * total as f64;
            let n = (libm::ceil(share) as usize).max(4);
            let panel = QuadGrid::interval(pair[0], pair[1], n);
            grid.nodes.extend(panel.nodes);
            grid.weights.extend(panel.weights);
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}
