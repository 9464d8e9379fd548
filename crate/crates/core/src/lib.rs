//! Kernel-based first- and second-level global sensitivity analysis.
//!
//! The crate estimates HSIC dependence measures between simulator inputs and
//! output from a single Monte Carlo sample, including importance-weighted
//! estimators for a sample drawn under a law other than the target one, and
//! builds second-level indices measuring how uncertainty on the input laws
//! moves first-level results.
//!
//! Everything here is pure computation on in-memory data and only needs
//! `core` and `alloc`. File formats, the CLI and thread pools live in the
//! companion `gsa2` crate, which plugs parallelism in through [`Executor`].
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`kernels`] | Gaussian, Mallows and MMD distribution kernels, Gram matrices, bandwidth rules |
//! | [`densities`] | 1-D densities, ensembles of laws, drawing-law constructions, likelihood ratios |
//! | [`hsic`] | V-statistic HSIC (plain and weighted), R² indices, Gamma and permutation tests |
//! | [`engine`] | quantities of interest, single- and double-loop second-level analysis |
//! | [`models`] | benchmark models and the model trait |
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod densities;
pub mod engine;
mod error;
pub mod exec;
pub mod hsic;
pub mod kernels;
pub mod math;
pub mod models;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use exec::{Executor, Serial};
