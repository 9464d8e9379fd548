//! Simulator interface and benchmark models.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::exec::Executor;

/// A deterministic scalar model of `dim()` inputs.
pub trait Model: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// Whether `eval` may be called from several threads at once.
    fn concurrent(&self) -> bool {
        true
    }
}

/// `sin x1 + 1.5 sin² x2 + 0.5 x3⁴ sin x1` on [0, 1]³.
pub fn ishigami_variant(x: &[f64; 3]) -> f64 {
    let s1 = libm::sin(x[0]);
    let s2 = libm::sin(x[1]);
    s1 + 1.5 * s2 * s2 + 0.5 * x[2] * x[2] * x[2] * x[2] * s1
}

/// Ishigami-type test function with three inputs on the unit cube.
#[derive(Debug, Clone, Copy, Default)]
pub struct IshigamiVariant;

impl Model for IshigamiVariant {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> f64 {
        ishigami_variant(&[x[0], x[1], x[2]])
    }
}

/// A model backed by a closure.
pub struct FnModel<F> {
    dim: usize,
    f: F,
    concurrent: bool,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnModel { dim, f, concurrent: true }
    }

    /// Marks the closure as unsafe to call concurrently.
    pub fn serial(mut self) -> Self {
        self.concurrent = false;
        self
    }
}

impl<F> core::fmt::Debug for FnModel<F> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnModel").field("dim", &self.dim).field("concurrent", &self.concurrent).finish()
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Model for FnModel<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn concurrent(&self) -> bool {
        self.concurrent
    }
}

/// Wraps a model and counts its evaluations.
#[derive(Debug, Default)]
pub struct CountingModel<M> {
    inner: M,
    calls: AtomicUsize,
}

impl<M: Model> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        CountingModel { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<M: Model> Model for CountingModel<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }
}

/// Evaluates `model` on every row of `columns`, in parallel when allowed.
pub fn evaluate<M: Model + ?Sized, E: Executor>(model: &M, columns: &[Vec<f64>], exec: &E) -> Vec<f64> {
    let n = columns.first().map_or(0, Vec::len);
    let row = |i: usize| -> Vec<f64> { columns.iter().map(|c| c[i]).collect() };
    if model.concurrent() {
        exec.map(n, |i| model.eval(&row(i)))
    } else {
        (0..n).map(|i| model.eval(&row(i))).collect()
    }
}
