//! Derivative-free minimization: golden-section line search, Powell's
//! direction set, and the downhill simplex. [`network`] adapts them to
//! training a network by minimizing its total error.

use std::cell::{Cell, RefCell};
use std::fmt::Write as _;

mod line;
pub mod network;
mod powell;
mod simplex;

pub use line::{line_minimize, LineMinimum};
pub use network::{flatten_weights, powell_train, unflatten_weights, PowellTrainOptions, PowellTrainOutcome};
pub use powell::{powell_minimize, random_directions, PowellOptions};
pub use simplex::{simplex_minimize, SimplexOptions, SimplexResult};

/// A scalar function of a fixed-length real vector.
pub trait Objective {
    fn dimension(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
}

/// [`Objective`] backed by a closure.
pub struct FnObjective<F> {
    dimension: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub evaluations: usize,
    pub best_value: f64,
}

/// `evaluation_count,best_value` lines.
pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::new();
    for p in trace {
        let _ = writeln!(out, "{},{}", p.evaluations, p.best_value);
    }
    out
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// One entry per improvement of the best value seen.
    pub trace: Vec<TracePoint>,
}

/// Wraps an objective with an evaluation counter and best-value trace. NaN
/// results are read as `+inf` so comparisons stay total.
pub(crate) struct Counted<'a, O: ?Sized> {
    objective: &'a O,
    evaluations: Cell<usize>,
    best: Cell<f64>,
    trace: RefCell<Vec<TracePoint>>,
}

impl<'a, O: Objective + ?Sized> Counted<'a, O> {
    pub(crate) fn new(objective: &'a O) -> Self {
        Self {
            objective,
            evaluations: Cell::new(0),
            best: Cell::new(f64::INFINITY),
            trace: RefCell::new(Vec::new()),
        }
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let n = self.evaluations.get() + 1;
        self.evaluations.set(n);
        let v = self.objective.evaluate(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best.get() {
            self.best.set(v);
            self.trace.borrow_mut().push(TracePoint {
                evaluations: n,
                best_value: v,
            });
        }
        v
    }

    pub(crate) fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    pub(crate) fn into_trace(self) -> Vec<TracePoint> {
        self.trace.into_inner()
    }
}

pub(crate) fn axpy(point: &[f64], step: f64, direction: &[f64]) -> Vec<f64> {
    point.iter().zip(direction).map(|(p, d)| p + step * d).collect()
}
