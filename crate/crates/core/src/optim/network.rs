//! Training a network by handing its weights to Powell's method as one flat
//! vector and minimizing the total error over the dataset.

use std::cell::Cell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{powell_minimize, random_directions, Objective, PowellOptions, TracePoint};
use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::net::{Network, WeightMatrix};
use crate::training::{validate_patterns, HyperParams, Pattern};

/// All weights, layer by layer, each matrix row-major with its bias row last.
pub fn flatten_weights(net: &Network) -> Vec<f64> {
    net.layers().iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

/// Inverse of [`flatten_weights`] for the given `(rows, cols)` shapes.
pub fn unflatten_weights(values: &[f64], shapes: &[(usize, usize)]) -> Result<Vec<WeightMatrix>> {
    let expected: usize = shapes.iter().map(|(r, c)| r * c).sum();
    if values.len() != expected {
        return Err(Error::Shape {
            what: "flattened weights",
            expected,
            found: values.len(),
        });
    }
    let mut offset = 0;
    shapes
        .iter()
        .map(|&(rows, cols)| {
            let m = WeightMatrix::from_rows(rows, cols, values[offset..offset + rows * cols].to_vec());
            offset += rows * cols;
            m
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PowellTrainOptions {
    pub powell: PowellOptions,
    /// Small random initial directions instead of the unit basis.
    pub random_directions: bool,
    /// Component range of random directions.
    pub direction_scale: f64,
    /// Record the evaluation at which training accuracy first reached this.
    pub accuracy_threshold: Option<f64>,
}

impl Default for PowellTrainOptions {
    fn default() -> Self {
        Self {
            powell: PowellOptions {
                line_tol: 1e-4,
                ..PowellOptions::default()
            },
            random_directions: false,
            direction_scale: 0.01,
            accuracy_threshold: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowellTrainOutcome {
    pub net: Network,
    /// `(evaluation count, best total error)` at every improvement.
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
    pub iterations: usize,
    pub initial_error: f64,
    pub final_error: f64,
    pub final_accuracy: f64,
    /// First evaluation whose new best point met `accuracy_threshold`.
    pub evaluations_to_threshold: Option<usize>,
}

/// Total error of the network whose weights are `x`.
struct NetworkObjective<'a> {
    template: &'a Network,
    shapes: Vec<(usize, usize)>,
    patterns: &'a [Pattern],
    threshold: Option<f64>,
    evaluations: Cell<usize>,
    best: Cell<f64>,
    reached_at: Cell<Option<usize>>,
}

impl NetworkObjective<'_> {
    fn network(&self, x: &[f64]) -> Network {
        let layers = unflatten_weights(x, &self.shapes).expect("dimension checked by the optimizer");
        self.template
            .with_layers(layers)
            .expect("shapes taken from the template")
    }
}

impl Objective for NetworkObjective<'_> {
    fn dimension(&self) -> usize {
        self.shapes.iter().map(|(r, c)| r * c).sum()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let net = self.network(x);
        let mut total = 0.0;
        let mut hits = 0;
        for p in self.patterns {
            let acts = net.forward_unchecked(&p.input);
            let y = acts.output();
            total += 0.5 * p.target.iter().zip(y).map(|(t, y)| (t - y) * (t - y)).sum::<f64>();
            hits += usize::from(argmax(y) == p.class());
        }
        let n = self.evaluations.get() + 1;
        self.evaluations.set(n);
        if total < self.best.get() {
            self.best.set(total);
            let acc = hits as f64 / self.patterns.len() as f64;
            if self.reached_at.get().is_none() && self.threshold.is_some_and(|t| acc >= t) {
                self.reached_at.set(Some(n));
            }
        }
        total
    }
}

/// Minimizes the total error over `patterns` with Powell's method, starting
/// from `start` (warm start) or from a network initialized per `hp`.
pub fn powell_train(
    patterns: &[Pattern],
    hp: &HyperParams,
    start: Option<&Network>,
    opts: &PowellTrainOptions,
) -> Result<PowellTrainOutcome> {
    let (n_in, n_out) = validate_patterns(patterns)?;
    let net = match start {
        Some(net) => {
            if net.input_size() != n_in || net.output_size() != n_out {
                return Err(Error::invalid("warm-start network does not match the patterns"));
            }
            net.clone()
        }
        None => hp.init_network(n_in, n_out)?,
    };
    let objective = NetworkObjective {
        template: &net,
        shapes: net.shapes(),
        patterns,
        threshold: opts.accuracy_threshold,
        evaluations: Cell::new(0),
        best: Cell::new(f64::INFINITY),
        reached_at: Cell::new(None),
    };
    let x0 = flatten_weights(&net);
    let directions = opts.random_directions.then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(1));
        random_directions(x0.len(), opts.direction_scale, &mut rng)
    });
    let result = powell_minimize(&objective, &x0, directions, &opts.powell)?;
    let trained = objective.network(&result.point);
    Ok(PowellTrainOutcome {
        final_accuracy: crate::training::accuracy(&trained, patterns),
        net: trained,
        initial_error: result.trace.first().map_or(result.value, |t| t.best_value),
        final_error: result.value,
        evaluations: result.evaluations,
        iterations: result.iterations,
        trace: result.trace,
        evaluations_to_threshold: objective.reached_at.get(),
    })
}
