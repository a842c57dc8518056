//! Momentum backpropagation over the sum-of-squares error, one pattern at a
//! time, with an accuracy-driven stopping rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::net::{InitRange, Network, WeightMatrix};

/// Any single-pattern error above this is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Learning rate.
    pub alpha: f64,
    /// Momentum: fraction of the previous weight change carried into the next.
    pub lambda: f64,
    /// Sigmoid steepness.
    pub sigma: f64,
    pub hidden_sizes: Vec<usize>,
    pub max_epochs: usize,
    /// Epochs without a strict accuracy improvement before training stops.
    pub patience: usize,
    /// Clamp every weight to `[-clip, clip]` after each update.
    pub weight_clip: Option<f64>,
    pub init: InitRange,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            lambda: 0.5,
            sigma: 1.0,
            hidden_sizes: vec![10],
            max_epochs: 1000,
            patience: 20,
            weight_clip: None,
            init: InitRange::default(),
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(1..=2).contains(&self.hidden_sizes.len()) || self.hidden_sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "hidden sizes must be one or two positive counts, got {:?}",
                self.hidden_sizes
            )));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if let Some(clip) = self.weight_clip {
            if !(clip > 0.0) {
                return Err(Error::invalid(format!("weight clip must be positive, got {clip}")));
            }
        }
        Ok(())
    }

    /// Fresh network for this configuration, seeded from `self.seed`.
    pub fn init_network(&self, input_size: usize, output_size: usize) -> Result<Network> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Network::random(
            input_size,
            &self.hidden_sizes,
            output_size,
            self.sigma,
            self.init,
            &mut rng,
        )
    }
}

/// One training example: network input and one-hot target.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Pattern {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Self { input, target }
    }

    pub fn class(&self) -> usize {
        argmax(&self.target)
    }
}

/// `E = 1/2 * sum_k (t_k - y_k)^2`.
pub fn error(targets: &[f64], outputs: &[f64]) -> Result<f64> {
    if targets.len() != outputs.len() {
        return Err(Error::Shape {
            what: "error vectors",
            expected: targets.len(),
            found: outputs.len(),
        });
    }
    Ok(0.5 * targets.iter().zip(outputs).map(|(t, y)| (t - y) * (t - y)).sum::<f64>())
}

/// Pattern error and its gradient `dE/dw` for every weight, shaped like the
/// network's weight matrices.
pub fn error_gradient(net: &Network, input: &[f64], target: &[f64]) -> Result<(f64, Vec<WeightMatrix>)> {
    let acts = net.forward(input)?;
    check_target(net, target)?;
    let e = error(target, acts.output())?;
    let deltas = layer_deltas(net, &acts.layers, target);
    let grads = net
        .layers()
        .iter()
        .enumerate()
        .map(|(l, m)| {
            let prev = if l == 0 { input } else { &acts.layers[l - 1] };
            let mut g = WeightMatrix::zeros(m.fan_in(), m.fan_out());
            for (k, &d) in deltas[l].iter().enumerate() {
                for (i, &x) in prev.iter().enumerate() {
                    g.set(i, k, -d * x);
                }
                g.set(m.fan_in(), k, -d);
            }
            g
        })
        .collect();
    Ok((e, grads))
}

fn check_target(net: &Network, target: &[f64]) -> Result<()> {
    if target.len() != net.output_size() {
        return Err(Error::Shape {
            what: "target",
            expected: net.output_size(),
            found: target.len(),
        });
    }
    Ok(())
}

/// Backpropagated deltas for each weight layer:
/// output `d_k = (t_k - y_k) f'(y_k)`, hidden `d_j = f'(z_j) sum_k d_k w_jk`.
fn layer_deltas(net: &Network, acts: &[Vec<f64>], target: &[f64]) -> Vec<Vec<f64>> {
    let sigma = net.sigma();
    let layers = net.layers();
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); layers.len()];
    let last = layers.len() - 1;
    deltas[last] = acts[last]
        .iter()
        .zip(target)
        .map(|(&y, &t)| (t - y) * crate::net::sigmoid_derivative(y, sigma))
        .collect();
    for l in (0..last).rev() {
        let next = &layers[l + 1];
        deltas[l] = acts[l]
            .iter()
            .enumerate()
            .map(|(j, &z)| {
                let back: f64 = deltas[l + 1].iter().zip(next.row(j)).map(|(d, w)| d * w).sum();
                crate::net::sigmoid_derivative(z, sigma) * back
            })
            .collect();
    }
    deltas
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState {
    pub net: Network,
    /// Last weight change, same shapes as the weights.
    pub previous_deltas: Vec<WeightMatrix>,
    pub epoch: usize,
    pub best_accuracy: f64,
    pub epochs_since_improvement: usize,
}

impl TrainingState {
    pub fn new(net: Network) -> Self {
        let previous_deltas = net
            .layers()
            .iter()
            .map(|m| WeightMatrix::zeros(m.fan_in(), m.fan_out()))
            .collect();
        Self {
            net,
            previous_deltas,
            epoch: 0,
            best_accuracy: 0.0,
            epochs_since_improvement: 0,
        }
    }
}

/// One online update `dw = alpha * delta * activation + lambda * dw_prev`,
/// applied immediately. Returns the pattern error measured before the update.
pub fn backprop_step(state: &mut TrainingState, input: &[f64], target: &[f64], hp: &HyperParams) -> Result<f64> {
    let (e, grads) = error_gradient(&state.net, input, target)?;
    let clip = hp.weight_clip;
    for ((layer, grad), prev) in state
        .net
        .layers_mut()
        .iter_mut()
        .zip(&grads)
        .zip(state.previous_deltas.iter_mut())
    {
        for ((w, g), dw) in layer
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(prev.as_mut_slice())
        {
            *dw = -hp.alpha * g + hp.lambda * *dw;
            *w += *dw;
            if let Some(c) = clip {
                *w = w.clamp(-c, c);
            }
        }
    }
    Ok(e)
}

/// Fraction of patterns whose output argmax equals the target argmax.
pub fn accuracy(net: &Network, patterns: &[Pattern]) -> f64 {
    if patterns.is_empty() {
        return 0.0;
    }
    let hits = patterns
        .iter()
        .filter(|p| argmax(net.forward_unchecked(&p.input).output()) == p.class())
        .count();
    hits as f64 / patterns.len() as f64
}

/// Sum of pattern errors over the dataset.
pub fn total_error(net: &Network, patterns: &[Pattern]) -> f64 {
    patterns
        .iter()
        .map(|p| {
            let acts = net.forward_unchecked(&p.input);
            0.5 * p
                .target
                .iter()
                .zip(acts.output())
                .map(|(t, y)| (t - y) * (t - y))
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best training accuracy.
    pub net: Network,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_accuracy: f64,
    /// Number of single-pattern weight updates performed.
    pub pattern_updates: usize,
}

impl TrainOutcome {
    /// First epoch whose training accuracy reached `threshold`.
    pub fn epochs_to_reach(&self, threshold: f64) -> Option<usize> {
        self.trace
            .iter()
            .find(|r| r.train_accuracy >= threshold)
            .map(|r| r.epoch)
    }

    /// `epoch,train_accuracy` lines.
    pub fn trace_csv(&self) -> String {
        self.trace
            .iter()
            .map(|r| format!("{},{}\n", r.epoch, r.train_accuracy))
            .collect()
    }
}

pub(crate) fn validate_patterns(patterns: &[Pattern]) -> Result<(usize, usize)> {
    let first = patterns
        .first()
        .ok_or_else(|| Error::EmptyDataset("no training patterns".into()))?;
    let (n_in, n_out) = (first.input.len(), first.target.len());
    for p in patterns {
        if p.input.len() != n_in {
            return Err(Error::Shape {
                what: "pattern input",
                expected: n_in,
                found: p.input.len(),
            });
        }
        if p.target.len() != n_out {
            return Err(Error::Shape {
                what: "pattern target",
                expected: n_out,
                found: p.target.len(),
            });
        }
        let ones = p.target.iter().filter(|&&t| t == 1.0).count();
        let zeros = p.target.iter().filter(|&&t| t == 0.0).count();
        if ones != 1 || ones + zeros != n_out {
            return Err(Error::invalid("targets must be one-hot"));
        }
        if p.input.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("pattern input contains a non-finite value"));
        }
    }
    Ok((n_in, n_out))
}

/// Trains a freshly initialized network (see [`HyperParams::init_network`]).
pub fn train(patterns: &[Pattern], hp: &HyperParams) -> Result<TrainOutcome> {
    let (n_in, n_out) = validate_patterns(patterns)?;
    let net = hp.init_network(n_in, n_out)?;
    train_from(net, patterns, hp)
}

/// Trains `net` in dataset order until `max_epochs` or until `patience` epochs
/// pass without a strict improvement in training accuracy.
pub fn train_from(net: Network, patterns: &[Pattern], hp: &HyperParams) -> Result<TrainOutcome> {
    hp.validate()?;
    let (n_in, n_out) = validate_patterns(patterns)?;
    if net.input_size() != n_in || net.output_size() != n_out {
        return Err(Error::invalid("network shape does not match the patterns"));
    }
    let mut state = TrainingState::new(net);
    state.best_accuracy = f64::NEG_INFINITY;
    let mut best_net = state.net.clone();
    let mut best_epoch = 0;
    let mut trace = Vec::new();
    let mut updates = 0;

    for epoch in 1..=hp.max_epochs {
        state.epoch = epoch;
        for p in patterns {
            let e = backprop_step(&mut state, &p.input, &p.target, hp)?;
            updates += 1;
            if !e.is_finite() || e > DIVERGENCE_LIMIT {
                return Err(Error::Diverged { epoch });
            }
        }
        if state
            .net
            .layers()
            .iter()
            .any(|m| m.as_slice().iter().any(|w| !w.is_finite()))
        {
            return Err(Error::Diverged { epoch });
        }
        let acc = accuracy(&state.net, patterns);
        trace.push(EpochRecord {
            epoch,
            train_accuracy: acc,
        });
        if acc > state.best_accuracy {
            state.best_accuracy = acc;
            state.epochs_since_improvement = 0;
            best_net = state.net.clone();
            best_epoch = epoch;
        } else {
            state.epochs_since_improvement += 1;
            if state.epochs_since_improvement >= hp.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        net: best_net,
        trace,
        best_epoch,
        best_accuracy: state.best_accuracy.max(0.0),
        pattern_updates: updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perceptron(w: f64, bias: f64) -> Network {
        Network::from_layers(vec![WeightMatrix::from_rows(2, 1, vec![w, bias]).unwrap()], 1.0).unwrap()
    }

    #[test]
    fn error_examples() {
        assert_eq!(error(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(error(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 0.25);
        assert!(error(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn error_matches_naive_loop() {
        let t = [0.1, 0.9, 0.0, 1.0, 0.4, 0.25, 0.6];
        let y = [0.3, 0.2, 0.8, 0.55, 0.45, 0.05, 0.99];
        let mut acc = 0.0;
        for i in 0..7 {
            let r = t[i] - y[i];
            acc += r * r;
        }
        assert!((error(&t, &y).unwrap() - acc / 2.0).abs() < 1e-12);
        // symmetric in the sign of residuals
        assert_eq!(error(&t, &y).unwrap(), error(&y, &t).unwrap());
    }

    #[test]
    fn hand_computed_perceptron_step() {
        let mut state = TrainingState::new(perceptron(0.0, 0.0));
        let hp = HyperParams {
            alpha: 1.0,
            lambda: 0.0,
            sigma: 1.0,
            ..HyperParams::default()
        };
        backprop_step(&mut state, &[1.0], &[1.0], &hp).unwrap();
        let m = &state.net.layers()[0];
        assert!((m.get(0, 0) - 0.125).abs() < 1e-15);
        assert!((m.bias(0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn momentum_accumulates_on_frozen_weights() {
        let net = perceptron(0.3, -0.2);
        let hp = HyperParams {
            alpha: 0.7,
            lambda: 0.4,
            ..HyperParams::default()
        };
        let mut state = TrainingState::new(net.clone());
        backprop_step(&mut state, &[0.8], &[1.0], &hp).unwrap();
        let first = state.previous_deltas[0].clone();
        // freeze the weights, keep the momentum term
        state.net = net;
        backprop_step(&mut state, &[0.8], &[1.0], &hp).unwrap();
        for (a, b) in first.as_slice().iter().zip(state.previous_deltas[0].as_slice()) {
            assert!((b - a * 1.4).abs() < 1e-15);
        }
    }

    #[test]
    fn small_step_never_increases_pattern_error() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for hidden in [vec![6], vec![5, 4]] {
            let net = Network::random(
                4,
                &hidden,
                3,
                1.0,
                InitRange {
                    lo: -1.0,
                    hi: 1.0,
                    threshold: 2.0,
                },
                &mut rng,
            )
            .unwrap();
            let input = [0.5, -1.0, 1.5, 0.2];
            let target = [0.0, 1.0, 0.0];
            let before = error(&target, &net.predict(&input).unwrap()).unwrap();
            let mut state = TrainingState::new(net);
            let hp = HyperParams {
                alpha: 1e-3,
                lambda: 0.0,
                ..HyperParams::default()
            };
            backprop_step(&mut state, &input, &target, &hp).unwrap();
            let after = error(&target, &state.net.predict(&input).unwrap()).unwrap();
            assert!(after <= before);
        }
    }

    #[test]
    fn single_pattern_overfits() {
        let patterns = vec![Pattern::new(vec![0.4, -0.3, 1.0], vec![0.0, 1.0])];
        let hp = HyperParams {
            hidden_sizes: vec![3],
            max_epochs: 200,
            ..HyperParams::default()
        };
        let out = train(&patterns, &hp).unwrap();
        assert_eq!(out.best_accuracy, 1.0);
        assert_eq!(accuracy(&out.net, &patterns), 1.0);
    }

    #[test]
    fn train_rejects_bad_input() {
        let hp = HyperParams::default();
        assert!(matches!(train(&[], &hp), Err(Error::EmptyDataset(_))));
        let not_one_hot = vec![Pattern::new(vec![0.0], vec![0.0, 0.0])];
        assert!(train(&not_one_hot, &hp).is_err());
        let bad_hp = HyperParams {
            lambda: 1.0,
            ..HyperParams::default()
        };
        let ok = vec![Pattern::new(vec![0.0], vec![1.0, 0.0])];
        assert!(train(&ok, &bad_hp).is_err());
    }

    #[test]
    fn divergence_names_epoch() {
        // sigmoid keeps E bounded; an extreme sigma makes f' overflow the weights
        let patterns = vec![
            Pattern::new(vec![1.0, -1.0], vec![1.0, 0.0]),
            Pattern::new(vec![-1.0, 1.0], vec![0.0, 1.0]),
        ];
        let hp = HyperParams {
            alpha: 1e3,
            sigma: 1e308,
            hidden_sizes: vec![2],
            ..HyperParams::default()
        };
        let net = Network::zeros(2, &[2], 2, hp.sigma).unwrap();
        match train_from(net, &patterns, &hp) {
            Err(Error::Diverged { epoch }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_format() {
        let patterns = vec![Pattern::new(vec![1.0], vec![1.0, 0.0])];
        let hp = HyperParams {
            hidden_sizes: vec![2],
            max_epochs: 3,
            patience: 10,
            ..HyperParams::default()
        };
        let out = train(&patterns, &hp).unwrap();
        let csv = out.trace_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("1,"));
    }
}
