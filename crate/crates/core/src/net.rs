//! Feed-forward network with a shared parameterized sigmoid.
//!
//! Every layer boundary is a [`WeightMatrix`] of shape `(fan_in + 1) x fan_out`.
//! Row `i < fan_in` holds the weights leaving input `i`; the last row holds the
//! bias weights, whose input is the constant 1.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Logistic activation `1 / (1 + exp(-sigma * x))`.
///
/// Evaluated on the branch that keeps the exponent non-positive, so very large
/// inputs saturate to exactly 0 or 1 instead of overflowing.
pub fn sigmoid(x: f64, sigma: f64) -> f64 {
    let z = sigma * x;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`sigmoid`] written in terms of its output `y`.
pub fn sigmoid_derivative(y: f64, sigma: f64) -> f64 {
    sigma * y * (1.0 - y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            rows: fan_in + 1,
            cols: fan_out,
            data: vec![0.0; (fan_in + 1) * fan_out],
        }
    }

    /// Builds a matrix from row-major data with `rows = fan_in + 1`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows < 2 || cols == 0 {
            return Err(Error::invalid(format!(
                "weight matrix must have at least 2 rows and 1 column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape {
                what: "weight matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn fan_in(&self) -> usize {
        self.rows - 1
    }

    pub fn fan_out(&self) -> usize {
        self.cols
    }

    /// `(rows, cols)`, bias row included.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn bias(&self, col: usize) -> f64 {
        self.get(self.rows - 1, col)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Weighted sums `sum_i x_i w_ij + w_bias,j` for each output column.
    fn weighted_sums(&self, input: &[f64]) -> Vec<f64> {
        let mut sums = self.row(self.rows - 1).to_vec();
        for (i, &x) in input.iter().enumerate() {
            for (s, &w) in sums.iter_mut().zip(self.row(i)) {
                *s += x * w;
            }
        }
        sums
    }
}

/// Activations of every non-input layer, in order. The last entry is the
/// network output.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("activations always contain the output layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<WeightMatrix>,
    sigma: f64,
}

/// Uniform initialization range with a redraw threshold on `|w|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitRange {
    pub lo: f64,
    pub hi: f64,
    pub threshold: f64,
}

impl Default for InitRange {
    fn default() -> Self {
        Self {
            lo: -0.5,
            hi: 0.5,
            threshold: 10.0,
        }
    }
}

/// Draws one matrix per `(rows, cols)` shape, each weight uniform in
/// `[lo, hi]` and redrawn while `|w| > threshold`.
pub fn init_weights<R: Rng + ?Sized>(
    shapes: &[(usize, usize)],
    range: InitRange,
    rng: &mut R,
) -> Result<Vec<WeightMatrix>> {
    let InitRange { lo, hi, threshold } = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("init range [{lo}, {hi}] is empty")));
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid(format!("weight threshold {threshold} must be positive")));
    }
    // The accepted region is [lo, hi] intersected with [-threshold, threshold].
    if lo.max(-threshold) >= hi.min(threshold) {
        return Err(Error::invalid(format!(
            "no weight in [{lo}, {hi}] satisfies |w| <= {threshold}"
        )));
    }
    shapes
        .iter()
        .map(|&(rows, cols)| {
            let data = (0..rows * cols)
                .map(|_| loop {
                    let w = rng.random_range(lo..=hi);
                    if w.abs() <= threshold {
                        break w;
                    }
                })
                .collect();
            WeightMatrix::from_rows(rows, cols, data)
        })
        .collect()
}

/// Matrix shapes `(fan_in + 1, fan_out)` for the given layer sizes.
pub fn layer_shapes(input_size: usize, hidden_sizes: &[usize], output_size: usize) -> Vec<(usize, usize)> {
    let mut sizes = Vec::with_capacity(hidden_sizes.len() + 2);
    sizes.push(input_size);
    sizes.extend_from_slice(hidden_sizes);
    sizes.push(output_size);
    sizes.windows(2).map(|w| (w[0] + 1, w[1])).collect()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "sigma must be positive and finite, got {sigma}"
        )))
    }
}

impl Network {
    /// Network with all weights zero.
    pub fn zeros(input_size: usize, hidden_sizes: &[usize], output_size: usize, sigma: f64) -> Result<Self> {
        let layers = layer_shapes(input_size, hidden_sizes, output_size)
            .into_iter()
            .map(|(rows, cols)| WeightMatrix::zeros(rows - 1, cols))
            .collect();
        Self::from_layers(layers, sigma)
    }

    /// Randomly initialized network, see [`init_weights`].
    pub fn random<R: Rng + ?Sized>(
        input_size: usize,
        hidden_sizes: &[usize],
        output_size: usize,
        sigma: f64,
        range: InitRange,
        rng: &mut R,
    ) -> Result<Self> {
        let shapes = layer_shapes(input_size, hidden_sizes, output_size);
        Self::from_layers(init_weights(&shapes, range, rng)?, sigma)
    }

    /// Assembles a network from weight matrices.
    ///
    /// Zero hidden layers (a single perceptron layer) is accepted here; the
    /// training entry points require one or two.
    pub fn from_layers(layers: Vec<WeightMatrix>, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if layers.is_empty() || layers.len() > 3 {
            return Err(Error::invalid(format!(
                "a network has 1 to 3 weight layers (0 to 2 hidden), got {}",
                layers.len()
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape {
                    what: "layer fan-in",
                    expected: pair[0].fan_out(),
                    found: pair[1].fan_in(),
                });
            }
        }
        Ok(Self { layers, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|m| m.fan_out())
            .collect()
    }

    /// Every layer size from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_size()];
        sizes.extend(self.layers.iter().map(|m| m.fan_out()));
        sizes
    }

    pub fn layers(&self) -> &[WeightMatrix] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [WeightMatrix] {
        &mut self.layers
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(WeightMatrix::shape).collect()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|m| m.as_slice().len()).sum()
    }

    /// Replaces every weight, keeping shapes and sigma.
    pub fn with_layers(&self, layers: Vec<WeightMatrix>) -> Result<Self> {
        if layers.len() != self.layers.len() || layers.iter().zip(&self.layers).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::invalid("replacement weights do not match the network shape"));
        }
        Ok(Self {
            layers,
            sigma: self.sigma,
        })
    }

    /// Forward pass returning every layer's activations.
    pub fn forward(&self, input: &[f64]) -> Result<Activations> {
        if input.len() != self.input_size() {
            return Err(Error::Shape {
                what: "network input",
                expected: self.input_size(),
                found: input.len(),
            });
        }
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> Activations {
        let mut layers: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, matrix) in self.layers.iter().enumerate() {
            let previous = if l == 0 { input } else { &layers[l - 1] };
            let out: Vec<f64> = matrix
                .weighted_sums(previous)
                .into_iter()
                .map(|s| sigmoid(s, self.sigma))
                .collect();
            layers.push(out);
        }
        Activations { layers }
    }

    /// Output layer only.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut acts = self.forward(input)?;
        Ok(acts.layers.pop().unwrap_or_default())
    }

    /// Serializes to the versioned plain-text model format.
    ///
    /// ```text
    /// emonet-model 1
    /// sigma <value>
    /// layers <input> <hidden...> <output>
    /// <one line per matrix row, bias row last in each matrix>
    /// ```
    ///
    /// Reals are written with 17 significant digits, so parsing restores
    /// every weight exactly.
    pub fn to_model_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "sigma {}", fmt_exact(self.sigma));
        let sizes: Vec<String> = self.sizes().iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "layers {}", sizes.join(" "));
        for matrix in &self.layers {
            for r in 0..matrix.rows() {
                let row: Vec<String> = matrix.row(r).iter().map(|&w| fmt_exact(w)).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_model_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        parse_model(&std::fs::read_to_string(path)?)
    }
}

pub const MODEL_HEADER: &str = "emonet-model 1";

/// Largest layer the model parser accepts; guards allocation on hostile input.
const MAX_LAYER_SIZE: usize = 1 << 16;

pub(crate) fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses the model format written by [`Network::to_model_string`].
/// Blank lines and `#` comments are ignored.
pub fn parse_model(text: &str) -> Result<Network> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, header) = lines.next().ok_or_else(|| Error::parse(1, "empty model file"))?;
    if header != MODEL_HEADER {
        return Err(Error::parse(line_no, format!("expected header `{MODEL_HEADER}`")));
    }

    let (line_no, sigma_line) = lines
        .next()
        .ok_or_else(|| Error::parse(line_no, "missing sigma line"))?;
    let sigma = match sigma_line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["sigma", v] => parse_real(v, line_no)?,
        _ => return Err(Error::parse(line_no, "expected `sigma <value>`")),
    };
    check_sigma(sigma).map_err(|e| Error::parse(line_no, e.to_string()))?;

    let (line_no, layers_line) = lines
        .next()
        .ok_or_else(|| Error::parse(line_no, "missing layers line"))?;
    let mut fields = layers_line.split_whitespace();
    if fields.next() != Some("layers") {
        return Err(Error::parse(line_no, "expected `layers <sizes>`"));
    }
    let sizes = fields
        .map(|f| match f.parse::<usize>() {
            Ok(n) if n > 0 && n <= MAX_LAYER_SIZE => Ok(n),
            _ => Err(Error::parse(line_no, format!("invalid layer size `{f}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if !(2..=4).contains(&sizes.len()) {
        return Err(Error::parse(line_no, "expected 2 to 4 layer sizes"));
    }

    let mut last_line = line_no;
    let mut matrices = Vec::with_capacity(sizes.len() - 1);
    for pair in sizes.windows(2) {
        let (rows, cols) = (pair[0] + 1, pair[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line_no, row) = lines
                .next()
                .ok_or_else(|| Error::parse(last_line, "unexpected end of weights"))?;
            last_line = line_no;
            let before = data.len();
            for field in row.split_whitespace() {
                data.push(parse_real(field, line_no)?);
            }
            if data.len() - before != cols {
                return Err(Error::parse(
                    line_no,
                    format!("expected {cols} weights, found {}", data.len() - before),
                ));
            }
        }
        matrices.push(WeightMatrix::from_rows(rows, cols, data).map_err(|e| Error::parse(last_line, e.to_string()))?);
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::parse(line_no, "trailing data after weights"));
    }
    Network::from_layers(matrices, sigma).map_err(|e| Error::parse(last_line, e.to_string()))
}

pub(crate) fn parse_real(field: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("invalid real `{field}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0, 0.3), 0.5);
        assert!((sigmoid(2.0, 0.5) + sigmoid(-2.0, 0.5) - 1.0).abs() < 1e-15);
        assert!((sigmoid(10.0, 1.0) - 0.9999546).abs() < 1e-7);
        assert_eq!(sigmoid(1e6, 1.0), 1.0);
        assert_eq!(sigmoid(-1e6, 1.0), 0.0);
    }

    #[test]
    fn sigmoid_derivative_values() {
        assert_eq!(sigmoid_derivative(0.5, 1.0), 0.25);
        assert_eq!(sigmoid_derivative(0.0, 0.7), 0.0);
        // finite-difference oracle of sigmoid at x = 1
        let h = 1e-6;
        let fd = (sigmoid(1.0 + h, 1.0) - sigmoid(1.0 - h, 1.0)) / (2.0 * h);
        assert!((sigmoid_derivative(0.731059, 1.0) - fd).abs() < 1e-5);
        assert!((fd - 0.196612).abs() < 1e-5);
    }

    #[test]
    fn zero_weights_give_half() {
        let net = Network::zeros(12, &[5, 4], 7, 1.3).unwrap();
        let acts = net.forward(&[0.7; 12]).unwrap();
        assert!(acts.layers.iter().flatten().all(|&a| a == 0.5));
        let lens: Vec<usize> = acts.layers.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![5, 4, 7]);
    }

    #[test]
    fn single_perceptron_forward() {
        let layer = WeightMatrix::from_rows(2, 1, vec![1.0, 0.0]).unwrap();
        let net = Network::from_layers(vec![layer], 1.0).unwrap();
        let y = net.predict(&[2.0]).unwrap();
        assert!((y[0] - 0.880797).abs() < 1e-5);
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let net = Network::zeros(12, &[3], 2, 1.0).unwrap();
        assert!(matches!(net.forward(&[0.0; 11]), Err(Error::Shape { .. })));
    }

    #[test]
    fn invalid_networks_rejected() {
        assert!(Network::zeros(3, &[2], 2, 0.0).is_err());
        assert!(Network::zeros(3, &[2], 2, -1.0).is_err());
        assert!(Network::zeros(3, &[2, 2, 2], 2, 1.0).is_err());
        let a = WeightMatrix::zeros(3, 4);
        let b = WeightMatrix::zeros(5, 2);
        assert!(Network::from_layers(vec![a, b], 1.0).is_err());
    }

    #[test]
    fn init_respects_range_and_seed() {
        let shapes = layer_shapes(12, &[10], 7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = init_weights(&shapes, InitRange::default(), &mut rng).unwrap();
        assert!(a.iter().flat_map(|m| m.as_slice()).all(|w| (-0.5..=0.5).contains(w)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = init_weights(&shapes, InitRange::default(), &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_redraws_above_threshold() {
        let shapes = layer_shapes(12, &[29, 29], 7);
        let range = InitRange {
            lo: -3.0,
            hi: 3.0,
            threshold: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ws = init_weights(&shapes, range, &mut rng).unwrap();
        let all: Vec<f64> = ws.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
        assert!(all.iter().all(|w| w.abs() <= 1.0));
        // rejection sampling keeps the draw uniform on [-1, 1]: both halves populated
        let neg = all.iter().filter(|&&w| w < 0.0).count();
        assert!(neg > all.len() / 3 && neg < 2 * all.len() / 3);
    }

    #[test]
    fn init_rejects_impossible_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shapes = [(3, 2)];
        let bad = InitRange {
            lo: 2.0,
            hi: 3.0,
            threshold: 1.0,
        };
        assert!(init_weights(&shapes, bad, &mut rng).is_err());
        let empty = InitRange {
            lo: 1.0,
            hi: 1.0,
            threshold: 5.0,
        };
        assert!(init_weights(&shapes, empty, &mut rng).is_err());
        let zero_t = InitRange {
            lo: -1.0,
            hi: 1.0,
            threshold: 0.0,
        };
        assert!(init_weights(&shapes, zero_t, &mut rng).is_err());
    }

    #[test]
    fn model_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Network::random(12, &[4, 5], 7, 0.91, InitRange::default(), &mut rng).unwrap();
        let text = net.to_model_string();
        let back = parse_model(&text).unwrap();
        assert_eq!(net, back);
        assert_eq!(text, back.to_model_string());
    }

    #[test]
    fn model_parse_errors_name_lines() {
        let net = Network::zeros(2, &[2], 2, 1.0).unwrap();
        let text = net.to_model_string();
        let bad = text.replacen("layers 2 2 2", "layers 2 x 2", 1);
        assert!(matches!(parse_model(&bad), Err(Error::Parse { line: 3, .. })));
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_model(&truncated), Err(Error::Parse { .. })));
        assert!(parse_model("emonet-model 2\n").is_err());
        assert!(parse_model("").is_err());
    }
}
