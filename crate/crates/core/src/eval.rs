//! Output decisions, label smoothing, confusion matrices and rates.

use std::fmt::Write as _;

use crate::dataset::{CategoryMap, Dataset};
use crate::error::{Error, Result};
use crate::net::Network;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One-hot vector with the 1 at [`argmax`].
pub fn normalize_output(raw: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; raw.len()];
    if !raw.is_empty() {
        out[argmax(raw)] = 1.0;
    }
    out
}

/// Median of each position's centred window, clipped to the slice.
///
/// Clipped windows near the ends can hold an even number of labels. Of the two
/// middle values, the position keeps its own label if it is one of them, and
/// takes the lower one otherwise.
pub fn median_filter<T: Ord + Copy>(labels: &[T], window: usize) -> Result<Vec<T>> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "median window must be odd and >= 3, got {window}"
        )));
    }
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    Ok((0..labels.len())
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&labels[i.saturating_sub(half)..(i + half + 1).min(labels.len())]);
            buf.sort_unstable();
            let n = buf.len();
            if n % 2 == 1 || buf[n / 2] == labels[i] {
                buf[n / 2]
            } else {
                buf[n / 2 - 1]
            }
        })
        .collect())
}

/// Filters consecutive segments independently; `lengths` must sum to
/// `labels.len()`.
pub fn median_filter_segments<T: Ord + Copy>(labels: &[T], lengths: &[usize], window: usize) -> Result<Vec<T>> {
    if lengths.iter().sum::<usize>() != labels.len() {
        return Err(Error::Shape {
            what: "segment lengths",
            expected: labels.len(),
            found: lengths.iter().sum(),
        });
    }
    let mut out = Vec::with_capacity(labels.len());
    let mut start = 0;
    for &len in lengths {
        out.extend(median_filter(&labels[start..start + len], window)?);
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    categories: Vec<String>,
    /// `counts[true][predicted]`
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(categories: Vec<String>) -> Self {
        let n = categories.len();
        Self {
            categories,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(categories: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = categories.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::Shape {
                what: "confusion counts",
                expected: n,
                found: counts.len(),
            });
        }
        Ok(Self { categories, counts })
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row-normalized rates; empty rows stay all zero.
    pub fn rates(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let sum: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if sum == 0 { 0.0 } else { c as f64 / sum as f64 })
                    .collect()
            })
            .collect()
    }

    /// Unweighted mean of the per-class diagonal rates.
    pub fn average_rate(&self) -> Result<f64> {
        let mut sum = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return Err(Error::EmptyClass {
                    class: self.categories[i].clone(),
                });
            }
            sum += row[i] as f64 / total as f64;
        }
        Ok(sum / self.counts.len() as f64)
    }

    /// Fraction of all scored frames on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / total as f64
    }

    /// Aligned percentage table, rows are true classes.
    pub fn to_table(&self) -> String {
        let width = self.categories.iter().map(String::len).max().unwrap_or(0).max(8);
        let mut out = String::new();
        let _ = write!(out, "{:width$}", "");
        for name in &self.categories {
            let _ = write!(out, " {name:>width$}");
        }
        out.push('\n');
        for (name, row) in self.categories.iter().zip(self.rates()) {
            let _ = write!(out, "{name:width$}");
            for r in row {
                let _ = write!(out, " {:>width$.2}", r * 100.0);
            }
            out.push('\n');
        }
        out
    }

    /// `true,predicted,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true,predicted,count\n");
        for (t, row) in self.counts.iter().enumerate() {
            for (p, c) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", self.categories[t], self.categories[p], c);
            }
        }
        out
    }
}

/// Counts `(truth, prediction)` pairs over category indices.
pub fn confusion(truth: &[usize], predicted: &[usize], categories: &[String]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape {
            what: "prediction list",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let n = categories.len();
    let mut cm = ConfusionMatrix::new(categories.to_vec());
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n || p >= n {
            return Err(Error::invalid(format!("category index {} out of range", t.max(p))));
        }
        cm.record(t, p);
    }
    Ok(cm)
}

/// Rate as a percentage with `decimals` places, e.g. `96.6`.
pub fn format_rate(rate: f64, decimals: usize) -> String {
    format!("{:.*}", decimals, rate * 100.0)
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Median-filter window applied per sequence to the predicted categories.
    pub median_window: Option<usize>,
    /// Report normalized (one-hot) output vectors instead of raw ones.
    /// Decisions always use the argmax, so rates do not depend on this.
    pub normalize: bool,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub average_rate: f64,
    pub accuracy: f64,
    /// Per-frame output vectors in dataset order (one-hot if `normalize`).
    pub outputs: Vec<Vec<f64>>,
    pub truth: Vec<usize>,
    pub predicted: Vec<usize>,
}

/// Classifies every frame of `test` and scores it under `categories`.
pub fn evaluate(net: &Network, test: &Dataset, categories: &CategoryMap, opts: &EvalOptions) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    if net.output_size() != categories.len() {
        return Err(Error::Shape {
            what: "network outputs vs categories",
            expected: categories.len(),
            found: net.output_size(),
        });
    }
    let mut truth = Vec::with_capacity(test.len());
    let mut predicted = Vec::with_capacity(test.len());
    let mut outputs = Vec::with_capacity(test.len());
    let mut lengths = Vec::with_capacity(test.sequences().len());
    for seq in test.sequences() {
        lengths.push(seq.frames.len());
        for frame in &seq.frames {
            let t = categories
                .category_of(frame.label)
                .ok_or_else(|| Error::UnknownCategory {
                    label: frame.label.name().into(),
                })?;
            let out = net.predict(frame.features.as_slice())?;
            truth.push(t);
            predicted.push(argmax(&out));
            outputs.push(if opts.normalize { normalize_output(&out) } else { out });
        }
    }
    if let Some(window) = opts.median_window {
        predicted = median_filter_segments(&predicted, &lengths, window)?;
    }
    let matrix = confusion(&truth, &predicted, categories.names())?;
    Ok(Evaluation {
        average_rate: matrix.average_rate()?,
        accuracy: matrix.accuracy(),
        matrix,
        outputs,
        truth,
        predicted,
    })
}
