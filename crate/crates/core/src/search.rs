//! Stepped grid search over sigma, alpha, lambda and hidden sizes, with the
//! improving configurations appended to a plain-text records file.
//!
//! A records file holds one record per line:
//!
//! ```text
//! sigma,alpha,lambda,hidden_sizes,train_rate,test_rate,seed
//! ```
//!
//! with hidden sizes written as `29x28`. Lines starting with `#` are comments,
//! except `# params ...` lines, which set the remaining training parameters
//! (and the optional timestamp) for the records that follow them.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{to_training_pairs, CategoryMap, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::net::{parse_real, InitRange, Network};
use crate::training::{train, HyperParams};

/// Header comment written at the top of a new records file.
pub const RECORDS_HEADER: &str = "# sigma,alpha,lambda,hidden_sizes,train_rate,test_rate,seed";

/// Default number of epochs each combination is trained for.
pub const DEFAULT_EPOCHS_PER_COMBO: usize = 500;

/// `lo, lo + step, ...` up to and including `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let axis = Self { lo, hi, step };
        axis.validate()?;
        Ok(axis)
    }

    pub fn single(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::invalid(format!(
                "range [{}, {}] is not ordered",
                self.lo, self.hi
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid points, rounded to 12 decimals so `0.2 + 0.3` prints as `0.5`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let x = self.lo + k as f64 * self.step;
                let r = (x * 1e12).round() / 1e12;
                r.min(self.hi.max(self.lo))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub sigma: GridAxis,
    pub alpha: GridAxis,
    pub lambda: GridAxis,
    /// Candidate hidden layouts, each one or two layer sizes.
    pub hidden_sizes: Vec<Vec<usize>>,
    /// Stop after this many consecutive combinations without improvement;
    /// `None` evaluates every combination.
    pub patience_turns: Option<usize>,
    pub epochs_per_combo: usize,
    /// Median window used when scoring each combination.
    pub median_window: Option<usize>,
    /// Source of the parameters that are not searched (init range, clip).
    pub base: HyperParams,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let hp = HyperParams::default();
        Self {
            sigma: GridAxis::single(hp.sigma),
            alpha: GridAxis::single(hp.alpha),
            lambda: GridAxis::single(hp.lambda),
            hidden_sizes: vec![hp.hidden_sizes.clone()],
            patience_turns: None,
            epochs_per_combo: DEFAULT_EPOCHS_PER_COMBO,
            median_window: None,
            base: hp,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        self.sigma.validate()?;
        self.alpha.validate()?;
        self.lambda.validate()?;
        if self.hidden_sizes.is_empty() {
            return Err(Error::invalid("no hidden-size candidates"));
        }
        if self.epochs_per_combo == 0 {
            return Err(Error::invalid("epochs per combination must be at least 1"));
        }
        if self.patience_turns == Some(0) {
            return Err(Error::invalid("patience turns must be at least 1"));
        }
        Ok(())
    }

    pub fn combination_count(&self) -> usize {
        self.hidden_sizes.len() * self.sigma.len() * self.alpha.len() * self.lambda.len()
    }
}

/// Every combination in search order: hidden sizes outermost, then sigma,
/// then alpha, with lambda innermost. Each combination trains for exactly
/// `epochs_per_combo` epochs with the seed of `space.base`.
pub fn enumerate(space: &SearchSpace) -> Result<Vec<HyperParams>> {
    space.validate()?;
    let (sigmas, alphas, lambdas) = (space.sigma.points(), space.alpha.points(), space.lambda.points());
    let mut out = Vec::with_capacity(space.combination_count());
    for sizes in &space.hidden_sizes {
        for &sigma in &sigmas {
            for &alpha in &alphas {
                for &lambda in &lambdas {
                    let hp = HyperParams {
                        alpha,
                        lambda,
                        sigma,
                        hidden_sizes: sizes.clone(),
                        max_epochs: space.epochs_per_combo,
                        patience: space.epochs_per_combo,
                        ..space.base.clone()
                    };
                    hp.validate()?;
                    out.push(hp);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("the search space is empty"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRecord {
    pub hyperparams: HyperParams,
    /// Average rate on the training set.
    pub train_rate: f64,
    /// Average rate on the validation set; this picks the winner.
    pub test_rate: f64,
    /// Seconds since the Unix epoch, if recorded.
    pub timestamp: Option<u64>,
    pub seed: u64,
}

/// A combination whose training diverged.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCombo {
    pub index: usize,
    pub hyperparams: HyperParams,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: SearchRecord,
    /// One record per strict improvement, in order; the last is `best`.
    pub log: Vec<SearchRecord>,
    /// Combinations trained, including skipped ones.
    pub evaluated: usize,
    pub skipped: Vec<SkippedCombo>,
}

enum ComboResult {
    Scored { train_rate: f64, test_rate: f64 },
    Diverged(String),
}

fn run_combo(
    hp: &HyperParams,
    patterns: &[crate::training::Pattern],
    train_set: &Dataset,
    validation: &Dataset,
    categories: &CategoryMap,
    opts: &EvalOptions,
) -> Result<ComboResult> {
    let net = match train(patterns, hp) {
        Ok(outcome) => outcome.net,
        Err(e @ (Error::Diverged { .. } | Error::NonFinite(_))) => return Ok(ComboResult::Diverged(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(ComboResult::Scored {
        train_rate: evaluate(&net, train_set, categories, opts)?.average_rate,
        test_rate: evaluate(&net, validation, categories, opts)?.average_rate,
    })
}

/// Trains one network per combination and keeps those that strictly improve
/// the best validation average rate. Ties go to the earlier combination.
/// Combinations run in parallel batches, but results are consumed in
/// enumeration order, so the outcome does not depend on scheduling.
pub fn search(
    space: &SearchSpace,
    train_set: &Dataset,
    validation: &Dataset,
    categories: &CategoryMap,
    seed: u64,
) -> Result<SearchOutcome> {
    let combos: Vec<HyperParams> = enumerate(space)?
        .into_iter()
        .map(|hp| HyperParams { seed, ..hp })
        .collect();
    if validation.is_empty() {
        return Err(Error::EmptyDataset("validation set is empty".into()));
    }
    let patterns = to_training_pairs(train_set, categories)?;
    let opts = EvalOptions {
        median_window: space.median_window,
        normalize: false,
    };

    let batch = rayon::current_num_threads().max(1);
    let mut log: Vec<SearchRecord> = Vec::new();
    let mut skipped = Vec::new();
    let mut evaluated = 0;
    let mut stale = 0;
    'outer: for (chunk_index, chunk) in combos.chunks(batch).enumerate() {
        let results: Vec<Result<ComboResult>> = chunk
            .par_iter()
            .map(|hp| run_combo(hp, &patterns, train_set, validation, categories, &opts))
            .collect();
        for (offset, (hp, result)) in chunk.iter().zip(results).enumerate() {
            evaluated += 1;
            let improved = match result? {
                ComboResult::Scored { train_rate, test_rate } => {
                    let better = log.last().is_none_or(|b| test_rate > b.test_rate);
                    if better {
                        log.push(SearchRecord {
                            hyperparams: hp.clone(),
                            train_rate,
                            test_rate,
                            timestamp: None,
                            seed,
                        });
                    }
                    better
                }
                ComboResult::Diverged(reason) => {
                    skipped.push(SkippedCombo {
                        index: chunk_index * batch + offset,
                        hyperparams: hp.clone(),
                        reason,
                    });
                    false
                }
            };
            stale = if improved { 0 } else { stale + 1 };
            if space.patience_turns.is_some_and(|p| stale >= p) {
                break 'outer;
            }
        }
    }

    let best = log.last().cloned().ok_or(Error::AllDiverged)?;
    Ok(SearchOutcome {
        best,
        log,
        evaluated,
        skipped,
    })
}

fn format_sizes(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn format_params_line(hp: &HyperParams, timestamp: Option<u64>) -> String {
    let mut line = format!(
        "# params max_epochs={} patience={} init={},{},{} weight_clip=",
        hp.max_epochs, hp.patience, hp.init.lo, hp.init.hi, hp.init.threshold
    );
    match hp.weight_clip {
        Some(c) => write!(line, "{c}").unwrap(),
        None => line.push_str("none"),
    }
    if let Some(t) = timestamp {
        write!(line, " timestamp={t}").unwrap();
    }
    line
}

/// Records in file form. A `# params` line precedes the first record and every
/// record whose non-searched parameters or timestamp differ from the previous.
pub fn records_to_string(log: &[SearchRecord]) -> String {
    let mut out = String::new();
    let mut context: Option<String> = None;
    for r in log {
        let hp = &r.hyperparams;
        let params = format_params_line(hp, r.timestamp);
        if context.as_deref() != Some(params.as_str()) {
            out.push_str(&params);
            out.push('\n');
            context = Some(params);
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            hp.sigma,
            hp.alpha,
            hp.lambda,
            format_sizes(&hp.hidden_sizes),
            r.train_rate,
            r.test_rate,
            r.seed
        )
        .unwrap();
    }
    out
}

/// Appends `log` to `path`, creating the file with a header if needed.
pub fn save_records(log: &[SearchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut text = String::new();
    if fresh {
        text.push_str(RECORDS_HEADER);
        text.push('\n');
    }
    text.push_str(&records_to_string(log));
    file.write_all(text.as_bytes())?;
    Ok(())
}

fn parse_count(field: &str, line: usize, what: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} {field:?}")))
}

fn parse_params_line(rest: &str, line: usize) -> Result<(HyperParams, Option<u64>)> {
    let mut hp = HyperParams::default();
    let mut timestamp = None;
    for item in rest.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected key=value, got {item:?}")))?;
        match key {
            "max_epochs" => hp.max_epochs = parse_count(value, line, "max_epochs")?,
            "patience" => hp.patience = parse_count(value, line, "patience")?,
            "init" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::parse(line, "init needs lo,hi,threshold"));
                }
                hp.init = InitRange {
                    lo: parse_real(parts[0], line)?,
                    hi: parse_real(parts[1], line)?,
                    threshold: parse_real(parts[2], line)?,
                };
            }
            "weight_clip" => {
                hp.weight_clip = match value {
                    "none" => None,
                    v => Some(parse_real(v, line)?),
                }
            }
            "timestamp" => {
                timestamp = Some(
                    value
                        .parse()
                        .map_err(|_| Error::parse(line, format!("invalid timestamp {value:?}")))?,
                )
            }
            _ => return Err(Error::parse(line, format!("unknown parameter {key:?}"))),
        }
    }
    Ok((hp, timestamp))
}

fn parse_rate(field: &str, line: usize) -> Result<f64> {
    let r = parse_real(field, line)?;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::parse(line, format!("rate {r} is outside [0, 1]")));
    }
    Ok(r)
}

/// Parses a records file. Errors carry 1-based line numbers.
pub fn parse_records(text: &str) -> Result<Vec<SearchRecord>> {
    let mut context = (HyperParams::default(), None);
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("# params") {
            context = parse_params_line(rest, line)?;
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::parse(line, format!("expected 7 fields, found {}", fields.len())));
        }
        let hidden_sizes = fields[3]
            .split('x')
            .map(|s| parse_count(s, line, "hidden size"))
            .collect::<Result<Vec<_>>>()?;
        let hyperparams = HyperParams {
            sigma: parse_real(fields[0], line)?,
            alpha: parse_real(fields[1], line)?,
            lambda: parse_real(fields[2], line)?,
            hidden_sizes,
            seed: fields[6]
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid seed {:?}", fields[6])))?,
            ..context.0.clone()
        };
        hyperparams.validate().map_err(|e| Error::parse(line, e.to_string()))?;
        out.push(SearchRecord {
            train_rate: parse_rate(fields[4], line)?,
            test_rate: parse_rate(fields[5], line)?,
            timestamp: context.1,
            seed: hyperparams.seed,
            hyperparams,
        });
    }
    Ok(out)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<SearchRecord>> {
    parse_records(&std::fs::read_to_string(path)?)
}

/// Hyperparameters of the last (best) record in the file.
pub fn load_best(path: impl AsRef<Path>) -> Result<HyperParams> {
    load_records(path)?.pop().map(|r| r.hyperparams).ok_or(Error::NoRecords)
}

/// An untrained network with the shape and sigma of `hp`, ready to receive
/// saved weights through [`Network::with_layers`].
pub fn network_for(hp: &HyperParams, input_size: usize, output_size: usize) -> Result<Network> {
    Network::zeros(input_size, &hp.hidden_sizes, output_size, hp.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EmotionLabel, FeatureVector, Frame, LabeledSequence};

    fn space(sigma: GridAxis, alpha: GridAxis, lambda: GridAxis, sizes: Vec<Vec<usize>>) -> SearchSpace {
        SearchSpace {
            sigma,
            alpha,
            lambda,
            hidden_sizes: sizes,
            ..SearchSpace::default()
        }
    }

    #[test]
    fn grid_points() {
        assert_eq!(GridAxis::new(0.2, 1.0, 0.3).unwrap().points(), vec![0.2, 0.5, 0.8]);
        assert_eq!(GridAxis::new(2.0, 2.5, 0.5).unwrap().points(), vec![2.0, 2.5]);
        assert_eq!(GridAxis::new(0.1, 0.3, 0.1).unwrap().points(), vec![0.1, 0.2, 0.3]);
        assert_eq!(GridAxis::single(4.0).points(), vec![4.0]);
        assert!(GridAxis::new(1.0, 0.5, 0.1).is_err());
        assert!(GridAxis::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn table_ranges_give_twelve_combos() {
        let s = space(
            GridAxis::new(2.0, 2.5, 0.5).unwrap(),
            GridAxis::new(0.2, 1.0, 0.3).unwrap(),
            GridAxis::new(0.5, 1.0, 0.3).unwrap(),
            vec![vec![29, 28]],
        );
        let combos = enumerate(&s).unwrap();
        assert_eq!(combos.len(), 12);
        assert_eq!(combos[0].sigma, 2.0);
        assert_eq!(combos[0].alpha, 0.2);
        assert_eq!(combos[0].lambda, 0.5);
        assert_eq!(combos[1].lambda, 0.8);
        assert_eq!(combos[2].alpha, 0.5);
        assert_eq!(combos[6].sigma, 2.5);
        assert!(combos.iter().all(|h| h.hidden_sizes == [29, 28] && h.max_epochs == 500));
    }

    #[test]
    fn sizes_are_outermost() {
        let s = space(
            GridAxis::new(1.0, 2.0, 1.0).unwrap(),
            GridAxis::single(0.3),
            GridAxis::single(0.5),
            vec![vec![3], vec![4, 2]],
        );
        let combos = enumerate(&s).unwrap();
        let order: Vec<(Vec<usize>, f64)> = combos.iter().map(|h| (h.hidden_sizes.clone(), h.sigma)).collect();
        assert_eq!(
            order,
            vec![(vec![3], 1.0), (vec![3], 2.0), (vec![4, 2], 1.0), (vec![4, 2], 2.0)]
        );
    }

    #[test]
    fn rejects_bad_spaces() {
        let mut s = SearchSpace::default();
        s.hidden_sizes.clear();
        assert!(enumerate(&s).is_err());
        let s = SearchSpace {
            lambda: GridAxis::single(1.0),
            ..SearchSpace::default()
        };
        assert!(enumerate(&s).is_err());
    }

    fn two_class_dataset(offset: f64) -> Dataset {
        let mut sequences = Vec::new();
        for (s, label) in [EmotionLabel::Joy, EmotionLabel::Sad].into_iter().enumerate() {
            for k in 0..3 {
                let frames = (0..4)
                    .map(|i| {
                        let mut f = [0.0; 12];
                        let sign = if s == 0 { 1.0 } else { -1.0 };
                        f[0] = sign * (0.5 + 0.1 * i as f64 + offset);
                        f[1] = 0.05 * k as f64;
                        Frame {
                            index: i,
                            features: FeatureVector(f),
                            label,
                        }
                    })
                    .collect();
                sequences.push(LabeledSequence::new(format!("s{s}k{k}"), frames).unwrap());
            }
        }
        Dataset::new(sequences).unwrap()
    }

    fn small_space(patience: Option<usize>) -> SearchSpace {
        SearchSpace {
            sigma: GridAxis::new(1.0, 2.0, 1.0).unwrap(),
            alpha: GridAxis::new(0.2, 0.6, 0.4).unwrap(),
            lambda: GridAxis::single(0.5),
            hidden_sizes: vec![vec![3]],
            patience_turns: patience,
            epochs_per_combo: 20,
            ..SearchSpace::default()
        }
    }

    #[test]
    fn exhaustive_search_is_deterministic() {
        let cats = CategoryMap::subset(&[EmotionLabel::Joy, EmotionLabel::Sad]).unwrap();
        let (train_set, val) = (two_class_dataset(0.0), two_class_dataset(0.05));
        let a = search(&small_space(None), &train_set, &val, &cats, 3).unwrap();
        let b = search(&small_space(None), &train_set, &val, &cats, 3).unwrap();
        assert_eq!(a.evaluated, 4);
        assert_eq!(a.log, b.log);
        assert_eq!(a.best, *a.log.last().unwrap());
        assert!(a.log.windows(2).all(|w| w[1].test_rate > w[0].test_rate));
    }

    #[test]
    fn patience_stops_early() {
        let cats = CategoryMap::subset(&[EmotionLabel::Joy, EmotionLabel::Sad]).unwrap();
        let (train_set, val) = (two_class_dataset(0.0), two_class_dataset(0.05));
        let out = search(&small_space(Some(1)), &train_set, &val, &cats, 3).unwrap();
        // the first combo always improves; it stops at the first one that does not
        assert!(out.evaluated >= 2);
        assert_eq!(out.evaluated, out.log.len() + 1);
    }

    #[test]
    fn diverging_combos_are_skipped() {
        let cats = CategoryMap::subset(&[EmotionLabel::Joy, EmotionLabel::Sad]).unwrap();
        let (train_set, val) = (two_class_dataset(0.0), two_class_dataset(0.05));
        let mut s = small_space(None);
        // near-zero weights keep sigma * z small, so f' = sigma / 4 overflows
        s.base.init = InitRange {
            lo: -1e-320,
            hi: 1e-320,
            threshold: 1.0,
        };
        s.sigma = GridAxis::new(1.0, 1e308, 1e308).unwrap();
        s.alpha = GridAxis::single(100.0);
        let out = search(&s, &train_set, &val, &cats, 1).unwrap();
        assert_eq!(out.evaluated, 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].index, 1);
        assert_eq!(out.best.hyperparams.sigma, 1.0);

        let alone = SearchSpace {
            sigma: GridAxis::single(1.0),
            ..s
        };
        assert_eq!(search(&alone, &train_set, &val, &cats, 1).unwrap().best, out.best);
    }

    fn record(sigma: f64, rate: f64, timestamp: Option<u64>) -> SearchRecord {
        SearchRecord {
            hyperparams: HyperParams {
                sigma,
                alpha: 0.1 + 0.2,
                lambda: 0.5,
                hidden_sizes: vec![29, 28],
                max_epochs: 500,
                patience: 500,
                weight_clip: Some(3.5),
                seed: 9,
                ..HyperParams::default()
            },
            train_rate: 0.987,
            test_rate: rate,
            timestamp,
            seed: 9,
        }
    }

    #[test]
    fn records_round_trip() {
        let log = vec![record(2.0, 0.5, Some(1_700_000_000)), record(2.5, 0.665, None)];
        let text = records_to_string(&log);
        assert_eq!(parse_records(&text).unwrap(), log);
        assert!(text.contains("2.5,0.30000000000000004,0.5,29x28,0.987,0.665,9"));
    }

    #[test]
    fn save_appends_and_load_best_returns_last() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.txt");
        save_records(&[record(2.0, 0.5, None)], &path).unwrap();
        save_records(&[record(3.0, 0.6, None)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches(RECORDS_HEADER).count(), 1);
        assert_eq!(load_records(&path).unwrap().len(), 2);
        assert_eq!(load_best(&path).unwrap(), record(3.0, 0.6, None).hyperparams);
    }

    #[test]
    fn empty_or_malformed_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        std::fs::write(&path, format!("{RECORDS_HEADER}\n")).unwrap();
        assert!(matches!(load_best(&path), Err(Error::NoRecords)));
        assert!(matches!(
            parse_records("1,0.3,0.5,10,0.5,0.5,0\n1,0.3,0.5,10,1.5,0.5,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_records("1,0.3,0.5,10,0.5\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_records("# params bogus=1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_records("1,0.3,0.5,0,0.5,0.5,0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
