use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use emonet::dataset::{
    exclude_neutral, sort_and_balance, split, take_peak_frames, to_training_pairs, BalanceSelection, SplitBy,
};
use emonet::eval::format_rate;
use emonet::optim::{powell_train, trace_csv, PowellOptions, PowellTrainOptions};
use emonet::search::{load_best, save_records, search, GridAxis};
use emonet::synth::{default_templates, generate, load_templates};
use emonet::{evaluate, CategoryMap, Dataset, EvalOptions, HyperParams, InitRange, Network, SearchSpace, SynthConfig};

use crate::args::{
    BalanceMode, EvalArgs, NetArgs, PowellTrainArgs, PrepareArgs, SearchArgs, SplitMode, SynthArgs, TrainArgs,
};

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or input files.
    Input(String),
    /// A computation that could not finish, such as a diverged training run.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Runtime(m) => m,
        }
    }
}

type Outcome = Result<String, Failure>;

fn from_core(context: impl std::fmt::Display) -> impl FnOnce(emonet::Error) -> Failure {
    move |e| {
        let message = format!("{context}: {e}");
        if e.is_input_error() {
            Failure::Input(message)
        } else {
            Failure::Runtime(message)
        }
    }
}

fn flag(name: &str, message: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("--{name}: {message}"))
}

/// Run context shared by every command.
pub struct Context {
    pub seed: u64,
    pub timestamp: Option<u64>,
}

impl Context {
    pub fn new(seed: u64, no_timestamp: bool) -> Self {
        let timestamp = (!no_timestamp).then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Self { seed, timestamp }
    }

    fn stamp(&self, out: &mut String) {
        if let Some(t) = self.timestamp {
            let _ = writeln!(out, "timestamp: {t}");
        }
    }
}

fn check_input(name: &str, path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(flag(name, format!("{} is not a readable file", path.display())))
    }
}

/// The parent directory must exist and the path must not name an input.
fn check_output(name: &str, path: &Path, inputs: &[&Path]) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if !parent.is_dir() {
        return Err(flag(name, format!("directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(flag(name, format!("{} is a directory", path.display())));
    }
    let canonical = |p: &Path| fs::canonicalize(p).ok();
    if let Some(out) = canonical(path) {
        if inputs.iter().any(|i| canonical(i).as_ref() == Some(&out)) {
            return Err(flag(name, format!("{} is also an input", path.display())));
        }
    }
    Ok(())
}

fn write_file(name: &str, path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("--{name}: writing {}: {e}", path.display())))
}

fn load_dataset(name: &str, path: &Path) -> Result<Dataset, Failure> {
    Dataset::load(path).map_err(from_core(format!("--{name} {}", path.display())))
}

fn load_model(name: &str, path: &Path) -> Result<Network, Failure> {
    Network::load(path).map_err(from_core(format!("--{name} {}", path.display())))
}

fn parse_categories(name: &str, spec: &str) -> Result<CategoryMap, Failure> {
    spec.parse().map_err(|e| flag(name, e))
}

pub fn synth(ctx: &Context, args: &SynthArgs) -> Outcome {
    let mut inputs = Vec::new();
    if let Some(t) = &args.templates {
        check_input("templates", t)?;
        inputs.push(t.as_path());
    }
    check_output("out", &args.out, &inputs)?;
    let templates = match &args.templates {
        Some(path) => load_templates(path).map_err(from_core(format!("--templates {}", path.display())))?,
        None => default_templates(),
    };
    let cfg = SynthConfig {
        frames_per_sequence: args.frames,
        neutral_prefix: args.neutral_prefix,
        noise_std: args.noise,
        sequences_per_emotion: args.sequences_per_emotion,
        seed: ctx.seed,
    };
    let ds = generate(&templates, &cfg).map_err(from_core("synth"))?;
    write_file("out", &args.out, &ds.to_canonical_string())?;
    Ok(format!(
        "wrote {} sequences, {} frames to {}\n",
        ds.sequences().len(),
        ds.len(),
        args.out.display()
    ))
}

fn class_summary(ds: &Dataset) -> String {
    ds.class_counts()
        .iter()
        .map(|(l, c)| format!("{l}={c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn prepare(ctx: &Context, args: &PrepareArgs) -> Outcome {
    check_input("input", &args.input)?;
    check_output("out", &args.out, &[&args.input])?;
    if let Some(t) = &args.test_out {
        check_output("test-out", t, &[&args.input])?;
        if t == &args.out {
            return Err(flag("test-out", "must differ from --out"));
        }
    }
    let mut ds = load_dataset("input", &args.input)?;
    if let Some(peak) = args.peak_frames {
        ds = take_peak_frames(&ds, args.peak_neutral, peak).map_err(|e| flag("peak-frames", e))?;
    }
    if args.exclude_neutral {
        ds = exclude_neutral(&ds);
    }
    if let Some(mode) = args.balance {
        let selection = match mode {
            BalanceMode::First => BalanceSelection::First,
            BalanceMode::Random => BalanceSelection::Seeded(ctx.seed),
        };
        ds = sort_and_balance(&ds, selection);
    }
    if ds.is_empty() {
        return Err(Failure::Input("no frames left after preparation".into()));
    }
    let mut out = String::new();
    match (args.split, &args.test_out) {
        (Some(fraction), Some(test_out)) => {
            let by = match args.split_by {
                SplitMode::Sequence => SplitBy::Sequence,
                SplitMode::Frame => SplitBy::Frame,
            };
            let (train, test) = split(&ds, fraction, by, ctx.seed).map_err(|e| flag("split", e))?;
            write_file("out", &args.out, &train.to_canonical_string())?;
            write_file("test-out", test_out, &test.to_canonical_string())?;
            let _ = writeln!(out, "train: {} frames ({})", train.len(), class_summary(&train));
            let _ = writeln!(out, "test: {} frames ({})", test.len(), class_summary(&test));
        }
        _ => {
            write_file("out", &args.out, &ds.to_canonical_string())?;
            let _ = writeln!(out, "{} frames ({})", ds.len(), class_summary(&ds));
        }
    }
    Ok(out)
}

fn hyperparams(ctx: &Context, net: &NetArgs) -> Result<HyperParams, Failure> {
    if let Some(path) = &net.params {
        check_input("params", path)?;
        return load_best(path).map_err(from_core(format!("--params {}", path.display())));
    }
    let hp = HyperParams {
        alpha: net.alpha,
        lambda: net.lambda,
        sigma: net.sigma,
        hidden_sizes: net.hidden.clone(),
        max_epochs: net.max_epochs,
        patience: net.patience,
        weight_clip: net.weight_clip,
        init: InitRange {
            lo: net.init_lo,
            hi: net.init_hi,
            threshold: net.init_threshold,
        },
        seed: ctx.seed,
    };
    hp.validate().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(hp)
}

fn describe(hp: &HyperParams) -> String {
    let sizes: Vec<String> = hp.hidden_sizes.iter().map(usize::to_string).collect();
    format!(
        "sigma={} alpha={} lambda={} hidden={} seed={}",
        hp.sigma,
        hp.alpha,
        hp.lambda,
        sizes.join(","),
        hp.seed
    )
}

pub fn train(ctx: &Context, args: &TrainArgs) -> Outcome {
    check_input("train", &args.train)?;
    check_output("model-out", &args.model_out, &[&args.train])?;
    if let Some(t) = &args.trace {
        check_output("trace", t, &[&args.train])?;
    }
    let categories = parse_categories("categories", &args.net.categories)?;
    let hp = hyperparams(ctx, &args.net)?;
    let ds = load_dataset("train", &args.train)?;
    let patterns = to_training_pairs(&ds, &categories).map_err(from_core("--train"))?;
    let outcome = emonet::train(&patterns, &hp).map_err(from_core("training"))?;
    outcome.net.save(&args.model_out).map_err(from_core("--model-out"))?;
    if let Some(t) = &args.trace {
        write_file("trace", t, &outcome.trace_csv())?;
    }
    let mut out = String::new();
    ctx.stamp(&mut out);
    let _ = writeln!(out, "{}", describe(&hp));
    let _ = writeln!(
        out,
        "best epoch {} of {}: training accuracy {}%",
        outcome.best_epoch,
        outcome.trace.len(),
        format_rate(outcome.best_accuracy, 2)
    );
    let _ = writeln!(out, "pattern updates: {}", outcome.pattern_updates);
    Ok(out)
}

pub fn powell_train_cmd(ctx: &Context, args: &PowellTrainArgs) -> Outcome {
    check_input("train", &args.train)?;
    let mut inputs = vec![args.train.as_path()];
    if let Some(w) = &args.warm_start {
        check_input("warm-start", w)?;
        inputs.push(w.as_path());
    }
    check_output("model-out", &args.model_out, &inputs)?;
    if let Some(t) = &args.trace {
        check_output("trace", t, &inputs)?;
    }
    if let Some(a) = args.accuracy_threshold {
        if !(0.0..=1.0).contains(&a) {
            return Err(flag("accuracy-threshold", format!("{a} not in [0, 1]")));
        }
    }
    if !(args.direction_scale > 0.0 && args.direction_scale.is_finite()) {
        return Err(flag("direction-scale", "must be positive"));
    }
    let categories = parse_categories("categories", &args.net.categories)?;
    let hp = hyperparams(ctx, &args.net)?;
    let warm = args
        .warm_start
        .as_deref()
        .map(|w| load_model("warm-start", w))
        .transpose()?;
    let ds = load_dataset("train", &args.train)?;
    let patterns = to_training_pairs(&ds, &categories).map_err(from_core("--train"))?;
    let opts = PowellTrainOptions {
        powell: PowellOptions {
            ftol: args.ftol,
            line_tol: args.line_tol,
            max_iters: args.max_iters,
            max_evaluations: args.max_evaluations,
        },
        random_directions: args.random_directions,
        direction_scale: args.direction_scale,
        accuracy_threshold: args.accuracy_threshold,
    };
    let outcome = powell_train(&patterns, &hp, warm.as_ref(), &opts).map_err(from_core("powell training"))?;
    outcome.net.save(&args.model_out).map_err(from_core("--model-out"))?;
    if let Some(t) = &args.trace {
        write_file("trace", t, &trace_csv(&outcome.trace))?;
    }
    let mut out = String::new();
    ctx.stamp(&mut out);
    let _ = writeln!(out, "{}", describe(&hp));
    if let Some(w) = &args.warm_start {
        let sizes: Vec<String> = outcome.net.hidden_sizes().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "warm start from {} with hidden={}", w.display(), sizes.join(","));
    }
    let _ = writeln!(
        out,
        "total error {} -> {} in {} cycles, {} evaluations",
        outcome.initial_error, outcome.final_error, outcome.iterations, outcome.evaluations
    );
    let _ = writeln!(out, "training accuracy {}%", format_rate(outcome.final_accuracy, 2));
    if args.accuracy_threshold.is_some() {
        match outcome.evaluations_to_threshold {
            Some(e) => _ = writeln!(out, "threshold reached after {e} evaluations"),
            None => _ = writeln!(out, "threshold not reached"),
        }
    }
    Ok(out)
}

fn parse_axis(name: &str, text: &str) -> Result<GridAxis, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| -> Result<f64, Failure> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| flag(name, format!("`{s}` is not a number")))
    };
    let axis = match parts.as_slice() {
        [v] => GridAxis::single(num(v)?),
        [lo, hi, step] => GridAxis::new(num(lo)?, num(hi)?, num(step)?).map_err(|e| flag(name, e))?,
        _ => {
            return Err(flag(
                name,
                format!("expected `lo:hi:step` or a single value, got `{text}`"),
            ))
        }
    };
    axis.validate().map_err(|e| flag(name, e))?;
    Ok(axis)
}

fn parse_layout(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| flag("hidden", format!("`{text}` is not a layout")))
        })
        .collect()
}

pub fn search_cmd(ctx: &Context, args: &SearchArgs) -> Outcome {
    check_input("train", &args.train)?;
    check_input("validation", &args.validation)?;
    check_output("records", &args.records, &[&args.train, &args.validation])?;
    let categories = parse_categories("categories", &args.categories)?;
    let hidden_sizes = if args.hidden.is_empty() {
        vec![vec![10]]
    } else {
        args.hidden.iter().map(|h| parse_layout(h)).collect::<Result<_, _>>()?
    };
    let space = SearchSpace {
        sigma: parse_axis("sigma", &args.sigma)?,
        alpha: parse_axis("alpha", &args.alpha)?,
        lambda: parse_axis("lambda", &args.lambda)?,
        hidden_sizes,
        patience_turns: args.patience_turns,
        epochs_per_combo: args.epochs_per_combo,
        median_window: args.median_window,
        base: HyperParams {
            weight_clip: args.weight_clip,
            init: InitRange {
                lo: args.init_lo,
                hi: args.init_hi,
                threshold: args.init_threshold,
            },
            seed: ctx.seed,
            ..HyperParams::default()
        },
    };
    space.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let train_set = load_dataset("train", &args.train)?;
    let validation = load_dataset("validation", &args.validation)?;
    let outcome = search(&space, &train_set, &validation, &categories, ctx.seed).map_err(from_core("search"))?;
    let log: Vec<_> = outcome
        .log
        .iter()
        .cloned()
        .map(|mut r| {
            r.timestamp = ctx.timestamp;
            r
        })
        .collect();
    save_records(&log, &args.records).map_err(from_core(format!("--records {}", args.records.display())))?;

    let mut out = String::new();
    ctx.stamp(&mut out);
    let _ = writeln!(
        out,
        "evaluated {} of {} combinations, {} diverged",
        outcome.evaluated,
        space.combination_count(),
        outcome.skipped.len()
    );
    for s in &outcome.skipped {
        let _ = writeln!(out, "skipped {}: {}", describe(&s.hyperparams), s.reason);
    }
    for r in &outcome.log {
        let _ = writeln!(
            out,
            "improved: {} train {}% validation {}%",
            describe(&r.hyperparams),
            format_rate(r.train_rate, 2),
            format_rate(r.test_rate, 2)
        );
    }
    let _ = writeln!(
        out,
        "best: {} validation {}%",
        describe(&outcome.best.hyperparams),
        format_rate(outcome.best.test_rate, 2)
    );
    Ok(out)
}

pub fn eval(_ctx: &Context, args: &EvalArgs) -> Outcome {
    check_input("model", &args.model)?;
    check_input("test", &args.test)?;
    for (name, path) in [("outputs", &args.outputs), ("csv", &args.csv)] {
        if let Some(p) = path {
            check_output(name, p, &[&args.model, &args.test])?;
        }
    }
    let categories = parse_categories("categories", &args.categories)?;
    let net = load_model("model", &args.model)?;
    let test = load_dataset("test", &args.test)?;
    let opts = EvalOptions {
        median_window: args.median_window,
        normalize: args.normalize,
    };
    let result = evaluate(&net, &test, &categories, &opts).map_err(from_core("eval"))?;
    if let Some(p) = &args.outputs {
        let mut text = String::new();
        for v in &result.outputs {
            let fields: Vec<String> = v.iter().map(f64::to_string).collect();
            let _ = writeln!(text, "{}", fields.join(","));
        }
        write_file("outputs", p, &text)?;
    }
    if let Some(p) = &args.csv {
        write_file("csv", p, &result.matrix.to_csv())?;
    }
    let mut out = result.matrix.to_table();
    let _ = writeln!(
        out,
        "average rate: {}%",
        format_rate(result.average_rate, args.decimals)
    );
    let _ = writeln!(
        out,
        "frames: {} accuracy: {}%",
        result.truth.len(),
        format_rate(result.accuracy, 2)
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_forms() {
        assert_eq!(parse_axis("sigma", "2").unwrap().points(), vec![2.0]);
        assert_eq!(parse_axis("alpha", "0.1:0.3:0.1").unwrap().points().len(), 3);
        for bad in ["", "1:2", "a:b:c", "2:1:1", "1:2:0"] {
            let err = parse_axis("lambda", bad).unwrap_err();
            assert!(err.message().starts_with("--lambda"), "{bad}");
            assert_eq!(err.exit_code(), 1);
        }
    }

    #[test]
    fn layouts() {
        assert_eq!(parse_layout("29,28").unwrap(), vec![29, 28]);
        assert_eq!(parse_layout(" 10 ").unwrap(), vec![10]);
        assert!(parse_layout("10x2").is_err());
    }

    #[test]
    fn outputs_must_not_overwrite_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "x").unwrap();
        assert!(check_output("out", &input, &[&input]).is_err());
        assert!(check_output("out", &dir.path().join("new.txt"), &[&input]).is_ok());
        assert!(check_output("out", &dir.path().join("no/such/dir.txt"), &[]).is_err());
        assert!(check_output("out", dir.path(), &[]).is_err());
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        let input = from_core("x")(emonet::Error::EmptyDataset("none".into()));
        assert_eq!(input.exit_code(), 1);
        let runtime = from_core("x")(emonet::Error::Diverged { epoch: 3 });
        assert_eq!(runtime.exit_code(), 2);
        assert_eq!(runtime.message(), "x: training diverged at epoch 3");
    }
}
