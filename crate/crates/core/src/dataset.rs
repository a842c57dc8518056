//! Labeled Motion-Unit sequences, the delimited file format, and the data
//! preparation transforms (peak frames, neutral exclusion, balancing,
//! splitting, one-hot targets).
//!
//! File rows are `sequence_id,frame_index,mu1,...,mu12,label`. Blank lines and
//! lines starting with `#` are ignored. Rows of one sequence may be interleaved
//! with other sequences but their frame indices must strictly increase.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::parse_real;
use crate::training::Pattern;

/// Number of Motion Units per frame.
pub const MU_COUNT: usize = 12;

/// Short descriptions of the Motion Units, in column order.
pub const MU_DESCRIPTIONS: [&str; MU_COUNT] = [
    "vertical movement of the center of upper lip",
    "vertical movement of the center of lower lip",
    "horizontal movement of left mouth corner",
    "vertical movement of left mouth corner",
    "horizontal movement of right mouth corner",
    "vertical movement of right mouth corner",
    "vertical movement of right brow",
    "vertical movement of left brow",
    "lifting of right cheek",
    "lifting of left cheek",
    "blinking of right eye",
    "blinking of left eye",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Neutral = 1,
    Joy = 2,
    Surprise = 3,
    Angry = 4,
    Disgust = 5,
    Fear = 6,
    Sad = 7,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Neutral,
        EmotionLabel::Joy,
        EmotionLabel::Surprise,
        EmotionLabel::Angry,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Sad,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Joy => "joy",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Angry => "angry",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Sad => "sad",
        }
    }

    fn index(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    /// Accepts a name (`joy`, `anger`/`angry`, ...) or a code `1`..`7`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Ok(code) = s.parse::<u8>() {
            return Self::from_code(code).ok_or_else(|| Error::invalid(format!("label code {code} not in 1..=7")));
        }
        let label = match s.as_str() {
            "neutral" => EmotionLabel::Neutral,
            "joy" | "happy" | "happiness" => EmotionLabel::Joy,
            "surprise" => EmotionLabel::Surprise,
            "angry" | "anger" => EmotionLabel::Angry,
            "disgust" => EmotionLabel::Disgust,
            "fear" => EmotionLabel::Fear,
            "sad" | "sadness" => EmotionLabel::Sad,
            _ => return Err(Error::invalid(format!("unknown emotion `{s}`"))),
        };
        Ok(label)
    }
}

/// Twelve Motion-Unit magnitudes for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; MU_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub features: FeatureVector,
    pub label: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub id: String,
    pub frames: Vec<Frame>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(|c: char| c == ',' || c.is_whitespace()) || id.starts_with('#') {
        return Err(Error::invalid(format!("invalid sequence id `{id}`")));
    }
    Ok(())
}

impl LabeledSequence {
    pub fn new(id: impl Into<String>, frames: Vec<Frame>) -> Result<Self> {
        let seq = Self { id: id.into(), frames };
        seq.validate()?;
        Ok(seq)
    }

    fn validate(&self) -> Result<()> {
        check_id(&self.id)?;
        if self.frames.is_empty() {
            return Err(Error::InvalidSequence {
                id: self.id.clone(),
                message: "sequence has no frames".into(),
            });
        }
        if self.frames.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(Error::InvalidSequence {
                id: self.id.clone(),
                message: "frame indices must strictly increase".into(),
            });
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<EmotionLabel> {
        self.frames.iter().map(|f| f.label).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    sequences: Vec<LabeledSequence>,
}

pub const DATASET_HEADER: &str = "# sequence_id,frame_index,mu1,mu2,mu3,mu4,mu5,mu6,mu7,mu8,mu9,mu10,mu11,mu12,label";

impl Dataset {
    /// Validates every sequence and requires distinct sequence ids.
    pub fn new(sequences: Vec<LabeledSequence>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for seq in &sequences {
            seq.validate()?;
            if !seen.insert(seq.id.as_str()) {
                return Err(Error::InvalidSequence {
                    id: seq.id.clone(),
                    message: "duplicate sequence id".into(),
                });
            }
        }
        Ok(Self { sequences })
    }

    // Transforms below only ever drop frames from valid sequences or split a
    // sequence under fresh ids, so they skip re-validation.
    fn from_valid(sequences: Vec<LabeledSequence>) -> Self {
        Self { sequences }
    }

    pub fn sequences(&self) -> &[LabeledSequence] {
        &self.sequences
    }

    pub fn into_sequences(self) -> Vec<LabeledSequence> {
        self.sequences
    }

    /// Flattened view in sequence order.
    pub fn frames(&self) -> impl Iterator<Item = (&LabeledSequence, &Frame)> + '_ {
        self.sequences.iter().flat_map(|s| s.frames.iter().map(move |f| (s, f)))
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.sequences.iter().map(|s| s.frames.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<EmotionLabel, usize> {
        let mut counts = BTreeMap::new();
        for (_, f) in self.frames() {
            *counts.entry(f.label).or_insert(0) += 1;
        }
        counts
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut by_id: HashMap<String, Vec<Frame>> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != MU_COUNT + 3 {
                return Err(Error::parse(
                    line_no,
                    format!("expected {} fields, found {}", MU_COUNT + 3, fields.len()),
                ));
            }
            let id = fields[0];
            check_id(id).map_err(|e| Error::parse(line_no, e.to_string()))?;
            let index: u64 = fields[1]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid frame index `{}`", fields[1])))?;
            let mut values = [0.0; MU_COUNT];
            for (v, field) in values.iter_mut().zip(&fields[2..2 + MU_COUNT]) {
                *v = parse_real(field, line_no)?;
            }
            let label_field = fields[MU_COUNT + 2];
            let label = label_field
                .parse::<u8>()
                .ok()
                .and_then(EmotionLabel::from_code)
                .ok_or_else(|| Error::parse(line_no, format!("label `{label_field}` is not an integer in 1..=7")))?;

            let frames = match by_id.get_mut(id) {
                Some(frames) => frames,
                None => {
                    order.push(id.to_string());
                    by_id.entry(id.to_string()).or_default()
                }
            };
            if let Some(last) = frames.last() {
                if index <= last.index {
                    return Err(Error::parse(
                        line_no,
                        format!("frame index {index} of sequence {id} does not follow {}", last.index),
                    ));
                }
            }
            frames.push(Frame {
                index,
                features: FeatureVector(values),
                label,
            });
        }
        let sequences = order
            .into_iter()
            .map(|id| {
                let frames = by_id.remove(&id).unwrap_or_default();
                LabeledSequence { id, frames }
            })
            .collect();
        Ok(Self::from_valid(sequences))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form: header comment, then one row per frame in
    /// sequence order, reals in shortest round-trip notation.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 128);
        out.push_str(DATASET_HEADER);
        out.push('\n');
        for (seq, frame) in self.frames() {
            out.push_str(&seq.id);
            out.push(',');
            out.push_str(&frame.index.to_string());
            for v in frame.features.as_slice() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push(',');
            out.push_str(&frame.label.code().to_string());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_canonical_string())?;
        Ok(())
    }
}

/// Keeps the first `neutral_count` frames of each sequence's neutral prefix
/// and `peak_count` frames centred on the middle of the emotional span
/// (centre = span start + span length / 2, window clipped to the span).
pub fn take_peak_frames(ds: &Dataset, neutral_count: usize, peak_count: usize) -> Result<Dataset> {
    let mut out = Vec::with_capacity(ds.sequences.len());
    for seq in &ds.sequences {
        let span_start = seq
            .frames
            .iter()
            .position(|f| f.label != EmotionLabel::Neutral)
            .unwrap_or(seq.frames.len());
        if seq.frames[span_start..]
            .iter()
            .any(|f| f.label == EmotionLabel::Neutral)
        {
            return Err(Error::InvalidSequence {
                id: seq.id.clone(),
                message: "neutral frames after the emotional span began".into(),
            });
        }
        let span_len = seq.frames.len() - span_start;
        let mut kept: Vec<Frame> = seq.frames[..span_start.min(neutral_count)].to_vec();
        if span_len > 0 && peak_count > 0 {
            let centre = span_start + span_len / 2;
            let lo = centre.saturating_sub(peak_count / 2).max(span_start);
            let hi = (centre.saturating_sub(peak_count / 2) + peak_count).min(seq.frames.len());
            kept.extend_from_slice(&seq.frames[lo..hi]);
        }
        if !kept.is_empty() {
            out.push(LabeledSequence {
                id: seq.id.clone(),
                frames: kept,
            });
        }
    }
    Ok(Dataset::from_valid(out))
}

/// Drops every neutral frame, and any sequence left empty.
pub fn exclude_neutral(ds: &Dataset) -> Dataset {
    let sequences = ds
        .sequences
        .iter()
        .filter_map(|s| {
            let frames: Vec<Frame> = s
                .frames
                .iter()
                .filter(|f| f.label != EmotionLabel::Neutral)
                .cloned()
                .collect();
            (!frames.is_empty()).then(|| LabeledSequence {
                id: s.id.clone(),
                frames,
            })
        })
        .collect();
    Dataset::from_valid(sequences)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceSelection {
    /// First `m` frames of each class in dataset order.
    First,
    /// `m` frames per class drawn without replacement.
    Seeded(u64),
}

/// Truncates every class present to the smallest class count and groups the
/// result by class in label-code order.
///
/// Within a class, frames keep their dataset order and their sequences. A
/// sequence that contributes to more than one class is split, each part
/// renamed `<id>:<label code>`.
pub fn sort_and_balance(ds: &Dataset, selection: BalanceSelection) -> Dataset {
    let counts = ds.class_counts();
    let Some(&m) = counts.values().min() else {
        return Dataset::default();
    };

    // positions (sequence, frame) per class, in dataset order
    let mut by_class: BTreeMap<EmotionLabel, Vec<(usize, usize)>> = BTreeMap::new();
    for (s, seq) in ds.sequences.iter().enumerate() {
        for (f, frame) in seq.frames.iter().enumerate() {
            by_class.entry(frame.label).or_default().push((s, f));
        }
    }
    let mut rng = match selection {
        BalanceSelection::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        BalanceSelection::First => None,
    };
    let multi_class: Vec<bool> = ds
        .sequences
        .iter()
        .map(|s| s.frames.iter().any(|f| f.label != s.frames[0].label))
        .collect();

    let mut out = Vec::new();
    for (label, mut positions) in by_class {
        if let Some(rng) = rng.as_mut() {
            positions.shuffle(rng);
            positions.truncate(m);
            positions.sort_unstable();
        } else {
            positions.truncate(m);
        }
        let mut current: Option<(usize, LabeledSequence)> = None;
        for (s, f) in positions {
            let frame = ds.sequences[s].frames[f].clone();
            match current.as_mut() {
                Some((cs, seq)) if *cs == s => seq.frames.push(frame),
                _ => {
                    if let Some((_, seq)) = current.take() {
                        out.push(seq);
                    }
                    let src = &ds.sequences[s];
                    let id = if multi_class[s] {
                        format!("{}:{}", src.id, label.code())
                    } else {
                        src.id.clone()
                    };
                    current = Some((
                        s,
                        LabeledSequence {
                            id,
                            frames: vec![frame],
                        },
                    ));
                }
            }
        }
        if let Some((_, seq)) = current {
            out.push(seq);
        }
    }
    Dataset::from_valid(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitBy {
    /// Whole sequences go to one side.
    Sequence,
    /// Individual frames of the flattened view.
    Frame,
}

impl FromStr for SplitBy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequence" => Ok(SplitBy::Sequence),
            "frame" => Ok(SplitBy::Frame),
            _ => Err(Error::invalid(format!(
                "split mode must be `sequence` or `frame`, got `{s}`"
            ))),
        }
    }
}

/// Seeded partition into `(train, test)`; `round(fraction * n)` units go to
/// train. Both sides keep the original order.
pub fn split(ds: &Dataset, fraction: f64, by: SplitBy, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} not in (0, 1)")));
    }
    let units = match by {
        SplitBy::Sequence => ds.sequences.len(),
        SplitBy::Frame => ds.len(),
    };
    let n_train = (fraction * units as f64).round() as usize;
    if n_train == 0 || n_train >= units {
        return Err(Error::invalid(format!(
            "splitting {units} units at {fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; units];
    for &u in &order[..n_train] {
        in_train[u] = true;
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    match by {
        SplitBy::Sequence => {
            for (seq, &t) in ds.sequences.iter().zip(&in_train) {
                if t {
                    train.push(seq.clone());
                } else {
                    test.push(seq.clone());
                }
            }
        }
        SplitBy::Frame => {
            let mut unit = 0;
            for seq in &ds.sequences {
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for frame in &seq.frames {
                    if in_train[unit] {
                        a.push(frame.clone());
                    } else {
                        b.push(frame.clone());
                    }
                    unit += 1;
                }
                if !a.is_empty() {
                    train.push(LabeledSequence {
                        id: seq.id.clone(),
                        frames: a,
                    });
                }
                if !b.is_empty() {
                    test.push(LabeledSequence {
                        id: seq.id.clone(),
                        frames: b,
                    });
                }
            }
        }
    }
    Ok((Dataset::from_valid(train), Dataset::from_valid(test)))
}

/// Ordered output categories and the emotion labels each one covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMap {
    names: Vec<String>,
    index: [Option<usize>; 7],
}

impl CategoryMap {
    /// One category per emotion, all seven.
    pub fn all() -> Self {
        Self::subset(&EmotionLabel::ALL).expect("seven distinct labels")
    }

    /// One category per listed emotion, ordered by label code.
    pub fn subset(labels: &[EmotionLabel]) -> Result<Self> {
        let mut labels = labels.to_vec();
        labels.sort();
        labels.dedup();
        Self::grouped(labels.into_iter().map(|l| (l.name().to_string(), vec![l])).collect())
    }

    /// Named groups of emotions, in the given order. A label may belong to at
    /// most one group; labels in no group are outside the map.
    pub fn grouped(groups: Vec<(String, Vec<EmotionLabel>)>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("a category map needs at least one category"));
        }
        let mut index = [None; 7];
        let mut names = Vec::with_capacity(groups.len());
        for (c, (name, labels)) in groups.into_iter().enumerate() {
            if labels.is_empty() {
                return Err(Error::invalid(format!("category `{name}` covers no emotion")));
            }
            for l in labels {
                if index[l.index()].replace(c).is_some() {
                    return Err(Error::invalid(format!("emotion {l} appears in two categories")));
                }
            }
            names.push(name);
        }
        Ok(Self { names, index })
    }

    /// Neutral / positive (joy) / surprise / negative (angry, disgust, fear, sad).
    pub fn four_way() -> Self {
        use EmotionLabel::*;
        Self::grouped(vec![
            ("neutral".into(), vec![Neutral]),
            ("positive".into(), vec![Joy]),
            ("surprise".into(), vec![Surprise]),
            ("negative".into(), vec![Angry, Disgust, Fear, Sad]),
        ])
        .expect("disjoint groups")
    }

    /// `label` against every other emotion.
    pub fn one_vs_rest(label: EmotionLabel) -> Self {
        let rest = EmotionLabel::ALL.iter().copied().filter(|&l| l != label).collect();
        Self::grouped(vec![
            (label.name().into(), vec![label]),
            (format!("not-{}", label.name()), rest),
        ])
        .expect("disjoint groups")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn category_of(&self, label: EmotionLabel) -> Option<usize> {
        self.index[label.index()]
    }

    pub fn one_hot(&self, label: EmotionLabel) -> Result<Vec<f64>> {
        let c = self.category_of(label).ok_or_else(|| Error::UnknownCategory {
            label: label.name().into(),
        })?;
        let mut v = vec![0.0; self.len()];
        v[c] = 1.0;
        Ok(v)
    }
}

impl FromStr for CategoryMap {
    type Err = Error;

    /// `all`, `emotions` (all but neutral), `four-way`, `<emotion>-vs-rest`,
    /// or a comma-separated list of emotions.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "all" => return Ok(Self::all()),
            "emotions" => return Self::subset(&EmotionLabel::ALL[1..]),
            "four-way" => return Ok(Self::four_way()),
            _ => {}
        }
        if let Some(label) = s.strip_suffix("-vs-rest") {
            return Ok(Self::one_vs_rest(label.parse()?));
        }
        let labels = s.split(',').map(str::parse).collect::<Result<Vec<EmotionLabel>>>()?;
        Self::subset(&labels)
    }
}

/// Network inputs with one-hot targets under `categories`.
pub fn to_training_pairs(ds: &Dataset, categories: &CategoryMap) -> Result<Vec<Pattern>> {
    ds.frames()
        .map(|(_, f)| {
            Ok(Pattern::new(
                f.features.as_slice().to_vec(),
                categories.one_hot(f.label)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(id: &str, labels: &[EmotionLabel]) -> LabeledSequence {
        let frames = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Frame {
                index: i as u64 + 1,
                features: FeatureVector([i as f64 * 0.1; MU_COUNT]),
                label,
            })
            .collect();
        LabeledSequence::new(id, frames).unwrap()
    }

    fn row(id: &str, idx: u64, label: u8) -> String {
        format!("{id},{idx},{},{label}\n", ["0.5"; MU_COUNT].join(","))
    }

    #[test]
    fn load_counts_and_groups() {
        let mut text = String::from("# comment\n\n");
        for i in 1..=5 {
            text += &row("a", i, 2);
        }
        for i in 1..=3 {
            text += &row("b", i * 10, 3);
        }
        let ds = Dataset::parse(&text).unwrap();
        assert_eq!(ds.len(), 8);
        assert_eq!(ds.sequences().len(), 2);
        assert_eq!(ds.sequences()[1].frames[2].index, 30);
    }

    #[test]
    fn interleaved_rows_group_by_id() {
        let text = row("a", 1, 1) + &row("b", 1, 1) + &row("a", 2, 2);
        let ds = Dataset::parse(&text).unwrap();
        assert_eq!(ds.sequences()[0].frames.len(), 2);
        assert_eq!(ds.sequences()[0].id, "a");
    }

    #[test]
    fn bad_label_names_line() {
        let text = row("a", 1, 2) + &row("a", 2, 9);
        match Dataset::parse(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains('9'));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Dataset::parse(&row("a", 1, 0)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn non_monotone_frames_rejected() {
        let text = row("a", 2, 2) + &row("a", 2, 2);
        assert!(matches!(Dataset::parse(&text), Err(Error::Parse { line: 2, .. })));
        let text = row("a", 3, 2) + &row("b", 1, 2) + &row("a", 1, 2);
        assert!(matches!(Dataset::parse(&text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(matches!(Dataset::parse("a,1,2\n"), Err(Error::Parse { line: 1, .. })));
        let bad_real = row("a", 1, 2).replacen("0.5", "zero", 1);
        assert!(Dataset::parse(&bad_real).is_err());
        let inf = row("a", 1, 2).replacen("0.5", "inf", 1);
        assert!(Dataset::parse(&inf).is_err());
        let neg_idx = row("a", 1, 2).replacen(",1,", ",-1,", 1);
        assert!(Dataset::parse(&neg_idx).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let text = "x,1,0.1,-0.2,0.3,1e-7,5,0,-0,2.5,0.333,1,1,1,3\n".to_string() + &row("y", 4, 7);
        let ds = Dataset::parse(&text).unwrap();
        let canon = ds.to_canonical_string();
        let again = Dataset::parse(&canon).unwrap();
        assert_eq!(ds, again);
        assert_eq!(canon, again.to_canonical_string());
    }

    #[test]
    fn peak_frames_centre_rule() {
        use EmotionLabel::*;
        let mut labels = vec![Neutral; 8];
        labels.extend(vec![Joy; 12]);
        let ds = Dataset::new(vec![seq("s", &labels)]).unwrap();
        let out = take_peak_frames(&ds, 3, 3).unwrap();
        let idx: Vec<u64> = out.sequences()[0].frames.iter().map(|f| f.index).collect();
        assert_eq!(idx, vec![1, 2, 3, 14, 15, 16]);
    }

    #[test]
    fn peak_frames_edge_cases() {
        use EmotionLabel::*;
        let ds = Dataset::new(vec![
            seq("short", &[Neutral, Neutral, Sad, Sad]),
            seq("calm", &[Neutral; 6]),
            seq("nostart", &[Fear; 9]),
        ])
        .unwrap();
        let out = take_peak_frames(&ds, 3, 3).unwrap();
        let labels: Vec<Vec<EmotionLabel>> = out.sequences().iter().map(|s| s.labels()).collect();
        assert_eq!(labels[0], vec![Neutral, Neutral, Sad, Sad]);
        assert_eq!(labels[1], vec![Neutral; 3]);
        assert_eq!(labels[2], vec![Fear; 3]);
        assert_eq!(out.sequences()[2].frames[1].index, 5);

        let bad = Dataset::new(vec![seq("mix", &[Neutral, Joy, Neutral, Joy])]).unwrap();
        match take_peak_frames(&bad, 3, 3) {
            Err(Error::InvalidSequence { id, .. }) => assert_eq!(id, "mix"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exclude_neutral_cases() {
        use EmotionLabel::*;
        let no_neutral = Dataset::new(vec![seq("a", &[Joy, Joy])]).unwrap();
        assert_eq!(exclude_neutral(&no_neutral), no_neutral);
        let all_neutral = Dataset::new(vec![seq("a", &[Neutral, Neutral])]).unwrap();
        assert!(exclude_neutral(&all_neutral).is_empty());
        let mixed = Dataset::new(vec![seq("a", &[Neutral, Joy, Surprise])]).unwrap();
        assert_eq!(exclude_neutral(&mixed).len(), 2);
    }

    #[test]
    fn balance_min_rule() {
        use EmotionLabel::*;
        let mut labels = vec![Neutral; 300];
        labels.extend(vec![Joy; 100]);
        let a = seq("a", &labels);
        let b = seq("b", &[Disgust; 150]);
        let ds = Dataset::new(vec![a, b]).unwrap();
        let out = sort_and_balance(&ds, BalanceSelection::First);
        assert_eq!(out.len(), 300);
        assert!(out.class_counts().values().all(|&c| c == 100));
        let codes: Vec<u8> = out.frames().map(|(_, f)| f.label.code()).collect();
        assert!(codes.windows(2).all(|w| w[0] <= w[1]));
        let ids: Vec<&str> = out.sequences().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["a:1", "a:2", "b"]);
        // first m in dataset order
        assert_eq!(out.sequences()[0].frames.last().unwrap().index, 100);
        // the result is itself a valid dataset that survives a file round trip
        let back = Dataset::parse(&out.to_canonical_string()).unwrap();
        assert_eq!(back, out);
    }

    #[test]
    fn balance_seeded_selection() {
        use EmotionLabel::*;
        let ds = Dataset::new(vec![seq("a", &[Joy; 10]), seq("b", &[Sad; 4])]).unwrap();
        let x = sort_and_balance(&ds, BalanceSelection::Seeded(3));
        let y = sort_and_balance(&ds, BalanceSelection::Seeded(3));
        assert_eq!(x, y);
        assert_eq!(x.class_counts()[&Joy], 4);
        assert_eq!(x.class_counts()[&Sad], 4);
    }

    #[test]
    fn split_by_sequence() {
        use EmotionLabel::*;
        let seqs: Vec<_> = (0..10).map(|i| seq(&format!("s{i}"), &[Joy, Joy, Joy])).collect();
        let ds = Dataset::new(seqs).unwrap();
        let (tr, te) = split(&ds, 0.7, SplitBy::Sequence, 4).unwrap();
        assert_eq!(tr.sequences().len(), 7);
        assert_eq!(te.sequences().len(), 3);
        let (tr2, _) = split(&ds, 0.7, SplitBy::Sequence, 4).unwrap();
        assert_eq!(tr, tr2);
        assert!(split(&ds, 1.0, SplitBy::Sequence, 0).is_err());
        assert!(split(&ds, 0.01, SplitBy::Sequence, 0).is_err());
    }

    #[test]
    fn split_by_frame_partitions() {
        use EmotionLabel::*;
        let ds = Dataset::new(vec![seq("a", &[Joy; 6]), seq("b", &[Sad; 4])]).unwrap();
        let (tr, te) = split(&ds, 0.5, SplitBy::Frame, 1).unwrap();
        assert_eq!(tr.len() + te.len(), 10);
        assert_eq!(tr.len(), 5);
        let mut all: Vec<(String, u64)> = tr
            .frames()
            .chain(te.frames())
            .map(|(s, f)| (s.id.clone(), f.index))
            .collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn one_hot_and_category_maps() {
        use EmotionLabel::*;
        let all = CategoryMap::all();
        assert_eq!(all.one_hot(Joy).unwrap(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let four = CategoryMap::four_way();
        assert_eq!(four.names(), ["neutral", "positive", "surprise", "negative"]);
        assert_eq!(four.category_of(Fear), Some(3));
        assert_eq!(four.category_of(Joy), Some(1));
        let bin = CategoryMap::one_vs_rest(Surprise);
        assert_eq!(bin.len(), 2);
        assert_eq!(bin.one_hot(Angry).unwrap(), vec![0.0, 1.0]);
        let emo = CategoryMap::subset(&[Sad, Joy]).unwrap();
        assert_eq!(emo.names(), ["joy", "sad"]);
        assert!(emo.one_hot(Neutral).is_err());
        assert!(CategoryMap::grouped(vec![("a".into(), vec![Joy]), ("b".into(), vec![Joy])]).is_err());
        assert_eq!("surprise-vs-rest".parse::<CategoryMap>().unwrap(), bin);
        assert_eq!("emotions".parse::<CategoryMap>().unwrap().len(), 6);
        assert_eq!("joy,sad".parse::<CategoryMap>().unwrap(), emo);
    }

    #[test]
    fn training_pairs_reject_uncovered_labels() {
        use EmotionLabel::*;
        let ds = Dataset::new(vec![seq("a", &[Neutral, Joy])]).unwrap();
        let pairs = to_training_pairs(&ds, &CategoryMap::all()).unwrap();
        assert_eq!(pairs[1].target[1], 1.0);
        assert!(to_training_pairs(&ds, &"emotions".parse().unwrap()).is_err());
    }
}
