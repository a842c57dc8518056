//! Synthetic Motion-Unit sequences traced by Bezier curves.
//!
//! Each sequence starts with a neutral prefix, then every MU rises along a
//! cubic Bezier curve from 0 to the template's apex at the centre of the
//! emotional span and falls back along the same curve. Gaussian noise is
//! added to every value.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, EmotionLabel, FeatureVector, Frame, LabeledSequence, MU_COUNT};
use crate::error::{Error, Result};
use crate::net::parse_real;

/// Largest apex magnitude a template may use.
pub const MAX_APEX: f64 = 2.0;

fn binomial(n: usize, i: usize) -> f64 {
    let i = i.min(n - i);
    (0..i).fold(1.0, |acc, k| acc * (n - k) as f64 / (k + 1) as f64)
}

fn check_unit(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid(format!("curve parameter {u} is outside [0, 1]")));
    }
    Ok(())
}

/// Bernstein basis polynomial `C(n, i) u^i (1 - u)^(n - i)`.
pub fn bernstein(i: usize, n: usize, u: f64) -> Result<f64> {
    if i > n {
        return Err(Error::invalid(format!("basis index {i} exceeds degree {n}")));
    }
    check_unit(u)?;
    Ok(binomial(n, i) * u.powi(i as i32) * (1.0 - u).powi((n - i) as i32))
}

/// Bezier curve `sum_i b_i B_i^n(u)` with `n + 1` control values.
pub fn bezier_eval(control_points: &[f64], u: f64) -> Result<f64> {
    if control_points.len() < 2 {
        return Err(Error::invalid("a Bezier curve needs at least two control points"));
    }
    let n = control_points.len() - 1;
    let mut sum = 0.0;
    for (i, b) in control_points.iter().enumerate() {
        sum += b * bernstein(i, n, u)?;
    }
    Ok(sum)
}

/// Peak MU values of one emotion and the onset curve of every MU.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionTemplate {
    label: EmotionLabel,
    control_points: [[f64; 4]; MU_COUNT],
}

impl EmotionTemplate {
    /// Template whose MUs rise quickly: control values `0, a, a, a`.
    pub fn new(label: EmotionLabel, apex: [f64; MU_COUNT]) -> Result<Self> {
        Self::with_control_points(label, apex.map(|a| [0.0, a, a, a]))
    }

    /// Each MU's onset runs from `cp[0]` (must be 0) to its apex `cp[3]`.
    pub fn with_control_points(label: EmotionLabel, control_points: [[f64; 4]; MU_COUNT]) -> Result<Self> {
        for (mu, cp) in control_points.iter().enumerate() {
            if cp.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("MU{} has a non-finite control value", mu + 1)));
            }
            if cp[0] != 0.0 {
                return Err(Error::invalid(format!("MU{} curve must start at 0", mu + 1)));
            }
            if cp[3].abs() > MAX_APEX {
                return Err(Error::invalid(format!(
                    "MU{} apex {} exceeds the magnitude limit {MAX_APEX}",
                    mu + 1,
                    cp[3]
                )));
            }
            if label == EmotionLabel::Neutral && cp.iter().any(|&v| v != 0.0) {
                return Err(Error::invalid("the neutral template must be all zero"));
            }
        }
        Ok(Self { label, control_points })
    }

    pub fn label(&self) -> EmotionLabel {
        self.label
    }

    pub fn apex(&self) -> [f64; MU_COUNT] {
        self.control_points.map(|cp| cp[3])
    }

    pub fn control_points(&self) -> &[[f64; 4]; MU_COUNT] {
        &self.control_points
    }

    /// MU values at curve position `u` (0 = rest, 1 = apex).
    pub fn at(&self, u: f64) -> Result<[f64; MU_COUNT]> {
        let mut out = [0.0; MU_COUNT];
        for (o, cp) in out.iter_mut().zip(&self.control_points) {
            *o = bezier_eval(cp, u)?;
        }
        Ok(out)
    }
}

/// One template per label. Apex directions follow the MU meanings (joy lifts
/// the cheeks and mouth corners, surprise raises the brows and drops the
/// lower lip, and so on); the magnitudes are made up.
pub fn default_templates() -> Vec<EmotionTemplate> {
    use EmotionLabel::*;
    let apexes: [(EmotionLabel, [f64; MU_COUNT]); 7] = [
        (Neutral, [0.0; MU_COUNT]),
        (Joy, [0.2, -0.2, 0.6, 0.8, 0.6, 0.8, 0.1, 0.1, 0.9, 0.9, 0.3, 0.3]),
        (
            Surprise,
            [0.4, -1.2, -0.2, 0.0, -0.2, 0.0, 1.0, 1.0, 0.0, 0.0, -0.5, -0.5],
        ),
        (
            Angry,
            [-0.3, 0.3, -0.2, -0.1, -0.2, -0.1, -0.9, -0.9, 0.1, 0.1, 0.4, 0.4],
        ),
        (
            Disgust,
            [0.8, 0.2, -0.1, -0.4, -0.1, -0.4, -0.4, -0.4, 0.5, 0.5, 0.3, 0.3],
        ),
        (Fear, [0.1, -0.5, 0.6, -0.2, 0.6, -0.2, 0.7, 0.7, 0.0, 0.0, -0.4, -0.4]),
        (Sad, [0.0, 0.2, -0.1, -0.7, -0.1, -0.7, 0.3, 0.3, -0.1, -0.1, 0.3, 0.3]),
    ];
    apexes
        .into_iter()
        .map(|(label, apex)| EmotionTemplate::new(label, apex).expect("built-in templates are valid"))
        .collect()
}

/// Parses `label,mu1,...,mu12` lines; blank and `#` lines are skipped.
pub fn parse_templates(text: &str) -> Result<Vec<EmotionTemplate>> {
    let mut out: Vec<EmotionTemplate> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != MU_COUNT + 1 {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", MU_COUNT + 1, fields.len()),
            ));
        }
        let label: EmotionLabel = fields[0]
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        if out.iter().any(|t| t.label == label) {
            return Err(Error::parse(line, format!("duplicate template for {label}")));
        }
        let mut apex = [0.0; MU_COUNT];
        for (a, f) in apex.iter_mut().zip(&fields[1..]) {
            *a = parse_real(f, line)?;
        }
        out.push(EmotionTemplate::new(label, apex).map_err(|e| Error::parse(line, e.to_string()))?);
    }
    if out.is_empty() {
        return Err(Error::invalid("templates file defines no templates"));
    }
    Ok(out)
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<EmotionTemplate>> {
    parse_templates(&std::fs::read_to_string(path)?)
}

/// Apexes in the templates file format.
pub fn templates_to_string(templates: &[EmotionTemplate]) -> String {
    let mut out = String::new();
    for t in templates {
        out.push_str(t.label.name());
        for a in t.apex() {
            write!(out, ",{a}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub frames_per_sequence: usize,
    /// Leading neutral frames of each sequence.
    pub neutral_prefix: usize,
    /// Standard deviation of the Gaussian noise added to each MU value.
    pub noise_std: f64,
    pub sequences_per_emotion: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames_per_sequence: 20,
            neutral_prefix: 5,
            noise_std: 0.1,
            sequences_per_emotion: 10,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sequences_per_emotion == 0 {
            return Err(Error::invalid("sequences per emotion must be at least 1"));
        }
        if self.neutral_prefix >= self.frames_per_sequence {
            return Err(Error::invalid(format!(
                "neutral prefix {} must be shorter than the sequence length {}",
                self.neutral_prefix, self.frames_per_sequence
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid(format!(
                "noise std must be nonnegative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Curve position of each frame of an emotional span of `len` frames: rising
/// to exactly 1 at index `len / 2`, then falling back without reaching 0.
fn span_positions(len: usize) -> Vec<f64> {
    let apex = len / 2;
    let after = len - 1 - apex;
    (0..len)
        .map(|k| {
            if k <= apex {
                (k + 1) as f64 / (apex + 1) as f64
            } else {
                1.0 - (k - apex) as f64 / (after + 1) as f64
            }
        })
        .collect()
}

/// `sequences_per_emotion` sequences per template, in template order, with
/// ids `<label>-<n>`. A neutral template yields all-neutral sequences.
pub fn generate(templates: &[EmotionTemplate], cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    if templates.is_empty() {
        return Err(Error::invalid("no templates to generate from"));
    }
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let positions = span_positions(cfg.frames_per_sequence - cfg.neutral_prefix);
    let mut sequences = Vec::with_capacity(templates.len() * cfg.sequences_per_emotion);
    for t in templates {
        let curve = positions.iter().map(|&u| t.at(u)).collect::<Result<Vec<_>>>()?;
        for n in 0..cfg.sequences_per_emotion {
            let frames = (0..cfg.frames_per_sequence)
                .map(|k| {
                    let (mut values, label) = match k.checked_sub(cfg.neutral_prefix) {
                        None => ([0.0; MU_COUNT], EmotionLabel::Neutral),
                        Some(s) => (curve[s], t.label),
                    };
                    if cfg.noise_std > 0.0 {
                        for v in &mut values {
                            *v += noise.sample(&mut rng);
                        }
                    }
                    Frame {
                        index: k as u64,
                        features: FeatureVector(values),
                        label,
                    }
                })
                .collect();
            sequences.push(LabeledSequence::new(format!("{}-{n:03}", t.label.name()), frames)?);
        }
    }
    Dataset::new(sequences)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn de_casteljau(points: &[f64], u: f64) -> f64 {
        let mut p = points.to_vec();
        while p.len() > 1 {
            p = p.windows(2).map(|w| (1.0 - u) * w[0] + u * w[1]).collect();
        }
        p[0]
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein(0, 4, 0.0).unwrap(), 1.0);
        for i in 1..=4 {
            assert_eq!(bernstein(i, 4, 0.0).unwrap(), 0.0);
        }
        let sum: f64 = (0..=5).map(|i| bernstein(i, 5, 0.37).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(bernstein(1, 2, 0.5).unwrap(), 0.5);
        assert!(bernstein(3, 2, 0.5).is_err());
        assert!(bernstein(0, 2, 1.5).is_err());
        assert!(bernstein(0, 2, f64::NAN).is_err());
    }

    #[test]
    fn bezier_examples() {
        assert_eq!(bezier_eval(&[0.0, 10.0], 0.5).unwrap(), 5.0);
        assert_eq!(bezier_eval(&[0.0, 0.0, 1.0, 1.0], 0.5).unwrap(), 0.5);
        assert!(bezier_eval(&[], 0.5).is_err());
        assert!(bezier_eval(&[1.0], 0.5).is_err());
        let cp = [0.3, -1.0, 2.5, 0.7, 1.1];
        assert_eq!(bezier_eval(&cp, 0.0).unwrap(), 0.3);
        assert_eq!(bezier_eval(&cp, 1.0).unwrap(), 1.1);
        for k in 0..=20 {
            let u = k as f64 / 20.0;
            assert!((bezier_eval(&cp, u).unwrap() - de_casteljau(&cp, u)).abs() < 1e-12);
        }
    }

    #[test]
    fn span_positions_peak_at_centre() {
        let p = span_positions(15);
        assert_eq!(p[7], 1.0);
        assert!(p[..8].windows(2).all(|w| w[0] < w[1]));
        assert!(p[7..].windows(2).all(|w| w[0] > w[1]));
        assert!(p.iter().all(|&u| u > 0.0 && u <= 1.0));
        assert_eq!(span_positions(1), vec![1.0]);
    }

    #[test]
    fn noiseless_apex_is_exact() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            sequences_per_emotion: 2,
            ..SynthConfig::default()
        };
        let templates = default_templates();
        let ds = generate(&templates, &cfg).unwrap();
        for (seq, t) in ds.sequences().iter().zip(templates.iter().flat_map(|t| [t, t])) {
            let centre = cfg.neutral_prefix + (cfg.frames_per_sequence - cfg.neutral_prefix) / 2;
            assert_eq!(seq.frames[centre].features.0, t.apex());
            assert!(seq.frames[..cfg.neutral_prefix]
                .iter()
                .all(|f| f.features.0 == [0.0; 12]));
        }
        assert_eq!(generate(&templates, &cfg).unwrap(), ds);
    }

    #[test]
    fn labels_and_counts() {
        let cfg = SynthConfig {
            frames_per_sequence: 20,
            neutral_prefix: 4,
            sequences_per_emotion: 10,
            ..SynthConfig::default()
        };
        let ds = generate(&default_templates(), &cfg).unwrap();
        assert_eq!(ds.len(), 1400);
        for seq in ds.sequences() {
            let expected = if seq.id.starts_with("neutral") {
                EmotionLabel::Neutral
            } else {
                seq.frames[19].label
            };
            assert!(seq.frames[..4].iter().all(|f| f.label == EmotionLabel::Neutral));
            assert!(seq.frames[4..].iter().all(|f| f.label == expected));
        }
        let reparsed = Dataset::parse(&ds.to_canonical_string()).unwrap();
        assert_eq!(reparsed.len(), 1400);
    }

    #[test]
    fn default_templates_are_separated() {
        let t = default_templates();
        assert_eq!(t.len(), 7);
        assert_eq!(t[0].apex(), [0.0; 12]);
        for a in &t {
            assert!(a.apex().iter().all(|v| v.abs() <= MAX_APEX));
            for b in &t {
                if a.label() != b.label() {
                    let d: f64 = a.apex().iter().zip(b.apex()).map(|(x, y)| (x - y) * (x - y)).sum();
                    assert!(d.sqrt() >= 0.5, "{} vs {}", a.label(), b.label());
                }
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let t = default_templates();
        let bad = [
            SynthConfig {
                sequences_per_emotion: 0,
                ..SynthConfig::default()
            },
            SynthConfig {
                neutral_prefix: 20,
                ..SynthConfig::default()
            },
            SynthConfig {
                noise_std: -1.0,
                ..SynthConfig::default()
            },
        ];
        for cfg in bad {
            assert!(generate(&t, &cfg).is_err());
        }
        assert!(generate(&[], &SynthConfig::default()).is_err());
    }

    #[test]
    fn templates_round_trip_and_errors() {
        let t = default_templates();
        assert_eq!(parse_templates(&templates_to_string(&t)).unwrap(), t);
        assert!(matches!(
            parse_templates("joy,1,2,3\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_templates("# x\njoy,0,0,0,0,0,0,0,0,0,0,0,2.5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_templates("neutral,0,0,0,0,0,0,0,0,0,0,0,0.1\n").is_err());
        assert!(parse_templates("joy,0,0,0,0,0,0,0,0,0,0,0,1\njoy,0,0,0,0,0,0,0,0,0,0,0,1\n").is_err());
        assert!(parse_templates("\n").is_err());
    }
}
