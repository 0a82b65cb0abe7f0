//! Deterministic synthetic flow generator: six separable-but-overlapping
//! traffic classes for desk-scale end-to-end runs. The five application
//! classes draw truncated-rounded Gaussian bytes around class means with a
//! class-specific periodic motif; the VPN class is i.i.d. uniform bytes,
//! mimicking how encryption destroys payload structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::flow::LabeledSample;
use crate::types::{ByteVector, Label, LABEL_COUNT};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("profile for label {label}: {context}")]
    InvalidProfile { label: u8, context: String },
    #[error("profile override line {line}: {context}")]
    BadOverride { line: usize, context: String },
}

/// A repeating byte pattern stamped into a class's payload every `period`
/// positions, with Gaussian jitter on the motif bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifSpec {
    pub period: usize,
    pub bytes: Vec<u8>,
    pub jitter: f64,
}

/// Byte value distribution for non-motif positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ByteDistribution {
    /// Rounded Gaussian, clamped to 0..=255.
    Gaussian { mean: f64, sigma: f64 },
    /// Uniform over 0..=255 (the VPN class).
    Uniform,
}

/// How one class's flows look: byte distribution, flow length range
/// (inclusive), and optional periodic motif.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    pub label: Label,
    pub distribution: ByteDistribution,
    pub length_range: (usize, usize),
    pub motif: Option<MotifSpec>,
}

impl ClassProfile {
    fn validate(&self) -> Result<(), SynthError> {
        let fail = |context: String| {
            Err(SynthError::InvalidProfile {
                label: self.label.value(),
                context,
            })
        };
        if let ByteDistribution::Gaussian { mean, sigma } = self.distribution {
            if !(0.0..=255.0).contains(&mean) {
                return fail(format!("mean {mean} outside 0..=255"));
            }
            if !(sigma.is_finite() && sigma >= 0.0) {
                return fail(format!("sigma {sigma} must be non-negative"));
            }
        }
        let (min, max) = self.length_range;
        if min > max {
            return fail(format!("length range {min}..={max} has min > max"));
        }
        if let Some(motif) = &self.motif {
            if self.label.is_vpn() {
                return fail("the VPN profile cannot carry a motif".to_string());
            }
            if motif.period == 0 || motif.bytes.is_empty() || motif.bytes.len() > motif.period {
                return fail(format!(
                    "motif must have 0 < bytes ({}) <= period ({})",
                    motif.bytes.len(),
                    motif.period
                ));
            }
            if !(motif.jitter.is_finite() && motif.jitter >= 0.0) {
                return fail(format!("motif jitter {} must be non-negative", motif.jitter));
            }
        }
        Ok(())
    }
}

/// Full generator configuration: per-class sample counts, the master seed,
/// and one profile per label.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub counts: [usize; LABEL_COUNT],
    pub seed: u64,
    pub profiles: [ClassProfile; LABEL_COUNT],
}

impl SynthConfig {
    /// The default profiles with `count` samples of every class.
    pub fn uniform_counts(count: usize, seed: u64) -> Self {
        SynthConfig {
            counts: [count; LABEL_COUNT],
            seed,
            profiles: default_profiles(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (i, profile) in self.profiles.iter().enumerate() {
            if profile.label.index() != i {
                return Err(SynthError::InvalidProfile {
                    label: profile.label.value(),
                    context: format!("profile at slot {i} has label {}", profile.label.value()),
                });
            }
            profile.validate()?;
        }
        Ok(())
    }
}

/// The documented default profile set. Stable across releases: distinct
/// motif periods 7, 11, 13, 17, 19 for the five application classes,
/// staggered byte means, and a motif-free uniform VPN class. The motifs are
/// high-contrast so the classes carry the kind of repeating plaintext
/// signature that payload classifiers key on, while the Gaussian body keeps
/// neighboring classes overlapping.
pub fn default_profiles() -> [ClassProfile; LABEL_COUNT] {
    let gaussian = |label: Label, mean: f64, length: (usize, usize), period: usize, bytes: &[u8]| {
        ClassProfile {
            label,
            distribution: ByteDistribution::Gaussian { mean, sigma: 24.0 },
            length_range: length,
            motif: Some(MotifSpec {
                period,
                bytes: bytes.to_vec(),
                jitter: 3.0,
            }),
        }
    };
    [
        gaussian(Label::CHAT, 50.0, (300, 900), 7, &[0x00, 0xff]),
        gaussian(Label::EMAIL, 95.0, (400, 1100), 11, &[0xff, 0x00, 0xff]),
        gaussian(Label::FTP, 150.0, (500, 1400), 13, &[0x0f, 0xf0, 0x0f, 0xf0]),
        gaussian(Label::STREAMING, 200.0, (784, 1600), 17, &[0xff, 0xff, 0x00]),
        gaussian(Label::VOIP, 230.0, (160, 640), 19, &[0x00, 0x80, 0xff]),
        ClassProfile {
            label: Label::VPN,
            distribution: ByteDistribution::Uniform,
            length_range: (300, 1200),
            motif: None,
        },
    ]
}

/// Generate the configured samples, deterministically for a fixed seed.
/// Sample i (in label order) draws from its own ChaCha stream, so the
/// sequence is reproducible and per-sample generation is independent.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<LabeledSample>, SynthError> {
    cfg.validate()?;
    let total: usize = cfg.counts.iter().sum();
    let mut samples = Vec::with_capacity(total);
    let mut stream = 0u64;
    for (profile, &count) in cfg.profiles.iter().zip(&cfg.counts) {
        for _ in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream);
            stream += 1;
            samples.push(LabeledSample {
                features: ByteVector::from_bytes(&sample_bytes(profile, &mut rng)),
                label: profile.label,
            });
        }
    }
    Ok(samples)
}

fn sample_bytes(profile: &ClassProfile, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let (min, max) = profile.length_range;
    let length = rng.random_range(min..=max);
    let unit_normal = Normal::new(0.0, 1.0).expect("unit normal is valid");

    let mut bytes = Vec::with_capacity(length);
    for pos in 0..length {
        let value = match (&profile.motif, profile.distribution) {
            (Some(motif), _) if pos % motif.period < motif.bytes.len() => {
                let base = f64::from(motif.bytes[pos % motif.period]);
                round_clamp(base + motif.jitter * unit_normal.sample(rng))
            }
            (_, ByteDistribution::Gaussian { mean, sigma }) => {
                round_clamp(mean + sigma * unit_normal.sample(rng))
            }
            (_, ByteDistribution::Uniform) => rng.random_range(0..=255u8) as u8,
        };
        bytes.push(value);
    }
    bytes
}

fn round_clamp(x: f64) -> u8 {
    x.round().clamp(0.0, 255.0) as u8
}

/// Apply `key = value` overrides from a text config onto a profile set.
///
/// Schema (one assignment per line, `#` comments and blanks ignored):
///
/// ```text
/// class.<label>.mean         = <0..=255>       # Gaussian mean
/// class.<label>.sigma        = <float >= 0>    # Gaussian sigma
/// class.<label>.distribution = gaussian | uniform
/// class.<label>.min_len      = <bytes>
/// class.<label>.max_len      = <bytes>
/// class.<label>.motif_period = <positive int>
/// class.<label>.motif_bytes  = <hex digits>    # e.g. 3a29
/// class.<label>.motif_jitter = <float >= 0>
/// class.<label>.motif        = none            # remove the motif
/// ```
pub fn apply_profile_overrides(
    text: &str,
    profiles: &mut [ClassProfile; LABEL_COUNT],
) -> Result<(), SynthError> {
    for (line_no, raw) in text.lines().enumerate() {
        let line = line_no + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let bad = |context: String| SynthError::BadOverride { line, context };

        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key = value, got {content:?}")))?;
        let key = key.trim();
        let value = value.trim();

        let mut parts = key.split('.');
        let (class_word, label_part, field) = (parts.next(), parts.next(), parts.next());
        if class_word != Some("class") || parts.next().is_some() {
            return Err(bad(format!("unknown key {key:?}")));
        }
        let label: usize = label_part
            .and_then(|s| s.parse().ok())
            .filter(|&i| i < LABEL_COUNT)
            .ok_or_else(|| bad(format!("bad class label in {key:?}")))?;
        let field = field.ok_or_else(|| bad(format!("missing field in {key:?}")))?;
        let profile = &mut profiles[label];

        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(format!("{field}: not a number: {v:?}")))
        };
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| bad(format!("{field}: not an integer: {v:?}")))
        };

        match field {
            "mean" => {
                let mean = parse_f64(value)?;
                profile.distribution = match profile.distribution {
                    ByteDistribution::Gaussian { sigma, .. } => {
                        ByteDistribution::Gaussian { mean, sigma }
                    }
                    ByteDistribution::Uniform => ByteDistribution::Gaussian { mean, sigma: 28.0 },
                };
            }
            "sigma" => {
                let sigma = parse_f64(value)?;
                profile.distribution = match profile.distribution {
                    ByteDistribution::Gaussian { mean, .. } => {
                        ByteDistribution::Gaussian { mean, sigma }
                    }
                    ByteDistribution::Uniform => {
                        ByteDistribution::Gaussian { mean: 127.5, sigma }
                    }
                };
            }
            "distribution" => match value {
                "uniform" => profile.distribution = ByteDistribution::Uniform,
                "gaussian" => {
                    if !matches!(profile.distribution, ByteDistribution::Gaussian { .. }) {
                        profile.distribution = ByteDistribution::Gaussian {
                            mean: 127.5,
                            sigma: 28.0,
                        };
                    }
                }
                other => return Err(bad(format!("unknown distribution {other:?}"))),
            },
            "min_len" => profile.length_range.0 = parse_usize(value)?,
            "max_len" => profile.length_range.1 = parse_usize(value)?,
            "motif" if value == "none" => profile.motif = None,
            "motif_period" | "motif_bytes" | "motif_jitter" => {
                let motif = profile.motif.get_or_insert(MotifSpec {
                    period: 7,
                    bytes: vec![0],
                    jitter: 0.0,
                });
                match field {
                    "motif_period" => motif.period = parse_usize(value)?,
                    "motif_jitter" => motif.jitter = parse_f64(value)?,
                    _ => {
                        motif.bytes = decode_hex(value)
                            .ok_or_else(|| bad(format!("motif_bytes: bad hex {value:?}")))?;
                    }
                }
            }
            other => return Err(bad(format!("unknown field {other:?}"))),
        }
    }
    Ok(())
}

fn decode_hex(s: &str) -> Option<Vec<u8>> {
    if s.is_empty() || s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok())
        .collect()
}
