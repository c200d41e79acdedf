//! Flat `key = value` simulation configuration.
//!
//! ```text
//! # shaped link, k = 648
//! scheme = shaped-symbolwise
//! k = 648
//! snr = 9:13:0.25
//! blocks = 2000
//! seed = 1
//! ```
//!
//! Keys not given fall back to the preset for `(scheme, k)` when one exists,
//! see [`SimConfig::preset`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::fec::{CodeRate, DEFAULT_BP_ITERATIONS};
use crate::harq::{ChannelKind, HarqConfig, HarqError, HarqLink, ShapingConfig};
use crate::puncture::{PunctureError, Scheme};
use crate::shaping::{quantize_composition, AmplitudeDistribution, Composition};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {0:?} given twice")]
    DuplicateKey(String),
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("unknown scheme {0:?} (expected shaped-symbolwise, shaped-sequential or uniform)")]
    UnknownScheme(String),
    #[error("schedule sums to {sum} symbols but a codeword has {n}")]
    ScheduleSum { sum: usize, n: usize },
    #[error("first transmission has {n1} symbols, the shaped layout needs at least {min}")]
    FirstTransmissionTooShort { n1: usize, min: usize },
    #[error("uniform scheme does not take shaping parameter {0:?}")]
    ShapedParamForUniform(&'static str),
    #[error("both composition and distribution given")]
    ConflictingShaping,
    #[error(transparent)]
    Link(HarqError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<HarqError> for ConfigError {
    fn from(e: HarqError) -> Self {
        match e {
            HarqError::Puncture(PunctureError::ScheduleSum { sum, n }) => ConfigError::ScheduleSum { sum, n },
            HarqError::Puncture(PunctureError::FirstTransmissionTooShort { n1, min }) => {
                ConfigError::FirstTransmissionTooShort { n1, min }
            }
            HarqError::UnexpectedShaping => ConfigError::ShapedParamForUniform("k_prime"),
            other => ConfigError::Link(other),
        }
    }
}

/// Evenly spaced SNR points `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrGrid {
    pub fn single(snr_db: f64) -> Self {
        Self {
            start: snr_db,
            stop: snr_db,
            step: 1.0,
        }
    }

    /// The grid points, rounded to ten significant digits so that the same
    /// nominal SNR always maps to the same value (and random streams).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as i64 + 1;
        (0..count.max(0))
            .map(|i| canonical(self.start + i as f64 * self.step))
            .collect()
    }
}

pub(crate) fn canonical(x: f64) -> f64 {
    format!("{x:.9e}").parse().expect("formatted float parses")
}

impl FromStr for SnrGrid {
    type Err = String;

    /// `start:stop:step`, `start:stop` (step 1) or a single value.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        let grid = match parts[..] {
            [x] => Self::single(x),
            [start, stop] => Self { start, stop, step: 1.0 },
            [start, stop, step] => Self { start, stop, step },
            _ => return Err("expected start:stop:step".into()),
        };
        if !grid.start.is_finite()
            || !grid.stop.is_finite()
            || grid.step.is_nan()
            || grid.step <= 0.0
            || grid.stop < grid.start
        {
            return Err("need finite start <= stop and step > 0".into());
        }
        Ok(grid)
    }
}

impl std::fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// Amplitude shaping target: an explicit composition or a distribution
/// quantized to one.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapingTarget {
    Composition(Vec<u32>),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub k: usize,
    /// Bits per QAM symbol.
    pub m: usize,
    pub code_rate: CodeRate,
    /// Matcher input length; shaped schemes only.
    pub k_prime: Option<usize>,
    pub shaping: Option<ShapingTarget>,
    pub schedule: Vec<usize>,
    pub channel: ChannelKind,
    pub snr: SnrGrid,
    pub blocks: u64,
    pub seed: u64,
    pub bp_iterations: usize,
    pub demapper_priors: bool,
    pub known_filler: bool,
    pub output: Option<PathBuf>,
}

/// Length of every supported LDPC code.
const CODE_LENGTH: usize = 1296;

const KEYS: &[&str] = &[
    "scheme",
    "k",
    "m",
    "code_rate",
    "k_prime",
    "composition",
    "distribution",
    "schedule",
    "channel",
    "snr",
    "blocks",
    "seed",
    "bp_iterations",
    "demapper_priors",
    "known_filler",
    "output",
];

impl SimConfig {
    /// The reference setups for 64-QAM and the n = 1296 codes.
    ///
    /// | k   | shaped: k', rate, schedule | uniform: rate | desired distribution |
    /// |-----|----------------------------|---------------|----------------------|
    /// | 648 | 590, 3/4, 180/18/18        | 1/2           | 0.5764 0.3148 0.0926 0.0162 |
    /// | 864 | 700, 5/6, 192/12/12        | 2/3           | 0.4792 0.3241 0.1505 0.0463 |
    pub fn preset(scheme: Scheme, k: usize) -> Option<Self> {
        let (k_prime, shaped_rate, uniform_rate, schedule, dist) = match k {
            648 => (
                590,
                CodeRate::R3_4,
                CodeRate::R1_2,
                vec![180, 18, 18],
                vec![0.5764, 0.3148, 0.0926, 0.0162],
            ),
            864 => (
                700,
                CodeRate::R5_6,
                CodeRate::R2_3,
                vec![192, 12, 12],
                vec![0.4792, 0.3241, 0.1505, 0.0463],
            ),
            _ => return None,
        };
        let shaped = scheme.is_shaped();
        Some(Self {
            scheme,
            k,
            m: 6,
            code_rate: if shaped { shaped_rate } else { uniform_rate },
            k_prime: shaped.then_some(k_prime),
            shaping: shaped.then_some(ShapingTarget::Distribution(dist)),
            schedule,
            channel: ChannelKind::Awgn,
            snr: SnrGrid::single(11.0),
            blocks: 2000,
            seed: 1,
            bp_iterations: DEFAULT_BP_ITERATIONS,
            demapper_priors: true,
            known_filler: true,
            output: None,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &[])
    }

    /// Parses config text, then applies `overrides` (later pairs win).
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim().to_string();
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(ConfigError::DuplicateKey(key));
            }
            pairs.push((key, value.trim().to_string()));
        }
        for (key, value) in overrides {
            pairs.retain(|(k, _)| k != key);
            pairs.push((key.clone(), value.clone()));
        }
        Self::from_pairs(&pairs)
    }

    /// Builds a config from `key, value` pairs, starting from the preset for
    /// the given scheme and `k`.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        for (key, _) in pairs {
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let scheme_text = get("scheme").ok_or(ConfigError::MissingKey("scheme"))?;
        let scheme: Scheme = scheme_text
            .parse()
            .map_err(|_| ConfigError::UnknownScheme(scheme_text.to_string()))?;
        let k: usize = parse_value("k", get("k").ok_or(ConfigError::MissingKey("k"))?)?;

        if !scheme.is_shaped() {
            for key in ["k_prime", "composition", "distribution"] {
                if get(key).is_some() {
                    return Err(ConfigError::ShapedParamForUniform(match key {
                        "k_prime" => "k_prime",
                        "composition" => "composition",
                        _ => "distribution",
                    }));
                }
            }
        }
        if get("composition").is_some() && get("distribution").is_some() {
            return Err(ConfigError::ConflictingShaping);
        }

        let mut cfg = match Self::preset(scheme, k) {
            Some(p) => p,
            None => {
                let code_rate = get("code_rate").ok_or(ConfigError::MissingKey("code_rate"))?;
                let schedule = get("schedule").ok_or(ConfigError::MissingKey("schedule"))?;
                if scheme.is_shaped() {
                    get("k_prime").ok_or(ConfigError::MissingKey("k_prime"))?;
                    if get("composition").is_none() && get("distribution").is_none() {
                        return Err(ConfigError::MissingKey("composition"));
                    }
                }
                Self {
                    scheme,
                    k,
                    m: 6,
                    code_rate: parse_value("code_rate", code_rate)?,
                    k_prime: None,
                    shaping: None,
                    schedule: parse_list("schedule", schedule)?,
                    channel: ChannelKind::Awgn,
                    snr: SnrGrid::single(11.0),
                    blocks: 2000,
                    seed: 1,
                    bp_iterations: DEFAULT_BP_ITERATIONS,
                    demapper_priors: true,
                    known_filler: true,
                    output: None,
                }
            }
        };

        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "scheme" | "k" => {}
                "m" => cfg.m = parse_value(key, v)?,
                "code_rate" => cfg.code_rate = parse_value(key, v)?,
                "k_prime" => cfg.k_prime = Some(parse_value(key, v)?),
                "composition" => cfg.shaping = Some(ShapingTarget::Composition(parse_list(key, v)?)),
                "distribution" => cfg.shaping = Some(ShapingTarget::Distribution(parse_list(key, v)?)),
                "schedule" => cfg.schedule = parse_list(key, v)?,
                "channel" => {
                    cfg.channel = match v {
                        "awgn" => ChannelKind::Awgn,
                        "rayleigh2x2" | "mimo2x2" => ChannelKind::Rayleigh2x2,
                        _ => return Err(invalid(key, v, "expected awgn or rayleigh2x2")),
                    }
                }
                "snr" => cfg.snr = v.parse().map_err(|e: String| invalid(key, v, &e))?,
                "blocks" => cfg.blocks = parse_value(key, v)?,
                "seed" => cfg.seed = parse_value(key, v)?,
                "bp_iterations" => cfg.bp_iterations = parse_value(key, v)?,
                "demapper_priors" => cfg.demapper_priors = parse_value(key, v)?,
                "known_filler" => cfg.known_filler = parse_value(key, v)?,
                "output" => cfg.output = Some(PathBuf::from(v)),
                _ => unreachable!("keys checked above"),
            }
        }
        if cfg.blocks == 0 {
            return Err(invalid("blocks", "0", "must be positive"));
        }
        if cfg.bp_iterations == 0 {
            return Err(invalid("bp_iterations", "0", "must be positive"));
        }
        cfg.link()?;
        Ok(cfg)
    }

    /// Composition actually used by the matcher.
    pub fn composition(&self) -> Result<Option<Composition>, ConfigError> {
        let n_d = 2 * (CODE_LENGTH / self.m);
        match &self.shaping {
            None => Ok(None),
            Some(ShapingTarget::Composition(c)) => Composition::new(c.clone())
                .map(Some)
                .map_err(|e| invalid("composition", &join(c), &e.to_string())),
            Some(ShapingTarget::Distribution(d)) => {
                let dist = AmplitudeDistribution::from_weights(d)
                    .map_err(|e| invalid("distribution", &join(d), &e.to_string()))?;
                quantize_composition(&dist, n_d)
                    .map(Some)
                    .map_err(|e| invalid("distribution", &join(d), &e.to_string()))
            }
        }
    }

    pub fn harq_config(&self) -> Result<HarqConfig, ConfigError> {
        let shaping = match (self.k_prime, self.composition()?) {
            (Some(k_prime), Some(composition)) => Some(ShapingConfig { k_prime, composition }),
            (None, None) => None,
            (None, Some(_)) => return Err(ConfigError::MissingKey("k_prime")),
            (Some(_), None) => return Err(ConfigError::MissingKey("composition")),
        };
        Ok(HarqConfig {
            scheme: self.scheme,
            k: self.k,
            m: self.m,
            k_c: self.code_rate.info_bits(),
            shaping,
            schedule: self.schedule.clone(),
            channel: self.channel,
            bp_iterations: self.bp_iterations,
            demapper_priors: self.demapper_priors,
            known_filler: self.known_filler,
        })
    }

    /// Validates everything and builds the link.
    pub fn link(&self) -> Result<HarqLink, ConfigError> {
        Ok(HarqLink::new(self.harq_config()?)?)
    }

    /// Config text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme = {}", self.scheme);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "code_rate = {}", self.code_rate);
        if let Some(kp) = self.k_prime {
            let _ = writeln!(s, "k_prime = {kp}");
        }
        match &self.shaping {
            Some(ShapingTarget::Composition(c)) => {
                let _ = writeln!(s, "composition = {}", join(c));
            }
            Some(ShapingTarget::Distribution(d)) => {
                let _ = writeln!(s, "distribution = {}", join(d));
            }
            None => {}
        }
        let _ = writeln!(s, "schedule = {}", join(&self.schedule));
        let channel = match self.channel {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh2x2 => "rayleigh2x2",
        };
        let _ = writeln!(s, "channel = {channel}");
        let _ = writeln!(s, "snr = {}", self.snr);
        let _ = writeln!(s, "blocks = {}", self.blocks);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "bp_iterations = {}", self.bp_iterations);
        let _ = writeln!(s, "demapper_priors = {}", self.demapper_priors);
        let _ = writeln!(s, "known_filler = {}", self.known_filler);
        if let Some(out) = &self.output {
            let _ = writeln!(s, "output = {}", out.display());
        }
        s
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| invalid(key, v, &e.to_string()))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|x| parse_value(key, x)).collect()
}
