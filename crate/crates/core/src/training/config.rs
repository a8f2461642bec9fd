//! Training configuration and its `key = value` file format.
//!
//! Keys are the field names of [`TrainConfig`]. Blank lines and lines
//! starting with `#` are ignored. `max_steps` and `max_epochs` are each
//! optional but at least one must be set; `patience` defaults to 10.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::training::adam::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistractorMode {
    /// One draw reused for every step.
    Static,
    /// Fresh draw per example per batch.
    Dynamic,
}

impl DistractorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DistractorMode::Static => "static",
            DistractorMode::Dynamic => "dynamic",
        }
    }
}

impl FromStr for DistractorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Self::Static),
            "dynamic" => Ok(Self::Dynamic),
            other => Err(Error::Config(format!(
                "unknown distractor_mode {other:?} (static|dynamic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Distractors per example (N - 1).
    pub num_distractors: usize,
    pub distractor_mode: DistractorMode,
    /// Weight of the context-sentence loss; 0 disables it.
    pub cs_loss_weight: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_steps: Option<usize>,
    pub max_epochs: Option<usize>,
    pub seed: u64,
    pub eval_every: usize,
    /// Evaluations without improvement before stopping early.
    pub patience: usize,
}

pub const REQUIRED_KEYS: [&str; 10] = [
    "num_distractors",
    "distractor_mode",
    "cs_loss_weight",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "batch_size",
    "seed",
    "eval_every",
];

const OPTIONAL_KEYS: [&str; 3] = ["max_steps", "max_epochs", "patience"];

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_distractors: 1000,
            distractor_mode: DistractorMode::Dynamic,
            cs_loss_weight: 1.0,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            max_steps: None,
            max_epochs: Some(10),
            seed: 0,
            eval_every: 500,
            patience: 10,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("invalid value {raw:?} for key {key}")))
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_distractors == 0 {
            return bad("num_distractors must be positive");
        }
        if !(self.cs_loss_weight >= 0.0 && self.cs_loss_weight.is_finite()) {
            return bad("cs_loss_weight must be a non-negative real");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return bad("batch_size and eval_every must be positive");
        }
        match (self.max_steps, self.max_epochs) {
            (None, None) => return bad("one of max_steps or max_epochs is required"),
            (Some(0), _) | (_, Some(0)) => return bad("max_steps/max_epochs must be positive"),
            _ => {}
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        Ok(())
    }

    /// Parses `key = value` lines into a raw map, rejecting unknown keys.
    pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::ValidationAt {
                line: i + 1,
                message: format!("expected \"key = value\", got {line:?}"),
            })?;
            let k = k.trim();
            if !REQUIRED_KEYS.contains(&k) && !OPTIONAL_KEYS.contains(&k) {
                return Err(Error::ValidationAt {
                    line: i + 1,
                    message: format!("unknown config key {k:?}"),
                });
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(map)
    }

    /// Builds a config from raw entries; every required key must be present.
    pub fn from_entries(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| -> Result<&str> {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Config(format!("missing config key {k}")))
        };
        let opt = |k: &str| -> Result<Option<usize>> {
            map.get(k).map(|v| parse_value(k, v)).transpose()
        };
        let cfg = Self {
            num_distractors: parse_value("num_distractors", get("num_distractors")?)?,
            distractor_mode: get("distractor_mode")?.parse()?,
            cs_loss_weight: parse_value("cs_loss_weight", get("cs_loss_weight")?)?,
            learning_rate: parse_value("learning_rate", get("learning_rate")?)?,
            adam_beta1: parse_value("adam_beta1", get("adam_beta1")?)?,
            adam_beta2: parse_value("adam_beta2", get("adam_beta2")?)?,
            adam_eps: parse_value("adam_eps", get("adam_eps")?)?,
            batch_size: parse_value("batch_size", get("batch_size")?)?,
            max_steps: opt("max_steps")?,
            max_epochs: opt("max_epochs")?,
            seed: parse_value("seed", get("seed")?)?,
            eval_every: parse_value("eval_every", get("eval_every")?)?,
            patience: opt("patience")?.unwrap_or(10),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(&Self::parse_entries(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("num_distractors", self.num_distractors.to_string());
        kv("distractor_mode", self.distractor_mode.as_str().into());
        kv("cs_loss_weight", self.cs_loss_weight.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("batch_size", self.batch_size.to_string());
        if let Some(v) = self.max_steps {
            kv("max_steps", v.to_string());
        }
        if let Some(v) = self.max_epochs {
            kv("max_epochs", v.to_string());
        }
        kv("seed", self.seed.to_string());
        kv("eval_every", self.eval_every.to_string());
        kv("patience", self.patience.to_string());
        s
    }
}
