use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::seq2seq::{on_off, parse_field, parse_on_off, ModelConfig, Schedule};

/// Largest vocabulary used for the smaller of the two reference corpora.
pub const DEFAULT_VOCAB_SIZE: usize = 5000;

/// Everything needed to reproduce a training run. Stored as flat
/// `key=value` lines in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Architecture; `vocab_size` is ignored here and taken from the built vocabulary.
    pub model: ModelConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Cap on non-special vocabulary entries.
    pub vocab_size: usize,
    pub clip_norm: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let schedule = Schedule::default();
        Self {
            train: None,
            dev: None,
            test: None,
            output: None,
            embeddings: None,
            model: ModelConfig::default(),
            lr: schedule.lr,
            batch_size: schedule.batch_size,
            epochs: schedule.epochs,
            seed: schedule.seed,
            vocab_size: DEFAULT_VOCAB_SIZE,
            clip_norm: schedule.clip_norm,
        }
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
            clip_norm: self.clip_norm,
        }
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        vec![
            ("train", path_text(&self.train)),
            ("dev", path_text(&self.dev)),
            ("test", path_text(&self.test)),
            ("output", path_text(&self.output)),
            ("embeddings", path_text(&self.embeddings)),
            ("cell", m.cell.to_string()),
            ("layers", m.layers.to_string()),
            ("attention", on_off(m.attention).to_owned()),
            ("bidirectional", on_off(m.bidirectional).to_owned()),
            ("hidden", m.hidden.to_string()),
            ("embed_dim", m.embed_dim.to_string()),
            ("dropout", m.dropout.to_string()),
            ("max_decode_len", m.max_decode_len.to_string()),
            ("lr", self.lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("clip_norm", self.clip_norm.map(|c| c.to_string()).unwrap_or_default()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        match key {
            "train" => self.train = opt_path(value),
            "dev" => self.dev = opt_path(value),
            "test" => self.test = opt_path(value),
            "output" => self.output = opt_path(value),
            "embeddings" => self.embeddings = opt_path(value),
            "cell" => m.cell = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "layers" => m.layers = parse_field(key, value)?,
            "attention" => m.attention = parse_on_off(key, value)?,
            "bidirectional" => m.bidirectional = parse_on_off(key, value)?,
            "hidden" => m.hidden = parse_field(key, value)?,
            "embed_dim" => m.embed_dim = parse_field(key, value)?,
            "dropout" => m.dropout = parse_field(key, value)?,
            "max_decode_len" => m.max_decode_len = parse_field(key, value)?,
            "lr" => self.lr = parse_field(key, value)?,
            "batch_size" => self.batch_size = parse_field(key, value)?,
            "epochs" => self.epochs = parse_field(key, value)?,
            "seed" => self.seed = parse_field(key, value)?,
            "vocab_size" => self.vocab_size = parse_field(key, value)?,
            "clip_norm" => {
                self.clip_norm = if value.is_empty() {
                    None
                } else {
                    Some(parse_field(key, value)?)
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, origin: &str, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::format(origin, i + 1, "expected key=value"));
            };
            self.set(k.trim(), v.trim()).map_err(|e| match e {
                Error::Config(m) => Error::format(origin, i + 1, m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(origin, text)?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut probe = self.model.clone();
        probe.vocab_size = probe.vocab_size.max(crate::corpus::SPECIALS.len());
        probe.validate()?;
        if self.batch_size == 0 || self.epochs == 0 || self.vocab_size == 0 {
            return Err(Error::Config(
                "batch_size, epochs and vocab_size must be positive".into(),
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr {} must be a finite non-negative number",
                self.lr
            )));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}
