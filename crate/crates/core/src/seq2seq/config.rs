use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::recurrent::CellKind;

/// Architecture hyperparameters. Defaults follow the reference training
/// setup: 300 hidden units, 300-dim embeddings, dropout 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub cell: CellKind,
    pub layers: usize,
    pub attention: bool,
    pub bidirectional: bool,
    pub hidden: usize,
    pub embed_dim: usize,
    /// Vocabulary size including the reserved tokens.
    pub vocab_size: usize,
    pub dropout: f64,
    pub max_decode_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            cell: CellKind::Lstm,
            layers: 2,
            attention: false,
            bidirectional: true,
            hidden: 300,
            embed_dim: 300,
            vocab_size: 4,
            dropout: 0.5,
            max_decode_len: 30,
        }
    }
}

pub(crate) fn on_off(flag: bool) -> &'static str {
    if flag {
        "on"
    } else {
        "off"
    }
}

pub(crate) fn parse_on_off(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected on|off, got {other:?}"))),
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("layers must be at least 1".into()));
        }
        if self.hidden == 0 || self.embed_dim == 0 {
            return Err(Error::Config("hidden and embed_dim must be positive".into()));
        }
        if self.vocab_size <= crate::corpus::EOS {
            return Err(Error::Config("vocab_size must include the reserved tokens".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of the encoder states and summaries.
    pub fn encoder_width(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    /// Width of the vector fed to the output projection.
    pub fn projection_width(&self) -> usize {
        if self.attention {
            self.hidden + self.encoder_width()
        } else {
            self.hidden
        }
    }

    /// Stable key/value listing used by config files and checkpoints.
    pub fn to_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("cell", self.cell.to_string()),
            ("layers", self.layers.to_string()),
            ("attention", on_off(self.attention).to_owned()),
            ("bidirectional", on_off(self.bidirectional).to_owned()),
            ("hidden", self.hidden.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("dropout", self.dropout.to_string()),
            ("max_decode_len", self.max_decode_len.to_string()),
        ]
    }

    /// Applies recognized keys from `map` on top of `self`.
    pub fn apply_entries(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in map {
            match key.as_str() {
                "cell" => self.cell = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "layers" => self.layers = parse_field(key, value)?,
                "attention" => self.attention = parse_on_off(key, value)?,
                "bidirectional" => self.bidirectional = parse_on_off(key, value)?,
                "hidden" => self.hidden = parse_field(key, value)?,
                "embed_dim" => self.embed_dim = parse_field(key, value)?,
                "vocab_size" => self.vocab_size = parse_field(key, value)?,
                "dropout" => self.dropout = parse_field(key, value)?,
                "max_decode_len" => self.max_decode_len = parse_field(key, value)?,
                _ => {}
            }
        }
        Ok(())
    }
}
