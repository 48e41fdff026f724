use std::fs;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Splits `text` into normalized tokens: NFC, lowercase, split on Unicode
/// whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    normalized.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl SentencePair {
    pub fn new(source: Vec<String>, target: Vec<String>) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::invalid("sentence pair sides must be non-empty"));
        }
        Ok(Self { source, target })
    }

    pub fn from_text(source: &str, target: &str) -> Result<Self> {
        Self::new(tokenize(source), tokenize(target))
    }
}

/// Ordered (source, target) pairs. Order is load order; the positional
/// splits depend on it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCorpus {
    pub name: String,
    pub pairs: Vec<SentencePair>,
}

impl PairCorpus {
    pub fn new(name: impl Into<String>, pairs: Vec<SentencePair>) -> Self {
        Self {
            name: name.into(),
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Parses `source<TAB>target` lines. `origin` names the input in errors.
    pub fn parse(name: impl Into<String>, origin: &str, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            pairs.push(parse_pair_line(origin, idx + 1, line)?);
        }
        Ok(Self::new(name, pairs))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(name, &path.display().to_string(), &text)
    }

    /// Serializes as `source<TAB>target` lines of space-joined tokens.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for pair in &self.pairs {
            out.push_str(&pair.source.join(" "));
            out.push('\t');
            out.push_str(&pair.target.join(" "));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn parse_pair_line(origin: &str, line_no: usize, line: &str) -> Result<SentencePair> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let Some((source, target)) = line.split_once('\t') else {
        return Err(Error::format(origin, line_no, "missing TAB between source and target"));
    };
    let source = tokenize(source);
    let target = tokenize(target);
    if source.is_empty() {
        return Err(Error::format(origin, line_no, "empty source sentence"));
    }
    if target.is_empty() {
        return Err(Error::format(origin, line_no, "empty target sentence"));
    }
    Ok(SentencePair { source, target })
}
