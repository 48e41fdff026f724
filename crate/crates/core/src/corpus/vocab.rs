use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::PairCorpus;
use crate::error::{Error, Result};

pub type TokenId = usize;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;

/// Reserved tokens, in id order.
pub const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Token/id bijection. Ids 0..4 are the specials; the remaining ids are the
/// most frequent corpus tokens in descending frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent tokens across both sides of the
    /// corpus. Equal counts are ordered by first occurrence.
    pub fn build(corpus: &PairCorpus, max_size: usize) -> Result<Self> {
        if max_size == 0 {
            return Err(Error::invalid("vocabulary max_size must be positive"));
        }
        if corpus.is_empty() {
            return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
        }
        // token -> (count, first occurrence)
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut seen = 0usize;
        for pair in &corpus.pairs {
            for tok in pair.source.iter().chain(&pair.target) {
                if SPECIALS.contains(&tok.as_str()) {
                    continue;
                }
                let entry = counts.entry(tok.as_str()).or_insert((0, seen));
                entry.0 += 1;
                seen += 1;
            }
        }
        let mut ranked: Vec<(&str, usize, usize)> = counts.into_iter().map(|(t, (c, first))| (t, c, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        ranked.truncate(max_size);
        Self::from_tokens(ranked.into_iter().map(|(t, _, _)| t.to_owned()))
    }

    /// Builds a vocabulary from non-special tokens in id order.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        all.extend(tokens);
        let mut ids = HashMap::with_capacity(all.len());
        for (id, tok) in all.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid vocabulary token {tok:?}")));
            }
            if ids.insert(tok.clone(), id).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Self { tokens: all, ids })
    }

    /// Total size including the specials.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to ids; out-of-vocabulary tokens become `UNK`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id(t.as_ref()).unwrap_or(UNK)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(SPECIALS[UNK]).to_owned())
            .collect()
    }

    /// One token per line; the zero-based line index is the id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        for (i, special) in SPECIALS.iter().enumerate() {
            if lines.get(i) != Some(special) {
                return Err(Error::format(
                    origin,
                    i + 1,
                    format!("expected reserved token {special}"),
                ));
            }
        }
        Self::from_tokens(lines[SPECIALS.len()..].iter().map(|s| s.to_string()))
            .map_err(|e| Error::format(origin, 0, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the serialized vocabulary, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
