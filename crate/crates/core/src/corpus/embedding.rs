use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Half-width of the uniform init used for rows the pretrained file does
/// not cover.
pub const EMBEDDING_INIT_RANGE: f64 = 0.1;

/// One row per vocabulary id (specials included), `dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    table: Tensor,
    covered: usize,
}

impl EmbeddingMatrix {
    /// Every row drawn from U(-0.1, 0.1).
    pub fn random(rows: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * dim)
            .map(|_| rng.gen_range(-EMBEDDING_INIT_RANGE..=EMBEDDING_INIT_RANGE))
            .collect();
        Self {
            table: Tensor::from_vec(vec![rows, dim], data).expect("shape matches data"),
            covered: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn row(&self, id: usize) -> &[f64] {
        let d = self.dim();
        &self.table.data()[id * d..(id + 1) * d]
    }

    /// Number of rows copied from a pretrained file.
    pub fn covered(&self) -> usize {
        self.covered
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.table
    }

    pub fn into_tensor(self) -> Tensor {
        self.table
    }
}

/// Parses a text embedding file (`V D` header, then `word v1 .. vD`).
/// File words are normalized like corpus tokens; the first line for a given
/// normalized word wins.
pub fn read_embeddings(origin: &str, text: &str, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::format(origin, 1, "missing `V D` header"));
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let declared = match fields.as_slice() {
        [v, d] => match (v.parse::<usize>(), d.parse::<usize>()) {
            (Ok(_), Ok(d)) => d,
            _ => return Err(Error::format(origin, 1, "header must be two integers `V D`")),
        },
        _ => return Err(Error::format(origin, 1, "header must be two integers `V D`")),
    };
    if declared != dim {
        return Err(Error::format(
            origin,
            1,
            format!("embedding dimension {declared} does not match configured {dim}"),
        ));
    }

    let mut matrix = EmbeddingMatrix::random(vocab.len(), dim, seed);
    let mut filled = vec![false; vocab.len()];
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else {
            continue;
        };
        let mut values = Vec::with_capacity(dim);
        for part in parts {
            let v: f64 = part
                .parse()
                .map_err(|_| Error::format(origin, line_no, format!("bad float {part:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(origin, line_no, "non-finite embedding value"));
            }
            values.push(v);
        }
        if values.len() != dim {
            return Err(Error::format(
                origin,
                line_no,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        let normalized = tokenize(word);
        let [token] = normalized.as_slice() else {
            continue;
        };
        if let Some(id) = vocab.id(token) {
            if !filled[id] {
                filled[id] = true;
                matrix.table.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(&values);
                matrix.covered += 1;
            }
        }
    }
    Ok(matrix)
}

pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(&path.display().to_string(), &text, vocab, dim, seed)
}
