use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub const MAX_NGRAM: usize = 4;

/// Corpus BLEU breakdown. `bleu` is in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    pub bleu: f64,
    /// Modified n-gram precisions p_1..p_N.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

/// Additive n-gram tallies. Shards can be tallied separately and merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    max_n: usize,
    matches: Vec<u64>,
    totals: Vec<u64>,
    candidate_len: usize,
    reference_len: usize,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn new(max_n: usize) -> Self {
        Self {
            max_n,
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            candidate_len: 0,
            reference_len: 0,
        }
    }

    pub fn add<T: Eq + Hash>(&mut self, candidate: &[T], reference: &[T]) {
        self.candidate_len += candidate.len();
        self.reference_len += reference.len();
        for n in 1..=self.max_n {
            let cand = ngram_counts(candidate, n);
            let refc = ngram_counts(reference, n);
            let clipped: u64 = cand
                .iter()
                .map(|(g, c)| (*c).min(refc.get(g).copied().unwrap_or(0)))
                .sum();
            self.matches[n - 1] += clipped;
            self.totals[n - 1] += (candidate.len() + 1).saturating_sub(n) as u64;
        }
    }

    pub fn merge(&mut self, other: &BleuStats) {
        assert_eq!(self.max_n, other.max_n, "cannot merge tallies of different orders");
        for n in 0..self.max_n {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// `BP · exp(mean ln p_n)`, or 0 when any precision is 0.
    pub fn report(&self) -> BleuReport {
        let precisions: Vec<f64> = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
            .collect();
        let (c, r) = (self.candidate_len, self.reference_len);
        let brevity_penalty = if c > r {
            1.0
        } else if c == 0 {
            0.0
        } else {
            (1.0 - r as f64 / c as f64).exp()
        };
        let bleu = if precisions.iter().all(|&p| p > 0.0) {
            let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / self.max_n as f64;
            brevity_penalty * mean_log.exp()
        } else {
            0.0
        };
        BleuReport {
            bleu,
            precisions,
            brevity_penalty,
            candidate_len: c,
            reference_len: r,
        }
    }
}

/// Corpus-level BLEU with n-grams up to `max_n` and uniform weights; one
/// reference per candidate.
pub fn bleu_corpus_n<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<T>], max_n: usize) -> Result<BleuReport> {
    if candidates.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::invalid("BLEU order must be positive"));
    }
    let mut stats = BleuStats::new(max_n);
    for (c, r) in candidates.iter().zip(references) {
        stats.add(c, r);
    }
    Ok(stats.report())
}

/// Corpus BLEU-4.
pub fn bleu_corpus<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<T>]) -> Result<BleuReport> {
    bleu_corpus_n(candidates, references, MAX_NGRAM)
}

/// Sentence BLEU-4 with add-one smoothing on the n > 1 precisions. For
/// diagnostics only; the headline metric is unsmoothed corpus BLEU.
pub fn sentence_bleu_smoothed<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    let mut stats = BleuStats::new(MAX_NGRAM);
    stats.add(candidate, reference);
    if stats.candidate_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_NGRAM {
        let (m, t) = (stats.matches[n] as f64, stats.totals[n] as f64);
        let p = if n == 0 { m / t } else { (m + 1.0) / (t + 1.0) };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    stats.report().brevity_penalty * (log_sum / MAX_NGRAM as f64).exp()
}
