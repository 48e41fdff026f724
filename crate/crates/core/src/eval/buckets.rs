use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use super::bleu::{BleuReport, BleuStats, MAX_NGRAM};
use crate::error::{Error, Result};

/// Disjoint source-length intervals: 1 to 5, 6 to 10, 11 and above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LengthBucket {
    UpTo5,
    From6To10,
    Over10,
}

impl LengthBucket {
    pub const ALL: [LengthBucket; 3] = [LengthBucket::UpTo5, LengthBucket::From6To10, LengthBucket::Over10];

    pub fn for_length(source_len: usize) -> Self {
        match source_len {
            0..=5 => LengthBucket::UpTo5,
            6..=10 => LengthBucket::From6To10,
            _ => LengthBucket::Over10,
        }
    }

    /// Short key used in metric reports.
    pub fn key(self) -> &'static str {
        match self {
            LengthBucket::UpTo5 => "le5",
            LengthBucket::From6To10 => "6to10",
            LengthBucket::Over10 => "gt10",
        }
    }
}

impl fmt::Display for LengthBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketReport {
    pub pairs: usize,
    pub report: BleuReport,
}

/// Corpus BLEU per source-length bucket. Empty buckets are absent.
pub fn bleu_by_length_bucket<T: Eq + Hash>(
    sources: &[Vec<T>],
    candidates: &[Vec<T>],
    references: &[Vec<T>],
) -> Result<BTreeMap<LengthBucket, BucketReport>> {
    if sources.len() != candidates.len() || candidates.len() != references.len() {
        return Err(Error::invalid(format!(
            "misaligned inputs: {} sources, {} candidates, {} references",
            sources.len(),
            candidates.len(),
            references.len()
        )));
    }
    let mut tallies: BTreeMap<LengthBucket, (usize, BleuStats)> = BTreeMap::new();
    for ((s, c), r) in sources.iter().zip(candidates).zip(references) {
        let entry = tallies
            .entry(LengthBucket::for_length(s.len()))
            .or_insert_with(|| (0, BleuStats::new(MAX_NGRAM)));
        entry.0 += 1;
        entry.1.add(c, r);
    }
    Ok(tallies
        .into_iter()
        .map(|(b, (pairs, stats))| {
            (
                b,
                BucketReport {
                    pairs,
                    report: stats.report(),
                },
            )
        })
        .collect())
}
