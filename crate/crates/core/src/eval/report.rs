use std::collections::BTreeMap;
use std::fmt::Write;

use super::bleu::BleuReport;
use super::buckets::{BucketReport, LengthBucket};
use super::paraphrase::AccuracyReport;

/// Everything `evaluate` reports, rendered as `key=value` lines in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub pairs: usize,
    pub bleu: BleuReport,
    pub buckets: BTreeMap<LengthBucket, BucketReport>,
    pub accuracy: Option<AccuracyReport>,
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
        put("pairs", self.pairs.to_string());
        put("bleu", fmt_f(self.bleu.bleu));
        for (n, p) in self.bleu.precisions.iter().enumerate() {
            put(&format!("p{}", n + 1), fmt_f(*p));
        }
        put("brevity_penalty", fmt_f(self.bleu.brevity_penalty));
        put("candidate_len", self.bleu.candidate_len.to_string());
        put("reference_len", self.bleu.reference_len.to_string());
        for bucket in LengthBucket::ALL {
            if let Some(b) = self.buckets.get(&bucket) {
                put(&format!("bucket.{bucket}.pairs"), b.pairs.to_string());
                put(&format!("bucket.{bucket}.bleu"), fmt_f(b.report.bleu));
            }
        }
        if let Some(acc) = &self.accuracy {
            put("evaluated_pairs", acc.evaluated_pairs.to_string());
            put("correct", acc.correct.to_string());
            put("accuracy", fmt_f(acc.accuracy));
            put("near_misses", acc.near_misses.len().to_string());
        }
        out
    }
}

/// Shortest representation that parses back to the same f64.
fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{bleu_by_length_bucket, bleu_corpus};

    #[test]
    fn stable_keys() {
        let s: Vec<Vec<&str>> = vec![vec!["a", "b", "c", "d"], vec!["e"; 7]];
        let report = MetricsReport {
            pairs: 2,
            bleu: bleu_corpus(&s, &s).unwrap(),
            buckets: bleu_by_length_bucket(&s, &s, &s).unwrap(),
            accuracy: None,
        };
        let text = report.to_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(
            keys,
            [
                "pairs",
                "bleu",
                "p1",
                "p2",
                "p3",
                "p4",
                "brevity_penalty",
                "candidate_len",
                "reference_len",
                "bucket.le5.pairs",
                "bucket.le5.bleu",
                "bucket.6to10.pairs",
                "bucket.6to10.bleu"
            ]
        );
        assert!(text.contains("\nbleu=1.0\n"));
    }
}
