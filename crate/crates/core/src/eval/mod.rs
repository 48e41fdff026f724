//! Evaluation metrics: corpus BLEU, length-bucketed BLEU and gold
//! paraphrase-set accuracy.

mod bleu;
mod buckets;
mod paraphrase;
mod report;

pub use bleu::{bleu_corpus, bleu_corpus_n, sentence_bleu_smoothed, BleuReport, BleuStats, MAX_NGRAM};
pub use buckets::{bleu_by_length_bucket, BucketReport, LengthBucket};
pub use paraphrase::{
    paraphrase_accuracy, select_gold_subset, AccuracyReport, NearMiss, ParaphraseInventory, ParaphraseSet,
};
pub use report::MetricsReport;
