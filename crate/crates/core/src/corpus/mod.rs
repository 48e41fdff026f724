//! Pair corpora, vocabularies, dataset splits and pretrained embeddings.

mod embedding;
mod pairs;
mod split;
mod vocab;

pub use embedding::{load_embeddings, read_embeddings, EmbeddingMatrix, EMBEDDING_INIT_RANGE};
pub use pairs::{tokenize, PairCorpus, SentencePair};
pub use split::{split_descript, split_descript_items, split_random, split_random_items, Fractions};
pub use vocab::{TokenId, Vocabulary, BOS, EOS, PAD, SPECIALS, UNK};
