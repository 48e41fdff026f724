//! Sequence-to-sequence event prediction: bidirectional multi-layer
//! LSTM/GRU encoder-decoder models with optional additive attention, their
//! training loop, corpus tooling, and BLEU / paraphrase-set evaluation.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod recurrent;
pub mod seq2seq;

pub use error::{Error, Result};
