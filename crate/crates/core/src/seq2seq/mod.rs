//! Encoder-decoder model, teacher-forced training, greedy decoding and
//! checkpoints.

mod check;
mod checkpoint;
mod config;
mod model;
mod train;

pub use check::{model_gradient_check, CheckOptions, Variant, GRADCHECK_TOLERANCE};
pub use checkpoint::{checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, Checkpoint, MAGIC};
pub use config::ModelConfig;
pub use model::{argmax, Architecture, AttentionParams, Bridge, DecoderStep, Seq2SeqModel};
pub use train::{
    decode_all, dev_bleu, select_best_epoch, train_batch, train_loop, Batch, DevExample, EpochRecord, Schedule,
    StepOptions, TrainEvent, TrainExample, TrainOutcome,
};

pub(crate) use config::{on_off, parse_field, parse_on_off};

#[cfg(test)]
mod tests;
