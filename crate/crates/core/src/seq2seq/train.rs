use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Seq2SeqModel;
use crate::corpus::{TokenId, Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::eval::bleu_corpus;
use crate::numerics::{adam_step, AdamConfig, AdamState, DropoutSource, TensorList};

/// Padded mini-batch. Rows are right-padded with `PAD`; the stored lengths
/// mark the real tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    sources: Vec<Vec<TokenId>>,
    targets: Vec<Vec<TokenId>>,
    source_lens: Vec<usize>,
    target_lens: Vec<usize>,
}

impl Batch {
    /// Packs `(source, target)` id sequences. Targets exclude EOS; it is
    /// appended during training.
    pub fn pack<S: AsRef<[TokenId]>, T: AsRef<[TokenId]>>(pairs: &[(S, T)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let max_src = pairs.iter().map(|p| p.0.as_ref().len()).max().unwrap_or(0);
        let max_tgt = pairs.iter().map(|p| p.1.as_ref().len()).max().unwrap_or(0);
        let mut batch = Batch {
            sources: Vec::with_capacity(pairs.len()),
            targets: Vec::with_capacity(pairs.len()),
            source_lens: Vec::with_capacity(pairs.len()),
            target_lens: Vec::with_capacity(pairs.len()),
        };
        for (s, t) in pairs {
            let (s, t) = (s.as_ref(), t.as_ref());
            if s.is_empty() || t.is_empty() {
                return Err(Error::invalid("batch pairs must have non-empty sides"));
            }
            let mut src = s.to_vec();
            src.resize(max_src, PAD);
            let mut tgt = t.to_vec();
            tgt.resize(max_tgt, PAD);
            batch.sources.push(src);
            batch.targets.push(tgt);
            batch.source_lens.push(s.len());
            batch.target_lens.push(t.len());
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Unpadded row `i`.
    pub fn example(&self, i: usize) -> (&[TokenId], &[TokenId]) {
        (
            &self.sources[i][..self.source_lens[i]],
            &self.targets[i][..self.target_lens[i]],
        )
    }

    pub fn padded_source(&self, i: usize) -> &[TokenId] {
        &self.sources[i]
    }
}

/// Per-batch knobs that are not part of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Seed for dropout masks.
    pub seed: u64,
    /// Global L2 gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

/// One optimizer step on `batch` with teacher forcing. The batch loss is
/// the mean over pairs of each pair's mean per-position loss (EOS included).
/// Returns the loss before the update.
pub fn train_batch(model: &mut Seq2SeqModel, batch: &Batch, adam: &mut AdamState, options: StepOptions) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let p = model.config().dropout;
    let mut dropout = DropoutSource::train(p, options.seed, adam.step)?;
    model.params_mut().zero_grads();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for i in 0..batch.len() {
        let (src, tgt) = batch.example(i);
        total += model.accumulate_gradients(src, tgt, scale, &mut dropout)? * scale;
    }
    if !total.is_finite() {
        return Err(Error::TrainingDiverged(format!("loss became {total}")));
    }
    if let Some(max_norm) = options.clip_norm {
        model.params_mut().clip_grad_norm(max_norm);
    }
    adam_step(model.params_mut(), adam)?;
    Ok(total)
}

/// Training schedule. Defaults: batch 64, up to 100 epochs, lr 0.001.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub clip_norm: Option<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            lr: 0.001,
            seed: 1,
            clip_norm: None,
        }
    }
}

/// Encoded training pair; the target excludes EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainExample {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// Development pair: encoded source plus the reference as surface tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DevExample {
    pub source: Vec<TokenId>,
    pub reference: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_bleu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub best_dev_bleu: f64,
    pub history: Vec<EpochRecord>,
}

/// Progress notifications. `NewBest` fires while the model still holds the
/// improved parameters, so a checkpoint can be written from it.
pub enum TrainEvent<'a> {
    Epoch(&'a EpochRecord),
    NewBest(&'a Seq2SeqModel, &'a EpochRecord),
}

/// Greedy-decodes every dev source and returns the surface tokens.
pub fn decode_all(model: &Seq2SeqModel, vocab: &Vocabulary, sources: &[Vec<TokenId>]) -> Result<Vec<Vec<String>>> {
    sources
        .iter()
        .map(|s| Ok(vocab.decode(&model.greedy_decode(s)?)))
        .collect()
}

pub fn dev_bleu(model: &Seq2SeqModel, vocab: &Vocabulary, dev: &[DevExample]) -> Result<f64> {
    let sources: Vec<Vec<TokenId>> = dev.iter().map(|d| d.source.clone()).collect();
    let candidates = decode_all(model, vocab, &sources)?;
    let references: Vec<Vec<String>> = dev.iter().map(|d| d.reference.clone()).collect();
    Ok(bleu_corpus(&candidates, &references)?.bleu)
}

/// Trains for `schedule.epochs` epochs, scoring dev BLEU after each one and
/// keeping the parameters of the best epoch (earliest on ties). The model
/// holds the best parameters on return.
pub fn train_loop<F>(
    model: &mut Seq2SeqModel,
    train: &[TrainExample],
    dev: &[DevExample],
    vocab: &Vocabulary,
    schedule: Schedule,
    mut on_event: F,
) -> Result<TrainOutcome>
where
    F: FnMut(TrainEvent<'_>) -> Result<()>,
{
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if schedule.batch_size == 0 || schedule.epochs == 0 {
        return Err(Error::invalid("batch size and epoch count must be positive"));
    }
    let mut adam = AdamState::new(model.params(), AdamConfig::with_lr(schedule.lr));
    let options = StepOptions {
        seed: schedule.seed,
        clip_norm: schedule.clip_norm,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(schedule.epochs);
    let mut best: Option<(EpochRecord, TensorList)> = None;

    for epoch in 1..=schedule.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(schedule.batch_size) {
            let pairs: Vec<(&[TokenId], &[TokenId])> = chunk
                .iter()
                .map(|&i| (train[i].source.as_slice(), train[i].target.as_slice()))
                .collect();
            let batch = Batch::pack(&pairs)?;
            loss_sum += train_batch(model, &batch, &mut adam, options)?;
            batches += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            dev_bleu: dev_bleu(model, vocab, dev)?,
        };
        history.push(record);
        on_event(TrainEvent::Epoch(&record))?;
        let improved = best.as_ref().is_none_or(|(b, _)| record.dev_bleu > b.dev_bleu);
        if improved {
            best = Some((record, model.params().values().clone()));
            on_event(TrainEvent::NewBest(model, &record))?;
        }
    }

    let (best_record, values) = best.expect("at least one epoch ran");
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        model.params_mut().set_value(id, values[id].clone())?;
    }
    Ok(TrainOutcome {
        best_epoch: best_record.epoch,
        best_dev_bleu: best_record.dev_bleu,
        history,
    })
}

/// Epoch picked by dev-BLEU model selection: the first maximum.
pub fn select_best_epoch(dev_bleu: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &b) in dev_bleu.iter().enumerate() {
        if best.is_none_or(|(_, v)| b > v) {
            best = Some((i + 1, b));
        }
    }
    best.map(|(e, _)| e)
}
