use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, Seq2SeqModel};
use crate::corpus::{TokenId, SPECIALS};
use crate::error::{Error, Result};
use crate::numerics::{gradient_check, DropoutSource, GradCheckReport, Sampling};
use crate::recurrent::CellKind;

/// Largest relative error accepted by the end-to-end gradient check.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// One architecture in the {LSTM, GRU} × {1, 2 layers} × {attention, none} grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub cell: CellKind,
    pub layers: usize,
    pub attention: bool,
}

impl Variant {
    pub fn all() -> Vec<Variant> {
        let mut out = Vec::with_capacity(8);
        for cell in [CellKind::Lstm, CellKind::Gru] {
            for layers in [1, 2] {
                for attention in [false, true] {
                    out.push(Variant {
                        cell,
                        layers,
                        attention,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let att = if self.attention { "att" } else { "noatt" };
        write!(f, "{}-l{}-{att}", self.cell, self.layers)
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Parses labels such as `lstm-l2-att` or `gru-l1-noatt`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("bad variant {s:?}; expected e.g. lstm-l2-att"));
        let parts: Vec<&str> = s.split('-').collect();
        let [cell, layers, att] = parts.as_slice() else {
            return Err(bad());
        };
        let cell: CellKind = cell.parse().map_err(|_| bad())?;
        let layers = match *layers {
            "l1" => 1,
            "l2" => 2,
            _ => return Err(bad()),
        };
        let attention = match *att {
            "att" => true,
            "noatt" => false,
            _ => return Err(bad()),
        };
        Ok(Variant {
            cell,
            layers,
            attention,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub hidden: usize,
    pub embed_dim: usize,
    pub vocab_size: usize,
    /// Upper bound on source and target lengths.
    pub max_len: usize,
    pub batch: usize,
    pub bidirectional: bool,
    /// Dropout rate with a mask held fixed across all loss evaluations.
    pub dropout: f64,
    pub seed: u64,
    pub step: f64,
    /// Perturbs one analytic gradient coordinate; exercises the failure path.
    pub corrupt: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            hidden: 8,
            embed_dim: 8,
            vocab_size: 20,
            max_len: 5,
            batch: 2,
            bidirectional: true,
            dropout: 0.0,
            seed: 7,
            step: 1e-5,
            corrupt: false,
        }
    }
}

fn random_ids(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> Vec<TokenId> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| rng.gen_range(SPECIALS.len()..vocab)).collect()
}

/// Compares back-propagated gradients of the mean batch loss with central
/// differences over every parameter of a small random model.
pub fn model_gradient_check(variant: Variant, options: CheckOptions) -> Result<GradCheckReport> {
    let config = ModelConfig {
        cell: variant.cell,
        layers: variant.layers,
        attention: variant.attention,
        bidirectional: options.bidirectional,
        hidden: options.hidden,
        embed_dim: options.embed_dim,
        vocab_size: options.vocab_size,
        dropout: options.dropout,
        max_decode_len: options.max_len,
    };
    let mut model = Seq2SeqModel::new(config, options.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x9e37_79b9);
    // Non-zero biases so that every bias gradient path is exercised.
    let ids: Vec<_> = model.params().ids().collect();
    for &id in &ids {
        if model.params().name(id).ends_with(".b") {
            for x in model.params_mut().value_mut(id).data_mut() {
                *x += rng.gen_range(-0.1..0.1);
            }
        }
    }
    let pairs: Vec<(Vec<TokenId>, Vec<TokenId>)> = (0..options.batch)
        .map(|_| {
            let s = random_ids(&mut rng, options.vocab_size, options.max_len);
            let t = random_ids(&mut rng, options.vocab_size, options.max_len);
            (s, t)
        })
        .collect();
    let mask_source = || -> Result<DropoutSource> {
        if options.dropout > 0.0 {
            DropoutSource::train(options.dropout, options.seed, 0)
        } else {
            Ok(DropoutSource::inactive())
        }
    };
    let scale = 1.0 / pairs.len() as f64;

    model.params_mut().zero_grads();
    let mut dropout = mask_source()?;
    for (s, t) in &pairs {
        model.accumulate_gradients(s, t, scale, &mut dropout)?;
    }
    if options.corrupt {
        let out_w = model.architecture().out_w;
        model.params_mut().grad_mut(out_w).data_mut()[0] += 1e-2;
    }
    let arch = model.architecture().clone();
    gradient_check(model.params_mut(), options.step, Sampling::default(), |ps| {
        let mut dropout = mask_source()?;
        let mut total = 0.0;
        for (s, t) in &pairs {
            total += arch.example_loss(ps.values(), s, t, &mut dropout)? * scale;
        }
        Ok(total)
    })
}
