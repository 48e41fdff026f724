use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PairCorpus;
use crate::error::{Error, Result};

/// Block-of-ten positional split: within every consecutive block of ten
/// items the 5th goes to dev, the 10th to test, the other eight to train.
/// A trailing partial block follows the same positions.
pub fn split_descript_items<T: Clone>(items: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut train = Vec::with_capacity(items.len() * 8 / 10 + 8);
    let mut dev = Vec::with_capacity(items.len() / 10 + 1);
    let mut test = Vec::with_capacity(items.len() / 10 + 1);
    for (idx, item) in items.iter().enumerate() {
        match idx % 10 {
            4 => dev.push(item.clone()),
            9 => test.push(item.clone()),
            _ => train.push(item.clone()),
        }
    }
    (train, dev, test)
}

pub fn split_descript(corpus: &PairCorpus) -> (PairCorpus, PairCorpus, PairCorpus) {
    let (train, dev, test) = split_descript_items(&corpus.pairs);
    named_splits(corpus, train, dev, test)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Fractions {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let f = Self { train, dev, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::invalid(format!("split fractions out of range: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Item counts for `n` items: dev and test are rounded, train takes the rest.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let dev = ((n as f64) * self.dev).round() as usize;
        let dev = dev.min(n);
        let test = (((n as f64) * self.test).round() as usize).min(n - dev);
        (n - dev - test, dev, test)
    }
}

/// Seeded shuffle split. Each part keeps the original relative order.
pub fn split_random_items<T: Clone>(items: &[T], fractions: Fractions, seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    fractions.validate()?;
    let (n_train, n_dev, _) = fractions.counts(items.len());
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |range: &[usize]| {
        let mut idx = range.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| items[i].clone()).collect::<Vec<T>>()
    };
    Ok((
        pick(&order[..n_train]),
        pick(&order[n_train..n_train + n_dev]),
        pick(&order[n_train + n_dev..]),
    ))
}

pub fn split_random(
    corpus: &PairCorpus,
    fractions: Fractions,
    seed: u64,
) -> Result<(PairCorpus, PairCorpus, PairCorpus)> {
    let (train, dev, test) = split_random_items(&corpus.pairs, fractions, seed)?;
    Ok(named_splits(corpus, train, dev, test))
}

fn named_splits(
    corpus: &PairCorpus,
    train: Vec<super::SentencePair>,
    dev: Vec<super::SentencePair>,
    test: Vec<super::SentencePair>,
) -> (PairCorpus, PairCorpus, PairCorpus) {
    (
        PairCorpus::new(format!("{}.train", corpus.name), train),
        PairCorpus::new(format!("{}.dev", corpus.name), dev),
        PairCorpus::new(format!("{}.test", corpus.name), test),
    )
}
