use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Inverted-dropout multipliers: each entry is 0 with probability `p`,
/// otherwise `1 / (1 - p)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    if p == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Inverted dropout. Identity in `Mode::Infer` and whenever `p == 0`.
pub fn dropout(x: &Tensor, p: f64, mode: Mode, seed: u64) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout probability {p} not in [0, 1)")));
    }
    if mode == Mode::Infer || p == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = dropout_mask(x.len(), p, &mut rng);
    let mut out = x.clone();
    for (v, m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok(out)
}

/// Mask generator for a model pass. Inactive sources never drop anything.
#[derive(Debug, Clone)]
pub struct DropoutSource {
    p: f64,
    rng: Option<ChaCha8Rng>,
}

impl DropoutSource {
    pub fn inactive() -> Self {
        Self { p: 0.0, rng: None }
    }

    /// Training-mode masks drawn from a keyed stream: `seed` selects the
    /// key, `stream` the counter block (for example the optimizer step).
    pub fn train(p: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout probability {p} not in [0, 1)")));
        }
        if p == 0.0 {
            return Ok(Self::inactive());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self { p, rng: Some(rng) })
    }

    pub fn is_active(&self) -> bool {
        self.rng.is_some()
    }

    /// Applies dropout in place and returns the multipliers used, or `None`
    /// when inactive.
    pub fn apply(&mut self, x: &mut [f64]) -> Option<Vec<f64>> {
        let rng = self.rng.as_mut()?;
        let mask = dropout_mask(x.len(), self.p, rng);
        for (v, m) in x.iter_mut().zip(&mask) {
            *v *= m;
        }
        Some(mask)
    }
}

/// Multiplies a gradient by a stored mask, if any.
pub fn apply_mask(grad: &mut [f64], mask: Option<&Vec<f64>>) {
    if let Some(mask) = mask {
        for (g, m) in grad.iter_mut().zip(mask) {
            *g *= m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Tensor {
        Tensor::vector((0..n).map(|i| 1.0 + (i % 7) as f64).collect())
    }

    #[test]
    fn zero_probability_is_identity() {
        let x = ramp(50);
        assert_eq!(dropout(&x, 0.0, Mode::Train, 3).unwrap(), x);
        assert_eq!(dropout(&x, 0.0, Mode::Infer, 3).unwrap(), x);
    }

    #[test]
    fn inference_is_identity() {
        let x = ramp(50);
        assert_eq!(dropout(&x, 0.9, Mode::Infer, 1).unwrap(), x);
    }

    #[test]
    fn invalid_probability() {
        assert!(dropout(&ramp(3), 1.0, Mode::Train, 0).is_err());
        assert!(dropout(&ramp(3), -0.1, Mode::Train, 0).is_err());
    }

    #[test]
    fn half_dropout_statistics() {
        let n = 200_000;
        let x = ramp(n);
        let y = dropout(&x, 0.5, Mode::Train, 42).unwrap();
        let zeros = y.data().iter().filter(|v| **v == 0.0).count() as f64 / n as f64;
        assert!((zeros - 0.5).abs() < 0.02, "zero fraction {zeros}");
        let mean_x: f64 = x.data().iter().sum::<f64>() / n as f64;
        let mean_y: f64 = y.data().iter().sum::<f64>() / n as f64;
        assert!(((mean_y - mean_x) / mean_x).abs() < 0.05);
        assert_eq!(y, dropout(&x, 0.5, Mode::Train, 42).unwrap());
    }
}
