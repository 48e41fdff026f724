use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParameterSet;
use crate::error::{Error, Result};

/// Magnitude below which gradients are compared absolutely rather than
/// relatively.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Which coordinates of each tensor to probe.
#[derive(Debug, Clone, Copy)]
pub struct Sampling {
    pub max_per_tensor: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            max_per_tensor: usize::MAX,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares the analytic gradients already stored in `params` against
/// central differences `(L(θ+h) - L(θ-h)) / 2h` of `loss`. The relative
/// error per coordinate is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
/// Parameter values are restored before returning.
pub fn gradient_check<F>(params: &mut ParameterSet, h: f64, sampling: Sampling, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterSet) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step {h} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let len = params.value(id).len();
        let coords: Vec<usize> = if len <= sampling.max_per_tensor {
            (0..len).collect()
        } else {
            let mut picked = rand::seq::index::sample(&mut rng, len, sampling.max_per_tensor).into_vec();
            picked.sort_unstable();
            picked
        };
        for k in coords {
            let original = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = original + h;
            let plus = loss(params);
            params.value_mut(id).data_mut()[k] = original - h;
            let minus = loss(params);
            params.value_mut(id).data_mut()[k] = original;
            let (plus, minus) = (plus?, minus?);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "non-finite loss while probing {}[{k}]",
                    params.name(id)
                )));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = params.grad(id).data()[k];
            let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst = Some((params.name(id).to_owned(), k));
            }
        }
    }
    Ok(report)
}
