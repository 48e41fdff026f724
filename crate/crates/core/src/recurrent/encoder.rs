use rand::Rng;

use super::cell::{CellKind, CellParams};
use super::layer::{layer_backward, run_layer_cached, Direction, LayerTrace};
use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::numerics::{apply_mask, DropoutSource, ParamId, ParameterSet, TensorList};

/// Per-position encoder outputs of the top layer plus each layer's summary
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    /// One vector per source position, `[fwd ‖ bwd]` when bidirectional.
    pub states: Vec<Vec<f64>>,
    /// Per layer: `[fwd at last position ‖ bwd at first position]`, or just
    /// the forward final state for a unidirectional encoder.
    pub layer_summaries: Vec<Vec<f64>>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Summary of the top layer.
    pub fn summary(&self) -> &[f64] {
        self.layer_summaries.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderLayer {
    pub forward: CellParams,
    pub backward: Option<CellParams>,
}

/// Stacked (bi)directional encoder. Layer 1 reads embeddings; deeper layers
/// read the full concatenated output of the layer below.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderParams {
    pub layers: Vec<EncoderLayer>,
    pub hidden: usize,
    pub bidirectional: bool,
}

/// Forward-pass record for backpropagation.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    ids: Vec<TokenId>,
    /// `[layer][position]` input dropout masks.
    masks: Vec<Vec<Option<Vec<f64>>>>,
    traces: Vec<(LayerTrace, Option<LayerTrace>)>,
}

impl EncoderParams {
    #[allow(clippy::too_many_arguments)]
    pub fn register<R: Rng>(
        params: &mut ParameterSet,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden: usize,
        num_layers: usize,
        bidirectional: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if num_layers == 0 {
            return Err(Error::invalid("encoder needs at least one layer"));
        }
        let width = if bidirectional { 2 * hidden } else { hidden };
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let in_dim = if l == 0 { input_dim } else { width };
            let forward = CellParams::register(params, &format!("{prefix}.l{l}.fwd"), kind, in_dim, hidden, rng)?;
            let backward = if bidirectional {
                Some(CellParams::register(
                    params,
                    &format!("{prefix}.l{l}.bwd"),
                    kind,
                    in_dim,
                    hidden,
                    rng,
                )?)
            } else {
                None
            };
            layers.push(EncoderLayer { forward, backward });
        }
        Ok(Self {
            layers,
            hidden,
            bidirectional,
        })
    }

    /// Width of each encoder state and of each layer summary.
    pub fn output_width(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden
        } else {
            self.hidden
        }
    }

    pub fn forward(
        &self,
        values: &TensorList,
        embedding: ParamId,
        ids: &[TokenId],
        dropout: &mut DropoutSource,
    ) -> Result<(EncoderStates, EncoderTrace)> {
        if ids.is_empty() {
            return Err(Error::invalid("cannot encode an empty source sequence"));
        }
        let table = &values[embedding];
        let (rows, dim) = (table.shape()[0], table.shape()[1]);
        if let Some(bad) = ids.iter().find(|&&id| id >= rows) {
            return Err(Error::invalid(format!("token id {bad} outside vocabulary of {rows}")));
        }
        let mut inputs: Vec<Vec<f64>> = ids
            .iter()
            .map(|&id| table.data()[id * dim..(id + 1) * dim].to_vec())
            .collect();
        let first = &self.layers[0].forward;
        if first.input_dim != dim {
            return Err(Error::Shape(format!(
                "embedding width {dim} does not match encoder input {}",
                first.input_dim
            )));
        }

        let m = ids.len();
        let hs = self.hidden;
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut summaries = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let layer_masks: Vec<Option<Vec<f64>>> = inputs.iter_mut().map(|x| dropout.apply(x)).collect();
            let fwd_cell = layer.forward.bind(values);
            let (fwd_out, fwd_trace) = run_layer_cached(&fwd_cell, &inputs, Direction::Forward);
            let (outputs, summary, bwd_trace) = match &layer.backward {
                Some(bwd) => {
                    let bwd_cell = bwd.bind(values);
                    let (bwd_out, bwd_trace) = run_layer_cached(&bwd_cell, &inputs, Direction::Backward);
                    let mut summary = fwd_out[m - 1].clone();
                    summary.extend_from_slice(&bwd_out[0]);
                    let outputs = fwd_out
                        .into_iter()
                        .zip(bwd_out)
                        .map(|(mut f, b)| {
                            f.extend_from_slice(&b);
                            f
                        })
                        .collect::<Vec<_>>();
                    (outputs, summary, Some(bwd_trace))
                }
                None => {
                    let summary = fwd_out[m - 1].clone();
                    (fwd_out, summary, None)
                }
            };
            debug_assert!(outputs.iter().all(|o| o.len() == self.output_width()));
            debug_assert_eq!(summary.len(), if self.bidirectional { 2 * hs } else { hs });
            masks.push(layer_masks);
            traces.push((fwd_trace, bwd_trace));
            summaries.push(summary);
            inputs = outputs;
        }
        Ok((
            EncoderStates {
                states: inputs,
                layer_summaries: summaries,
            },
            EncoderTrace {
                ids: ids.to_vec(),
                masks,
                traces,
            },
        ))
    }

    /// Backpropagates gradients on the top-layer states and on each layer's
    /// summary down to the embedding table.
    pub fn backward(
        &self,
        values: &TensorList,
        grads: &mut TensorList,
        embedding: ParamId,
        trace: &EncoderTrace,
        d_states: &[Vec<f64>],
        d_summaries: &[Vec<f64>],
    ) {
        let m = trace.ids.len();
        let hs = self.hidden;
        let width = self.output_width();
        let mut d_out: Vec<Vec<f64>> = if d_states.is_empty() {
            vec![vec![0.0; width]; m]
        } else {
            d_states.to_vec()
        };
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (fwd_trace, bwd_trace) = &trace.traces[l];
            let mut d_fwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[..hs].to_vec()).collect();
            if let Some(ds) = d_summaries.get(l) {
                for (a, b) in d_fwd[m - 1].iter_mut().zip(&ds[..hs]) {
                    *a += b;
                }
            }
            let mut d_in = layer_backward(&layer.forward.bind(values), grads, fwd_trace, &d_fwd);
            if let (Some(bwd), Some(bwd_trace)) = (&layer.backward, bwd_trace) {
                let mut d_bwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[hs..].to_vec()).collect();
                if let Some(ds) = d_summaries.get(l) {
                    for (a, b) in d_bwd[0].iter_mut().zip(&ds[hs..]) {
                        *a += b;
                    }
                }
                let d_in_bwd = layer_backward(&bwd.bind(values), grads, bwd_trace, &d_bwd);
                for (a, b) in d_in.iter_mut().zip(&d_in_bwd) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                }
            }
            for (d, mask) in d_in.iter_mut().zip(&trace.masks[l]) {
                apply_mask(d, mask.as_ref());
            }
            d_out = d_in;
        }
        let dim = values[embedding].shape()[1];
        let table = grads[embedding].data_mut();
        for (&id, d) in trace.ids.iter().zip(&d_out) {
            for (g, v) in table[id * dim..(id + 1) * dim].iter_mut().zip(d) {
                *g += v;
            }
        }
    }
}

/// Inference-mode encoding of `ids` (no dropout).
pub fn encode_bidirectional(
    ids: &[TokenId],
    encoder: &EncoderParams,
    values: &TensorList,
    embedding: ParamId,
) -> Result<EncoderStates> {
    Ok(encoder
        .forward(values, embedding, ids, &mut DropoutSource::inactive())?
        .0)
}
