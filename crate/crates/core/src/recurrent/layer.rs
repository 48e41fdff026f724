use super::cell::{Cell, CellState, StepCache};
use crate::error::{Error, Result};
use crate::numerics::TensorList;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    /// Source position handled at processing step `step` of `len`.
    fn position(self, step: usize, len: usize) -> usize {
        match self {
            Direction::Forward => step,
            Direction::Backward => len - 1 - step,
        }
    }
}

/// Step caches of one directional pass, in processing order.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    direction: Direction,
    caches: Vec<StepCache>,
}

/// Runs one cell over `inputs` from a zero state. Outputs are returned in
/// source order regardless of direction.
pub fn run_layer(cell: &Cell<'_>, inputs: &[Vec<f64>], direction: Direction) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Err(Error::invalid("recurrent layer needs a non-empty input sequence"));
    }
    if let Some(bad) = inputs.iter().find(|x| x.len() != cell.input_dim()) {
        return Err(Error::Shape(format!(
            "layer input has width {}, expected {}",
            bad.len(),
            cell.input_dim()
        )));
    }
    Ok(run_layer_cached(cell, inputs, direction).0)
}

pub(crate) fn run_layer_cached(
    cell: &Cell<'_>,
    inputs: &[Vec<f64>],
    direction: Direction,
) -> (Vec<Vec<f64>>, LayerTrace) {
    let len = inputs.len();
    let mut state = CellState::zeros(cell.kind(), cell.hidden());
    let mut outputs = vec![Vec::new(); len];
    let mut caches = Vec::with_capacity(len);
    for step in 0..len {
        let pos = direction.position(step, len);
        let (next, cache) = cell.step_cached(&inputs[pos], &state);
        outputs[pos] = next.h.clone();
        caches.push(cache);
        state = next;
    }
    (outputs, LayerTrace { direction, caches })
}

/// BPTT through one directional pass. `d_outputs` holds the gradient
/// arriving at each output (source order); returns the input gradients in
/// source order.
pub(crate) fn layer_backward(
    cell: &Cell<'_>,
    grads: &mut TensorList,
    trace: &LayerTrace,
    d_outputs: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let len = trace.caches.len();
    let hs = cell.hidden();
    let mut d_inputs = vec![Vec::new(); len];
    let mut dh_carry = vec![0.0; hs];
    let mut dc_carry = vec![0.0; hs];
    for step in (0..len).rev() {
        let pos = trace.direction.position(step, len);
        let dh: Vec<f64> = d_outputs[pos].iter().zip(&dh_carry).map(|(a, b)| a + b).collect();
        let g = cell.backward(grads, &trace.caches[step], &dh, &dc_carry);
        d_inputs[pos] = g.dx;
        dh_carry = g.dh_prev;
        dc_carry = if g.dc_prev.is_empty() { vec![0.0; hs] } else { g.dc_prev };
    }
    d_inputs
}
