//! LSTM and GRU cells, directional layers, and the stacked bidirectional
//! encoder.

mod cell;
mod encoder;
mod layer;

pub use cell::{gru_step, lstm_step, Cell, CellKind, CellParams, CellState, StepCache, StepGrads};
pub use encoder::{encode_bidirectional, EncoderLayer, EncoderParams, EncoderStates, EncoderTrace};
pub use layer::{run_layer, Direction};

pub(crate) use cell::glorot;
