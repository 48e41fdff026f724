use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::kernels::{
    matvec_acc, matvec_cols_acc, matvec_t_acc, matvec_t_cols_acc, outer_acc, outer_cols_acc, sigmoid,
};
use crate::numerics::{ParamId, ParameterSet, Tensor, TensorList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    /// Number of gate blocks stacked in the weight matrices.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        })
    }
}

impl FromStr for CellKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::invalid(format!("unknown cell kind {other:?}"))),
        }
    }
}

/// Recurrent state. `c` is the LSTM memory cell and is `None` for GRU.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Option<Vec<f64>>,
}

impl CellState {
    pub fn zeros(kind: CellKind, hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: match kind {
                CellKind::Lstm => Some(vec![0.0; hidden]),
                CellKind::Gru => None,
            },
        }
    }
}

/// Handles to one cell's tensors inside a [`ParameterSet`].
///
/// Layout: `w_x` is `[input_dim, G*H]`, `w_h` is `[H, G*H]`, `b` is `[G*H]`,
/// with gate blocks ordered (i, f, g, o) for LSTM and (z, r, n) for GRU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellParams {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
}

impl CellParams {
    /// Registers Glorot-uniform weights and zero biases (LSTM forget-gate
    /// bias set to 1).
    pub fn register<R: Rng>(
        params: &mut ParameterSet,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::invalid("cell dimensions must be positive"));
        }
        let width = kind.gates() * hidden;
        let w_x = params.add(
            format!("{prefix}.w_x"),
            glorot(rng, input_dim, width, input_dim + hidden),
        )?;
        let w_h = params.add(format!("{prefix}.w_h"), glorot(rng, hidden, width, 2 * hidden))?;
        let mut bias = Tensor::zeros(&[width]);
        if kind == CellKind::Lstm {
            bias.data_mut()[hidden..2 * hidden].fill(1.0);
        }
        let b = params.add(format!("{prefix}.b"), bias)?;
        Ok(Self {
            kind,
            input_dim,
            hidden,
            w_x,
            w_h,
            b,
        })
    }

    pub fn bind<'a>(&self, values: &'a TensorList) -> Cell<'a> {
        Cell {
            params: *self,
            w_x: values[self.w_x].data(),
            w_h: values[self.w_h].data(),
            b: values[self.b].data(),
        }
    }
}

/// Uniform(-l, l) with `l = sqrt(6 / fan_sum)`.
pub(crate) fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_sum: usize) -> Tensor {
    let limit = (6.0 / fan_sum as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..=limit)).collect();
    Tensor::from_vec(vec![rows, cols], data).expect("shape matches data")
}

/// A cell's parameters borrowed from a value list.
#[derive(Debug, Clone, Copy)]
pub struct Cell<'a> {
    pub params: CellParams,
    w_x: &'a [f64],
    w_h: &'a [f64],
    b: &'a [f64],
}

/// Everything the backward pass of one step needs.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, `G*H` wide.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Gradients flowing out of one step.
#[derive(Debug, Clone)]
pub struct StepGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

impl<'a> Cell<'a> {
    pub fn kind(&self) -> CellKind {
        self.params.kind
    }

    pub fn hidden(&self) -> usize {
        self.params.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim
    }

    fn check_dims(&self, x: &[f64], state: &CellState) -> Result<()> {
        if x.len() != self.params.input_dim {
            return Err(Error::Shape(format!(
                "cell input has width {}, expected {}",
                x.len(),
                self.params.input_dim
            )));
        }
        if state.h.len() != self.params.hidden {
            return Err(Error::Shape(format!(
                "cell state has width {}, expected {}",
                state.h.len(),
                self.params.hidden
            )));
        }
        if let Some(c) = &state.c {
            if c.len() != self.params.hidden {
                return Err(Error::Shape("memory cell width mismatch".into()));
            }
        }
        Ok(())
    }

    /// One recurrence step.
    pub fn step(&self, x: &[f64], state: &CellState) -> Result<CellState> {
        self.check_dims(x, state)?;
        Ok(self.step_cached(x, state).0)
    }

    /// One step, also returning the cache for [`Cell::backward`]. Dimensions
    /// are assumed valid.
    pub fn step_cached(&self, x: &[f64], state: &CellState) -> (CellState, StepCache) {
        let hs = self.params.hidden;
        match self.params.kind {
            CellKind::Lstm => {
                let c_prev = state.c.clone().unwrap_or_else(|| vec![0.0; hs]);
                let mut a = self.b.to_vec();
                matvec_acc(x, self.w_x, &mut a);
                matvec_acc(&state.h, self.w_h, &mut a);
                for (k, v) in a.iter_mut().enumerate() {
                    *v = if (2 * hs..3 * hs).contains(&k) {
                        v.tanh()
                    } else {
                        sigmoid(*v)
                    };
                }
                let (i, rest) = a.split_at(hs);
                let (f, rest) = rest.split_at(hs);
                let (g, o) = rest.split_at(hs);
                let mut c = vec![0.0; hs];
                let mut tanh_c = vec![0.0; hs];
                let mut h = vec![0.0; hs];
                for k in 0..hs {
                    c[k] = f[k] * c_prev[k] + i[k] * g[k];
                    tanh_c[k] = c[k].tanh();
                    h[k] = o[k] * tanh_c[k];
                }
                let cache = StepCache {
                    x: x.to_vec(),
                    h_prev: state.h.clone(),
                    c_prev,
                    gates: a,
                    tanh_c,
                };
                (CellState { h, c: Some(c) }, cache)
            }
            CellKind::Gru => {
                let width = 3 * hs;
                let mut a = self.b.to_vec();
                matvec_acc(x, self.w_x, &mut a);
                matvec_cols_acc(&state.h, self.w_h, width, 0..2 * hs, &mut a[..2 * hs]);
                for v in &mut a[..2 * hs] {
                    *v = sigmoid(*v);
                }
                let rh: Vec<f64> = a[hs..2 * hs].iter().zip(&state.h).map(|(r, h)| r * h).collect();
                matvec_cols_acc(&rh, self.w_h, width, 2 * hs..width, &mut a[2 * hs..]);
                for v in &mut a[2 * hs..] {
                    *v = v.tanh();
                }
                let h: Vec<f64> = (0..hs)
                    .map(|k| {
                        let z = a[k];
                        (1.0 - z) * state.h[k] + z * a[2 * hs + k]
                    })
                    .collect();
                let cache = StepCache {
                    x: x.to_vec(),
                    h_prev: state.h.clone(),
                    c_prev: Vec::new(),
                    gates: a,
                    tanh_c: Vec::new(),
                };
                (CellState { h, c: None }, cache)
            }
        }
    }

    /// Backpropagates `dh` (and `dc` for LSTM) through one step,
    /// accumulating parameter gradients into `grads`.
    pub fn backward(&self, grads: &mut TensorList, cache: &StepCache, dh: &[f64], dc: &[f64]) -> StepGrads {
        let hs = self.params.hidden;
        let p = self.params;
        let mut dx = vec![0.0; p.input_dim];
        let mut dh_prev = vec![0.0; hs];
        match p.kind {
            CellKind::Lstm => {
                let g = &cache.gates;
                let mut da = vec![0.0; 4 * hs];
                let mut dc_prev = vec![0.0; hs];
                for k in 0..hs {
                    let (i, f, gg, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
                    let tc = cache.tanh_c[k];
                    let d_o = dh[k] * tc;
                    let dct = dc.get(k).copied().unwrap_or(0.0) + dh[k] * o * (1.0 - tc * tc);
                    let d_i = dct * gg;
                    let d_g = dct * i;
                    let d_f = dct * cache.c_prev[k];
                    dc_prev[k] = dct * f;
                    da[k] = d_i * i * (1.0 - i);
                    da[hs + k] = d_f * f * (1.0 - f);
                    da[2 * hs + k] = d_g * (1.0 - gg * gg);
                    da[3 * hs + k] = d_o * o * (1.0 - o);
                }
                outer_acc(&cache.x, &da, grads[p.w_x].data_mut());
                outer_acc(&cache.h_prev, &da, grads[p.w_h].data_mut());
                crate::numerics::kernels::add_acc(grads[p.b].data_mut(), &da);
                matvec_t_acc(self.w_x, &da, &mut dx);
                matvec_t_acc(self.w_h, &da, &mut dh_prev);
                StepGrads { dx, dh_prev, dc_prev }
            }
            CellKind::Gru => {
                let width = 3 * hs;
                let g = &cache.gates;
                let h = &cache.h_prev;
                let mut da = vec![0.0; width];
                for k in 0..hs {
                    let (z, n) = (g[k], g[2 * hs + k]);
                    let dz = dh[k] * (n - h[k]);
                    let dn = dh[k] * z;
                    dh_prev[k] = dh[k] * (1.0 - z);
                    da[k] = dz * z * (1.0 - z);
                    da[2 * hs + k] = dn * (1.0 - n * n);
                }
                // Candidate path: a_n = x Wx_n + (r*h) Wh_n + b_n.
                let rh: Vec<f64> = (0..hs).map(|k| g[hs + k] * h[k]).collect();
                let mut d_rh = vec![0.0; hs];
                matvec_t_cols_acc(self.w_h, width, 2 * hs..width, &da[2 * hs..], &mut d_rh);
                outer_cols_acc(&rh, &da[2 * hs..], width, 2 * hs..width, grads[p.w_h].data_mut());
                for k in 0..hs {
                    let r = g[hs + k];
                    dh_prev[k] += d_rh[k] * r;
                    da[hs + k] = d_rh[k] * h[k] * r * (1.0 - r);
                }
                outer_cols_acc(h, &da[..2 * hs], width, 0..2 * hs, grads[p.w_h].data_mut());
                matvec_t_cols_acc(self.w_h, width, 0..2 * hs, &da[..2 * hs], &mut dh_prev);
                outer_acc(&cache.x, &da, grads[p.w_x].data_mut());
                crate::numerics::kernels::add_acc(grads[p.b].data_mut(), &da);
                matvec_t_acc(self.w_x, &da, &mut dx);
                StepGrads {
                    dx,
                    dh_prev,
                    dc_prev: Vec::new(),
                }
            }
        }
    }
}

/// LSTM step: `i, f, o = σ(·)`, `g = tanh(·)`, `c' = f⊙c + i⊙g`,
/// `h' = o⊙tanh(c')`.
pub fn lstm_step(x: &[f64], state: &CellState, cell: &Cell<'_>) -> Result<CellState> {
    if cell.kind() != CellKind::Lstm {
        return Err(Error::Shape("lstm_step needs LSTM parameters".into()));
    }
    cell.step(x, state)
}

/// GRU step: `z, r = σ(·)`, `n = tanh(x Wn + (r⊙h) Un + bn)`,
/// `h' = (1-z)⊙h + z⊙n`.
pub fn gru_step(x: &[f64], state: &CellState, cell: &Cell<'_>) -> Result<CellState> {
    if cell.kind() != CellKind::Gru {
        return Err(Error::Shape("gru_step needs GRU parameters".into()));
    }
    cell.step(x, state)
}
