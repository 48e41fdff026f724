//! Vector kernels shared by the recurrent cells and the decoder. Weight
//! matrices are stored `[in, out]` row-major so `y = x W + b`.

use super::Tensor;
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y += x W` for `W` of shape `[x.len(), y.len()]`.
#[inline]
pub fn matvec_acc(x: &[f64], w: &[f64], y: &mut [f64]) {
    let out = y.len();
    debug_assert_eq!(w.len(), x.len() * out);
    for (xi, row) in x.iter().zip(w.chunks_exact(out)) {
        if *xi == 0.0 {
            continue;
        }
        for (yj, wij) in y.iter_mut().zip(row) {
            *yj += xi * wij;
        }
    }
}

/// `y += x W[:, cols]` where `W` has `stride` columns and only the
/// `cols` range is used.
#[inline]
pub fn matvec_cols_acc(x: &[f64], w: &[f64], stride: usize, cols: std::ops::Range<usize>, y: &mut [f64]) {
    debug_assert_eq!(cols.len(), y.len());
    for (xi, row) in x.iter().zip(w.chunks_exact(stride)) {
        if *xi == 0.0 {
            continue;
        }
        for (yj, wij) in y.iter_mut().zip(&row[cols.clone()]) {
            *yj += xi * wij;
        }
    }
}

/// `dx += W dy` (the transpose product).
#[inline]
pub fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let out = dy.len();
    for (dxi, row) in dx.iter_mut().zip(w.chunks_exact(out)) {
        *dxi += row.iter().zip(dy).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W[:, cols] dy`.
#[inline]
pub fn matvec_t_cols_acc(w: &[f64], stride: usize, cols: std::ops::Range<usize>, dy: &[f64], dx: &mut [f64]) {
    for (dxi, row) in dx.iter_mut().zip(w.chunks_exact(stride)) {
        *dxi += row[cols.clone()].iter().zip(dy).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dW += x ⊗ dy`.
#[inline]
pub fn outer_acc(x: &[f64], dy: &[f64], dw: &mut [f64]) {
    let out = dy.len();
    for (xi, row) in x.iter().zip(dw.chunks_exact_mut(out)) {
        if *xi == 0.0 {
            continue;
        }
        for (dwij, dyj) in row.iter_mut().zip(dy) {
            *dwij += xi * dyj;
        }
    }
}

/// `dW[:, cols] += x ⊗ dy`.
#[inline]
pub fn outer_cols_acc(x: &[f64], dy: &[f64], stride: usize, cols: std::ops::Range<usize>, dw: &mut [f64]) {
    for (xi, row) in x.iter().zip(dw.chunks_exact_mut(stride)) {
        if *xi == 0.0 {
            continue;
        }
        for (dwij, dyj) in row[cols.clone()].iter_mut().zip(dy) {
            *dwij += xi * dyj;
        }
    }
}

#[inline]
pub fn add_acc(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Affine map `y = x W + b`. `x` is a vector `[in]` or a row batch
/// `[rows, in]`; `W` is `[in, out]`, `b` is `[out]`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (rows, inner) = match x.shape() {
        [n] => (None, *n),
        [r, n] => (Some(*r), *n),
        s => return Err(Error::Shape(format!("affine input must be rank 1 or 2, got {s:?}"))),
    };
    let [w_in, w_out] = w.shape() else {
        return Err(Error::Shape(format!(
            "affine weight must be rank 2, got {:?}",
            w.shape()
        )));
    };
    if *w_in != inner {
        return Err(Error::Shape(format!(
            "affine inner dimensions disagree: x has {inner}, W has {w_in}"
        )));
    }
    if b.shape() != [*w_out] {
        return Err(Error::Shape(format!(
            "affine bias must be [{w_out}], got {:?}",
            b.shape()
        )));
    }
    let out = *w_out;
    let n_rows = rows.unwrap_or(1);
    let mut y = Vec::with_capacity(n_rows * out);
    for r in 0..n_rows {
        let mut row = b.data().to_vec();
        matvec_acc(&x.data()[r * inner..(r + 1) * inner], w.data(), &mut row);
        y.extend_from_slice(&row);
    }
    let shape = match rows {
        None => vec![out],
        Some(r) => vec![r, out],
    };
    let y = Tensor::from_vec(shape, y)?;
    if !y.is_finite() {
        return Err(Error::invalid("affine produced non-finite values"));
    }
    Ok(y)
}
