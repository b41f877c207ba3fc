//! Small dense linear-algebra kernels.
//!
//! The three matmul variants cover the forward/backward passes of a dense
//! network. Each output row is computed by one task as a fixed sequential
//! sum, so results are bit-identical no matter how many worker threads run —
//! parallelism only distributes whole rows.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

/// Below this many multiply–adds the parallel dispatch is not worth it.
const PAR_FLOP_THRESHOLD: usize = 1 << 16;

fn rows_of<'a>(a: &ArrayView2<'a, f64>) -> Vec<&'a [f64]> {
    debug_assert!(a.is_standard_layout());
    let slice = a.to_slice().expect("matrix must be in standard layout");
    let (r, c) = a.dim();
    (0..r).map(|i| &slice[i * c..(i + 1) * c]).collect()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(alpha: f64, x: &[f64], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// `a (m×k) · bᵀ (k×n)` where `b` is given as n×k. Forward pass: `x · wᵀ`.
pub fn matmul_nt(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let (n, kb) = b.dim();
    assert_eq!(k, kb, "inner dimensions differ: {k} vs {kb}");
    let a_rows = rows_of(&a);
    let b_rows = rows_of(&b);
    let mut out = vec![0.0; m * n];
    let kernel = |(i, row): (usize, &mut [f64])| {
        let ar = a_rows[i];
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(ar, b_rows[j]);
        }
    };
    if m * n * k >= PAR_FLOP_THRESHOLD {
        out.par_chunks_mut(n).enumerate().for_each(kernel);
    } else {
        out.chunks_mut(n).enumerate().for_each(kernel);
    }
    Array2::from_shape_vec((m, n), out).unwrap()
}

/// Plain `a (m×k) · b (k×n)`. Backward pass: `d_out · w`.
pub fn matmul_nn(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let (kb, n) = b.dim();
    assert_eq!(k, kb, "inner dimensions differ: {k} vs {kb}");
    let a_rows = rows_of(&a);
    let b_rows = rows_of(&b);
    let mut out = vec![0.0; m * n];
    let kernel = |(i, row): (usize, &mut [f64])| {
        for (l, &av) in a_rows[i].iter().enumerate() {
            axpy(av, b_rows[l], row);
        }
    };
    if m * n * k >= PAR_FLOP_THRESHOLD {
        out.par_chunks_mut(n).enumerate().for_each(kernel);
    } else {
        out.chunks_mut(n).enumerate().for_each(kernel);
    }
    Array2::from_shape_vec((m, n), out).unwrap()
}

/// `aᵀ (m×B)ᵀ · b (B×n)` where `a` is given as B×m. Weight gradients:
/// `d_zᵀ · x`.
pub fn matmul_tn(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (ba, m) = a.dim();
    let (bb, n) = b.dim();
    assert_eq!(ba, bb, "batch dimensions differ: {ba} vs {bb}");
    let a_rows = rows_of(&a);
    let b_rows = rows_of(&b);
    let mut out = vec![0.0; m * n];
    let kernel = |(j, row): (usize, &mut [f64])| {
        for i in 0..ba {
            axpy(a_rows[i][j], b_rows[i], row);
        }
    };
    if m * n * ba >= PAR_FLOP_THRESHOLD {
        out.par_chunks_mut(n).enumerate().for_each(kernel);
    } else {
        out.chunks_mut(n).enumerate().for_each(kernel);
    }
    Array2::from_shape_vec((m, n), out).unwrap()
}
