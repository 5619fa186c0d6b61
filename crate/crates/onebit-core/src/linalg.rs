//! Dense kernels shared by the model and solver modules.
//!
//! The parallel and sequential builds perform the same floating-point
//! operations in the same order: row dots are per-row sequential, and the
//! transposed product accumulates fixed 256-row partial sums that are
//! combined in chunk order. Results are therefore bit-identical with the
//! `parallel` feature on or off.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Row-chunk size for the transposed matrix-vector product.
const ROW_CHUNK: usize = 256;

/// Minimum element count before a product is worth parallelizing.
#[cfg(feature = "parallel")]
const PAR_MIN_ELEMS: usize = 1 << 20;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let rem: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rem
}

pub(crate) fn add_scaled(out: &mut [f64], c: f64, v: &[f64]) {
    debug_assert_eq!(out.len(), v.len());
    for (o, x) in out.iter_mut().zip(v) {
        *o += c * x;
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn rows<'a>(a: &ArrayView2<'a, f64>) -> &'a [f64] {
    a.to_slice()
        .expect("matrix must be contiguous in standard layout")
}

/// `out = a * x` with one dot product per row.
pub(crate) fn mat_vec(a: &ArrayView2<'_, f64>, x: &[f64], out: &mut [f64]) {
    let (m, n) = a.dim();
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), m);
    let data = rows(a);
    #[cfg(feature = "parallel")]
    if m * n >= PAR_MIN_ELEMS {
        out.par_iter_mut()
            .zip(data.par_chunks_exact(n))
            .for_each(|(o, row)| *o = dot(row, x));
        return;
    }
    for (o, row) in out.iter_mut().zip(data.chunks_exact(n)) {
        *o = dot(row, x);
    }
}

fn chunk_partial(chunk_rows: &[f64], w_chunk: &[f64], n: usize) -> Vec<f64> {
    let mut partial = vec![0.0; n];
    for (row, &wi) in chunk_rows.chunks_exact(n).zip(w_chunk) {
        if wi != 0.0 {
            add_scaled(&mut partial, wi, row);
        }
    }
    partial
}

/// `out = a^T * w`, accumulating rows of `a` scaled by the entries of `w`.
pub(crate) fn mat_t_vec(a: &ArrayView2<'_, f64>, w: &[f64], out: &mut [f64]) {
    let (m, n) = a.dim();
    debug_assert_eq!(w.len(), m);
    debug_assert_eq!(out.len(), n);
    let data = rows(a);

    #[cfg(feature = "parallel")]
    if m * n >= PAR_MIN_ELEMS {
        let partials: Vec<Vec<f64>> = data
            .par_chunks(ROW_CHUNK * n)
            .zip(w.par_chunks(ROW_CHUNK))
            .map(|(chunk_rows, w_chunk)| chunk_partial(chunk_rows, w_chunk, n))
            .collect();
        out.fill(0.0);
        for partial in &partials {
            add_scaled(out, 1.0, partial);
        }
        return;
    }

    out.fill(0.0);
    for (chunk_rows, w_chunk) in data.chunks(ROW_CHUNK * n).zip(w.chunks(ROW_CHUNK)) {
        let partial = chunk_partial(chunk_rows, w_chunk, n);
        add_scaled(out, 1.0, &partial);
    }
}

/// Upper estimate of the squared spectral norm by power iteration on `a^T a`.
///
/// Iterates until the Rayleigh quotient changes by less than 1e-10
/// relatively, or 500 iterations, whichever comes first, then inflates the
/// estimate by 1.01 so it bounds the true value from above. The starting
/// vector is drawn from a fixed-seed generator, so the estimate is
/// deterministic.
pub(crate) fn spectral_norm_sq_upper(a: &ArrayView2<'_, f64>) -> Result<f64> {
    const MAX_ITER: usize = 500;
    const REL_TOL: f64 = 1e-10;
    const INFLATION: f64 = 1.01;

    let (m, n) = a.dim();
    if m == 0 || n == 0 || rows(a).iter().all(|&v| v == 0.0) {
        return Err(Error::Invalid(
            "spectral norm estimation requires a nonzero matrix".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x1b17_c5ee);
    let draw_unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let nv = norm(&v);
            if nv > 0.0 {
                v.iter_mut().for_each(|x| *x /= nv);
                return v;
            }
        }
    };

    let mut v = draw_unit(&mut rng);
    let mut w = vec![0.0; m];
    let mut u = vec![0.0; n];
    let mut lambda_prev = 0.0;
    let mut lambda = 0.0;
    let mut redraws = 0;

    let mut it = 0;
    while it < MAX_ITER {
        mat_vec(a, &v, &mut w);
        lambda = dot(&w, &w);
        if lambda == 0.0 {
            // v fell in the null space; retry from a fresh direction.
            redraws += 1;
            if redraws > 4 {
                return Err(Error::Invalid(
                    "power iteration failed: repeated null-space starts".into(),
                ));
            }
            v = draw_unit(&mut rng);
            continue;
        }
        if it > 0 && (lambda - lambda_prev).abs() <= REL_TOL * lambda {
            break;
        }
        lambda_prev = lambda;
        mat_t_vec(a, &w, &mut u);
        let nu = norm(&u);
        if nu == 0.0 {
            redraws += 1;
            if redraws > 4 {
                return Err(Error::Invalid(
                    "power iteration failed: repeated null-space starts".into(),
                ));
            }
            v = draw_unit(&mut rng);
            continue;
        }
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / nu;
        }
        it += 1;
    }

    Ok(INFLATION * lambda)
}
