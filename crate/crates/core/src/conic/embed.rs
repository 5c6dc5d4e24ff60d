use nalgebra::DMatrix;

use crate::linalg::{CMatrix, CVector, C64};

/// Real coordinates `(re, im)` of entry `(i, j)`, `i < j`, of a `d×d`
/// Hermitian block, relative to the start of the block.
pub fn hermitian_param_index(d: usize, i: usize, j: usize) -> (usize, usize) {
    debug_assert!(i < j && j < d);
    // pairs in rows before i: Σ_{r<i} (d-1-r)
    let p = i * (2 * d - i - 1) / 2 + (j - i - 1);
    (d + 2 * p, d + 2 * p + 1)
}

pub fn embed_vector(v: &CVector) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn unembed_vector(x: &[f64]) -> CVector {
    CVector::from_fn(x.len() / 2, |i, _| C64::new(x[2 * i], x[2 * i + 1]))
}

/// Packs a Hermitian matrix into its `d²` real parameters. Only the upper
/// triangle and the real part of the diagonal are read.
pub fn embed_hermitian(a: &CMatrix) -> Vec<f64> {
    let d = a.nrows();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        out[i] = a[(i, i)].re;
        for j in i + 1..d {
            let (r, m) = hermitian_param_index(d, i, j);
            out[r] = a[(i, j)].re;
            out[m] = a[(i, j)].im;
        }
    }
    out
}

pub fn unembed_hermitian(x: &[f64], d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = C64::new(x[i], 0.0);
        for j in i + 1..d {
            let (r, m) = hermitian_param_index(d, i, j);
            a[(i, j)] = C64::new(x[r], x[m]);
            a[(j, i)] = C64::new(x[r], -x[m]);
        }
    }
    a
}

/// `[[Re A, -Im A], [Im A, Re A]]`.
pub fn real_symmetric_form(a: &CMatrix) -> DMatrix<f64> {
    let d = a.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |r, c| {
        let z = a[(r % d, c % d)];
        match (r < d, c < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}
