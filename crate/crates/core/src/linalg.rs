//! Small dense complex linear-algebra helpers shared by the beamforming
//! modules.
//!
//! Channels are stored as the entries of a row vector `h` (1×n); the
//! received amplitude of a precoder `w` is `h w = Σ_j h_j w_j` with no
//! conjugation. The associated Gram matrix is `H = hᴴ h`, so that
//! `wᴴ H w = |h w|²`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// `h w` for a row channel `h` and a column precoder `w`.
pub fn row_dot(h: &CVector, w: &CVector) -> C64 {
    h.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
}

/// `|h w|²`.
pub fn gain(h: &CVector, w: &CVector) -> f64 {
    row_dot(h, w).norm_sqr()
}

/// Gram matrix `hᴴ h` of a row channel.
pub fn gram(h: &CVector) -> CMatrix {
    let n = h.len();
    CMatrix::from_fn(n, n, |i, j| h[i].conj() * h[j])
}

/// `Re(wᴴ A w)`.
pub fn quad_form(a: &CMatrix, w: &CVector) -> f64 {
    w.dotc(&(a * w)).re
}

pub fn squared_norm(w: &CVector) -> f64 {
    w.iter().map(|c| c.norm_sqr()).sum()
}

/// Real trace of a Hermitian matrix.
pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|c| c.re).sum()
}

/// `Re Tr(A X)`.
pub fn trace_product(a: &CMatrix, x: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * x[(j, i)]).re;
        }
    }
    acc
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order; column `i` of the returned matrix pairs with value `i`.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rotates `v` so that its first entry with non-negligible magnitude is
/// real and positive.
pub fn normalize_phase(v: &mut CVector) {
    let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(pivot) = v.iter().find(|c| c.norm() > 1e-12 * scale).copied() {
        let rot = pivot.conj() / pivot.norm();
        for c in v.iter_mut() {
            *c *= rot;
        }
    }
}

/// Hermitian square root of a PSD matrix; negative eigenvalues are clipped.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        let u = vectors.column(k);
        out += (&u * u.adjoint()) * C64::new(s, 0.0);
    }
    out
}

/// Orthonormal basis of the null space of a full-row-rank `m×n` matrix
/// (`m < n`), returned as an `n×(n−m)` matrix.
///
/// Uses a full Householder QR of `gᴴ`; the trailing `n−m` columns of `Q`
/// span the orthogonal complement of the row space of `g`.
pub fn null_space_basis(g: &CMatrix) -> Result<CMatrix> {
    let (m, n) = g.shape();
    if m >= n {
        return Err(Error::InvalidArgument(format!(
            "null space of a {m}x{n} matrix is empty (need rows < columns)"
        )));
    }
    let gh = g.adjoint();
    let scale = gh.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let qr = gh.qr();
    let r = qr.r();
    let min_pivot = (0..m).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if scale == 0.0 || min_pivot <= 1e-10 * scale {
        return Err(Error::DegenerateChannel(format!(
            "stacked channel matrix is rank deficient (pivot {min_pivot:.3e})"
        )));
    }
    let mut qh = CMatrix::identity(n, n);
    qr.q_tr_mul(&mut qh);
    let q = qh.adjoint();
    Ok(q.columns(m, n - m).into_owned())
}

/// Largest generalized eigenpair of the Hermitian pair `(r1, r2)` with
/// `r2 ≻ 0`, via Cholesky reduction to a standard eigenproblem.
///
/// The eigenvector is phase-normalized (first nonzero entry real-positive)
/// and scaled so that `φᴴ r2 φ = 1`.
pub fn generalized_eigen_max(r1: &CMatrix, r2: &CMatrix) -> Result<(f64, CVector)> {
    let n = r1.nrows();
    if r2.shape() != (n, n) || r1.ncols() != n {
        return Err(Error::Dimension("generalized eigenproblem needs square pairs".into()));
    }
    let chol = hermitian_part(r2)
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("R2 is not positive definite".into()))?;
    let l = chol.l();
    let linv_r1 = l
        .solve_lower_triangular(r1)
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
    // C = L⁻¹ R1 L⁻ᴴ = (L⁻¹ (L⁻¹ R1)ᴴ)ᴴ, Hermitian.
    let c = l
        .solve_lower_triangular(&linv_r1.adjoint())
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?
        .adjoint();
    let (values, vectors) = hermitian_eigen(&c);
    let y = vectors.column(0).into_owned();
    let mut phi = l
        .adjoint()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
    normalize_phase(&mut phi);
    let norm = quad_form(r2, &phi).sqrt();
    phi /= C64::new(norm, 0.0);
    Ok((values[0], phi))
}

/// Circularly-symmetric complex Gaussian vector with unit-variance entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

/// Orthogonal projector onto the null space of the rows in `rows`.
pub fn null_projector(rows: &[&CVector], n: usize) -> Result<CMatrix> {
    if rows.is_empty() {
        return Ok(CMatrix::identity(n, n));
    }
    let g = CMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let v = null_space_basis(&g)?;
    Ok(&v * v.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
        let v = complex_gaussian(rng, m * n);
        CMatrix::from_fn(m, n, |i, j| v[i * n + j])
    }

    #[test]
    fn null_space_of_axis_row() {
        let g = CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let v = null_space_basis(&g).unwrap();
        assert_eq!(v.shape(), (2, 1));
        assert!(v[(0, 0)].norm() < 1e-15);
        assert!((v[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn null_space_residuals_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_matrix(&mut rng, 2, 4);
            let v = null_space_basis(&g).unwrap();
            assert!((&g * &v).norm() <= 1e-12);
            assert!((v.adjoint() * &v - CMatrix::identity(2, 2)).norm() <= 1e-12);
        }
    }

    #[test]
    fn null_space_rejects_square_and_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_matrix(&mut rng, 3, 3);
        assert!(null_space_basis(&g).is_err());
        let row = random_matrix(&mut rng, 1, 4);
        let g = CMatrix::from_fn(2, 4, |_, j| row[(0, j)]);
        assert!(matches!(null_space_basis(&g), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn generalized_eigen_matches_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = complex_gaussian(&mut rng, 3);
        let r1 = gram(&h);
        let r2 = CMatrix::identity(3, 3);
        let (lam, phi) = generalized_eigen_max(&r1, &r2).unwrap();
        assert!((lam - squared_norm(&h)).abs() < 1e-10 * lam);
        // φ ∥ hᴴ
        let align = row_dot(&h, &phi).norm() / h.norm();
        assert!((align - 1.0).abs() < 1e-10);
    }

    #[test]
    fn generalized_eigen_general_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 4, 4);
        let b = random_matrix(&mut rng, 4, 4);
        let r1 = &a * a.adjoint();
        let r2 = &b * b.adjoint() + CMatrix::identity(4, 4);
        let (lam, phi) = generalized_eigen_max(&r1, &r2).unwrap();
        let resid = &r1 * &phi - &r2 * &phi * C64::new(lam, 0.0);
        assert!(resid.norm() < 1e-9 * lam);
        // λ_max bounds every Rayleigh quotient
        for _ in 0..50 {
            let x = complex_gaussian(&mut rng, 4);
            assert!(quad_form(&r1, &x) / quad_form(&r2, &x) <= lam * (1.0 + 1e-12));
        }
    }

    #[test]
    fn eigen_sorted_descending() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 5, 5);
        let h = &a * a.adjoint();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for k in 0..5 {
            let v = vecs.column(k).into_owned();
            let r = &h * &v - &v * C64::new(vals[k], 0.0);
            assert!(r.norm() < 1e-10 * vals[0]);
        }
    }
}
