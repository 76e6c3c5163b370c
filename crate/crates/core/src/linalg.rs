//! Dense complex linear algebra helpers built on `nalgebra`.
//!
//! Determinants and linear solves use LU with partial pivoting. A pivot whose
//! magnitude falls below `PIVOT_RTOL` times the largest matrix entry is
//! reported as [`BetheError::Singularity`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{BetheError, Result};

/// Double-precision complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Relative pivot threshold below which a matrix is treated as singular.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Complex zero.
pub const ZERO: C64 = C64::new(0.0, 0.0);
/// Complex one.
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Largest entry magnitude of a matrix (0 for an empty matrix).
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest entry magnitude of a vector or slice.
pub fn max_abs_slice(v: &[C64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Quotient that fails on a vanishing or non-finite result.
pub fn div(num: C64, den: C64, what: &str) -> Result<C64> {
    if den.norm() == 0.0 || !den.is_finite() {
        return Err(BetheError::Singularity(format!("vanishing denominator in {what}")));
    }
    let q = num / den;
    if !q.is_finite() {
        return Err(BetheError::Singularity(format!("non-finite quotient in {what}")));
    }
    Ok(q)
}

fn check_pivots(m: &DMatrix<C64>, u_diag: impl Iterator<Item = C64>, what: &str) -> Result<()> {
    let scale = max_abs(m);
    if scale == 0.0 {
        return Err(BetheError::Singularity(format!("zero matrix in {what}")));
    }
    for p in u_diag {
        if !p.is_finite() || p.norm() < PIVOT_RTOL * scale {
            return Err(BetheError::Singularity(format!("vanishing pivot in {what}")));
        }
    }
    Ok(())
}

/// Determinant by pivoted LU; a 0x0 matrix has determinant 1.
pub fn det(m: &DMatrix<C64>) -> Result<C64> {
    assert!(m.is_square(), "determinant of a non-square matrix");
    if m.nrows() == 0 {
        return Ok(ONE);
    }
    let lu = m.clone().lu();
    let u = lu.u();
    check_pivots(m, u.diagonal().iter().copied(), "determinant")?;
    Ok(lu.determinant())
}

/// Determinant of a small matrix given row by row, without a pivot check.
///
/// Used for the closed-form determinant ratios whose vanishing is detected at
/// the division step instead.
pub fn det_rows(rows: &[Vec<C64>]) -> C64 {
    let n = rows.len();
    match n {
        0 => ONE,
        1 => rows[0][0],
        2 => rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0],
        _ => {
            let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            m.lu().determinant()
        }
    }
}

/// Solves `a x = b` by pivoted LU.
pub fn solve(a: &DMatrix<C64>, b: &DVector<C64>) -> Result<DVector<C64>> {
    assert!(a.is_square(), "solve with a non-square matrix");
    let lu = a.clone().lu();
    check_pivots(a, lu.u().diagonal().iter().copied(), "linear solve")?;
    lu.solve(b)
        .ok_or_else(|| BetheError::Singularity("LU solve failed".into()))
}

/// Eigenvalues of a square complex matrix from its Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = m.clone().schur().unpack();
    t.diagonal().iter().copied().collect()
}

/// Eigenpairs of a square complex matrix.
///
/// Eigenvectors are obtained by back substitution on the Schur form and are
/// normalized to unit Euclidean norm. Exactly degenerate eigenvalues receive a
/// tiny regularization in the substitution, so the returned vectors are only
/// reliable for non-degenerate spectra.
pub fn eigenpairs(m: &DMatrix<C64>) -> Vec<(C64, DVector<C64>)> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let (q, t) = m.clone().schur().unpack();
    let scale = max_abs(&t).max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let lam = t[(k, k)];
        let mut y = DVector::<C64>::zeros(n);
        y[k] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for l in (j + 1)..=k {
                acc += t[(j, l)] * y[l];
            }
            let mut den = t[(j, j)] - lam;
            if den.norm() < 1e-14 * scale {
                den = C64::new(1e-14 * scale, 0.0);
            }
            y[j] = -acc / den;
        }
        let mut v = &q * y;
        let nrm = v.norm();
        if nrm > 0.0 {
            v /= C64::new(nrm, 0.0);
        }
        out.push((lam, v));
    }
    out
}
