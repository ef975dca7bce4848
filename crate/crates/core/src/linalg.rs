use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    use core::f64::consts::{PI, TAU};
    let mut w = a % TAU;
    if w <= -PI {
        w += TAU;
    } else if w > PI {
        w -= TAU;
    }
    w
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.cholesky()?;
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves a symmetric block-tridiagonal system whose off-diagonal blocks are
/// all `coupling * I`, by block elimination.
pub(crate) fn solve_block_tridiagonal(
    diag: &[DMatrix<f64>],
    coupling: f64,
    rhs: &[DVector<f64>],
) -> Option<Vec<DVector<f64>>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut factors = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let first = diag[0].clone().cholesky()?;
    y.push(rhs[0].clone());
    factors.push(first);
    for i in 1..n {
        let prev = &factors[i - 1];
        let inv = prev.inverse();
        let schur = &diag[i] - inv * (coupling * coupling);
        let yi = &rhs[i] - prev.solve(&y[i - 1]) * coupling;
        factors.push(schur.cholesky()?);
        y.push(yi);
    }
    let mut x = alloc::vec![DVector::zeros(0); n];
    x[n - 1] = factors[n - 1].solve(&y[n - 1]);
    for i in (0..n - 1).rev() {
        let r = &y[i] - &x[i + 1] * coupling;
        x[i] = factors[i].solve(&r);
    }
    x.iter()
        .all(|v| v.iter().all(|e| e.is_finite()))
        .then_some(x)
}
