//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{DvcmError, Result};

/// Relative pivot threshold below which a symmetric matrix is treated as singular.
const PIVOT_TOL: f64 = 1e-13;

/// Cholesky factorization of a symmetric positive-definite matrix with a
/// rank check on the pivots.
pub fn cholesky(a: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    let n = a.nrows();
    if n == 0 {
        return Err(DvcmError::singular(context, f64::INFINITY));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(DvcmError::singular(context, f64::NAN));
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(DvcmError::singular(context, f64::INFINITY));
    }
    let chol = match Cholesky::new(a.clone()) {
        Some(c) => c,
        None => return Err(DvcmError::singular(context, condition_estimate(a))),
    };
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = l[(i, i)] * l[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo <= PIVOT_TOL * scale {
        return Err(DvcmError::singular(context, hi / lo.max(f64::MIN_POSITIVE)));
    }
    Ok(chol)
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    Ok(cholesky(a, context)?.solve(b))
}

/// Solves `a X = B` for symmetric positive-definite `a`.
pub fn spd_solve_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    context: &str,
) -> Result<DMatrix<f64>> {
    Ok(cholesky(a, context)?.solve(b))
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&cholesky(a, context)?.inverse()))
}

/// Solves a general square system via LU; used where the matrix need not be symmetric.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let cond = condition_estimate(a);
    if !cond.is_finite() || cond > 1e14 {
        return Err(DvcmError::singular(context, cond));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| DvcmError::singular(context, cond))
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    if a.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// `sum_i w_i z_i z_i^T` over the rows of `z`.
pub fn weighted_gram(z: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let d = z.ncols();
    let mut out = DMatrix::zeros(d, d);
    for (i, row) in z.row_iter().enumerate() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for a in 0..d {
            let za = row[a] * wi;
            if za == 0.0 {
                continue;
            }
            for b in a..d {
                out[(a, b)] += za * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            out[(a, b)] = out[(b, a)];
        }
    }
    out
}

/// Top-left `p x p` block.
pub fn leading_block(a: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    a.view((0, 0), (p, p)).into_owned()
}
