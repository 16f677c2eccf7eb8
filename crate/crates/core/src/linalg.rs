//! Dense linear algebra on top of faer: products, norms, the certified
//! matrix exponential, and the symmetric eigensolver.
//!
//! Every routine that multiplies or factorizes takes an explicit [`Par`];
//! callers that must be invariant under scheduling (ensemble workers) pass
//! `Par::Seq`.

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat};

pub use faer::Par;

use crate::error::{CoreError, Result};

pub type Matrix = Mat<f64>;

/// Maximum Taylor order attempted by [`expm`] before reporting divergence.
pub const EXPM_MAX_TERMS: usize = 40;

pub fn identity(dim: usize) -> Matrix {
    Matrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// `a * b`.
pub fn mat_mul(a: &Matrix, b: &Matrix, par: Par) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a.as_ref(), b.as_ref(), 1.0, par);
    out
}

/// `a^T * b`.
pub fn mat_tmul(a: &Matrix, b: &Matrix, par: Par) -> Matrix {
    let mut out = Matrix::zeros(a.ncols(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a.transpose(), b.as_ref(), 1.0, par);
    out
}

/// Similarity transform `q^T * h * q`.
pub fn conjugate(h: &Matrix, q: &Matrix, par: Par) -> Matrix {
    let hq = mat_mul(h, q, par);
    mat_tmul(q, &hq, par)
}

pub fn max_abs(m: &Matrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].abs());
        }
    }
    best
}

pub fn max_abs_offdiag(m: &Matrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                best = best.max(m[(i, j)].abs());
            }
        }
    }
    best
}

/// Max-norm of `m - m^T`.
pub fn symmetry_error(m: &Matrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            best = best.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    best
}

/// Average `m` with its transpose in place.
pub fn symmetrize(m: &mut Matrix) {
    for j in 0..m.ncols() {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Max-norm of `q^T q - I`.
pub fn orthogonality_error(q: &Matrix, par: Par) -> f64 {
    let qtq = mat_tmul(q, q, par);
    let mut best = 0.0f64;
    for j in 0..qtq.ncols() {
        for i in 0..qtq.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            best = best.max((qtq[(i, j)] - target).abs());
        }
    }
    best
}

/// Induced 1-norm (max column abs sum).
pub fn one_norm(m: &Matrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let mut col = 0.0;
        for i in 0..m.nrows() {
            col += m[(i, j)].abs();
        }
        best = best.max(col);
    }
    best
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    let mut sum = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            sum += m[(i, j)] * m[(i, j)];
        }
    }
    sum.sqrt()
}

fn add_scaled_identity(m: &mut Matrix, c: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += c;
    }
}

/// Taylor order needed so the truncation remainder of `e^B`, `||B||_1 <= theta`,
/// is below `tol`: `theta^(N+1)/(N+1)! * 1/(1 - theta/(N+2)) <= tol`.
fn taylor_order(theta: f64, tol: f64) -> Option<usize> {
    let mut term = 1.0f64;
    for order in 0..=EXPM_MAX_TERMS {
        // term = theta^(order+1) / (order+1)!
        term *= theta / (order + 1) as f64;
        let tail = term / (1.0 - theta / (order + 2) as f64);
        if tail <= tol {
            return Some(order);
        }
    }
    None
}

/// Matrix exponential by scaled squaring of the truncated Taylor series,
/// with the remainder certified below `tol` (absolute, max norm).
///
/// For antisymmetric input the result is orthogonal up to the same `tol`.
pub fn expm(a: &Matrix, tol: f64, par: Par) -> Result<Matrix> {
    let dim = a.nrows();
    if a.ncols() != dim {
        return Err(CoreError::ShapeMismatch("expm needs a square matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(CoreError::InvalidArgument("expm tolerance must be positive".into()));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(CoreError::NonFinite { context: "expm input", row: 0, col: 0 });
    }
    if norm == 0.0 {
        return Ok(identity(dim));
    }

    let theta = 0.25f64;
    let squarings = if norm > theta {
        (norm / theta).log2().ceil() as u32
    } else {
        0
    };
    let scale = 2.0f64.powi(-(squarings as i32));
    // each squaring at most doubles the accumulated error (orthogonal factors)
    let series_tol = tol / 2.0f64.powi(squarings as i32 + 1);
    let order = taylor_order(norm * scale, series_tol).ok_or(CoreError::ExpmDivergence {
        tol,
        max_terms: EXPM_MAX_TERMS,
    })?;

    let b = Matrix::from_fn(dim, dim, |i, j| a[(i, j)] * scale);

    // Paterson-Stockmeyer evaluation of sum_{k<=order} B^k / k!
    let q = ((order as f64).sqrt().ceil() as usize).max(1);
    let mut powers: Vec<Matrix> = Vec::with_capacity(q + 1);
    powers.push(identity(dim));
    powers.push(b.clone());
    for k in 2..=q {
        let next = mat_mul(&powers[k - 1], &b, par);
        powers.push(next);
    }
    let mut coeff = vec![0.0f64; order + 1];
    coeff[0] = 1.0;
    for k in 1..=order {
        coeff[k] = coeff[k - 1] / k as f64;
    }
    let blocks = order / q + 1;
    let mut result: Option<Matrix> = None;
    for block in (0..blocks).rev() {
        let mut acc = Matrix::zeros(dim, dim);
        for r in 0..q {
            let k = block * q + r;
            if k <= order {
                let c = coeff[k];
                let p = &powers[r];
                for jj in 0..dim {
                    for ii in 0..dim {
                        acc[(ii, jj)] += c * p[(ii, jj)];
                    }
                }
            }
        }
        result = Some(match result {
            None => acc,
            Some(prev) => {
                let mut folded = mat_mul(&prev, &powers[q], par);
                for jj in 0..dim {
                    for ii in 0..dim {
                        folded[(ii, jj)] += acc[(ii, jj)];
                    }
                }
                folded
            }
        });
    }
    let mut e = result.expect("at least one block");

    for _ in 0..squarings {
        e = mat_mul(&e, &e, par);
    }
    Ok(e)
}

/// Eigendecomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthogonal eigenvector matrix (columns).
pub fn eigh(h: &Matrix, par: Par) -> Result<(Vec<f64>, Matrix)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(CoreError::ShapeMismatch("eigh needs a square matrix".into()));
    }
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut u = Matrix::zeros(n, n);
    let mut buf = MemBuffer::new(self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    ));
    self_adjoint_evd(
        h.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| CoreError::EigenFailure(format!("{e:?}")))?;
    let mut values: Vec<f64> = s.column_vector().iter().copied().collect();

    // faer returns ascending order; enforce it in case of ties/backend change
    if values.windows(2).any(|w| w[0] > w[1]) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let permuted = Matrix::from_fn(n, n, |i, j| u[(i, order[j])]);
        values = order.iter().map(|&i| values[i]).collect();
        u = permuted;
    }
    Ok((values, u))
}
