//! Band-restricted rotation generators with the per-pair resonance test.

use crate::error::{CoreError, Result};
use crate::linalg::{self, Matrix, Par};

/// Antisymmetric rotation generator for one step. Entries live only on the
/// selected nonresonant pairs; resonant pairs are recorded and left alone.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    dim: usize,
    /// Upper-triangle entries `(row, col, A_row_col)` with `row < col`.
    entries: Vec<(usize, usize, f64)>,
    /// Pairs whose ratio failed the test (or had a vanishing denominator).
    pub resonant_pairs: Vec<(usize, usize)>,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dense antisymmetric matrix.
    pub fn dense(&self) -> Matrix {
        let mut a = Matrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            a[(r, c)] = v;
            a[(c, r)] = -v;
        }
        a
    }

    /// Induced 1-norm of the dense generator, computed from the entries.
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0f64; self.dim];
        for &(r, c, v) in &self.entries {
            col[r] += v.abs();
            col[c] += v.abs();
        }
        col.into_iter().fold(0.0, f64::max)
    }
}

/// Unordered pairs at a Hamming distance in `band` with magnitude above
/// `floor`, in row-major order.
pub fn offdiagonal_band(h: &Matrix, band: &[usize], floor: f64) -> Vec<(usize, usize)> {
    let dim = h.nrows();
    let max_bits = usize::BITS as usize;
    let mut mask = vec![false; max_bits + 1];
    for &m in band {
        if m <= max_bits {
            mask[m] = true;
        }
    }
    let mut pairs = Vec::new();
    for row in 0..dim {
        for col in row + 1..dim {
            if mask[(row ^ col).count_ones() as usize] && h[(row, col)].abs() > floor {
                pairs.push((row, col));
            }
        }
    }
    pairs
}

/// Build the generator for the given band: for each selected pair with flip
/// count `m`, `A = J / dE` when `|J / dE| <= rho^m`, otherwise the pair is
/// resonant. Vanishing denominators are always resonant.
pub fn build_generator(
    h: &Matrix,
    band: &[usize],
    rho: f64,
    floor: f64,
) -> Result<GeneratorMatrix> {
    let pairs = offdiagonal_band(h, band, floor);
    build_generator_from_pairs(h, &pairs, rho)
}

/// Same, on a precomputed pair list (the engine reuses its band scan).
pub fn build_generator_from_pairs(
    h: &Matrix,
    pairs: &[(usize, usize)],
    rho: f64,
) -> Result<GeneratorMatrix> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "cutoff ratio must be positive and finite, got {rho}"
        )));
    }
    let dim = h.nrows();
    let mut entries = Vec::new();
    let mut resonant = Vec::new();
    for &(row, col) in pairs {
        let j = h[(row, col)];
        let de = h[(row, row)] - h[(col, col)];
        if !j.is_finite() {
            return Err(CoreError::NonFinite { context: "off-diagonal element", row, col });
        }
        if !de.is_finite() {
            return Err(CoreError::NonFinite { context: "energy denominator", row, col });
        }
        if de == 0.0 {
            resonant.push((row, col));
            continue;
        }
        let m = (row ^ col).count_ones() as i32;
        let ratio = (j / de).abs();
        if ratio <= rho.powi(m) {
            entries.push((row, col, j / de));
        } else {
            resonant.push((row, col));
        }
    }
    Ok(GeneratorMatrix { dim, entries, resonant_pairs: resonant })
}

/// One perturbative step: `e^A h e^-A` with the exponential certified to
/// `tol` in max norm. The spectrum is preserved exactly up to that accuracy.
pub fn rotate(h: &Matrix, gen: &GeneratorMatrix, tol: f64, par: Par) -> Result<Matrix> {
    let (rotated, _) = rotate_with_unitary(h, gen, tol, par)?;
    Ok(rotated)
}

/// `(e^A h e^-A, e^-A)`; the second factor right-multiplies the accumulated
/// basis change.
pub fn rotate_with_unitary(
    h: &Matrix,
    gen: &GeneratorMatrix,
    tol: f64,
    par: Par,
) -> Result<(Matrix, Matrix)> {
    if h.nrows() != gen.dim() || h.ncols() != gen.dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "hamiltonian is {}x{}, generator dimension is {}",
            h.nrows(),
            h.ncols(),
            gen.dim()
        )));
    }
    let mut neg = gen.dense();
    for j in 0..neg.ncols() {
        for i in 0..neg.nrows() {
            neg[(i, j)] = -neg[(i, j)];
        }
    }
    let q = linalg::expm(&neg, tol, par)?; // e^-A, orthogonal up to tol
    let mut rotated = linalg::conjugate(h, &q, par); // q^T h q = e^A h e^-A
    linalg::symmetrize(&mut rotated);
    Ok((rotated, q))
}

/// Sparse route for the same conjugation: the commutator series
/// `sum_j (ad A)^j h / j!`, truncated once the certified tail is below `tol`.
/// Worthwhile when the generator is very sparse.
pub fn rotate_sparse(h: &Matrix, gen: &GeneratorMatrix, tol: f64) -> Result<Matrix> {
    let dim = h.nrows();
    let a1 = gen.one_norm();
    let mut sum = h.clone();
    let mut term = h.clone();
    let mut j = 1usize;
    loop {
        // term <- (A * term - term * A) / j
        let mut next = Matrix::zeros(dim, dim);
        commutator_accumulate(gen, &term, &mut next);
        let inv = 1.0 / j as f64;
        for c in 0..dim {
            for r in 0..dim {
                next[(r, c)] *= inv;
            }
        }
        let term_max = linalg::max_abs(&next);
        for c in 0..dim {
            for r in 0..dim {
                sum[(r, c)] += next[(r, c)];
            }
        }
        // tail bound: geometric with ratio 2*a1/(j+1) once that is < 1
        let ratio = 2.0 * a1 / (j + 1) as f64;
        if ratio < 0.5 && term_max * ratio / (1.0 - ratio) <= tol {
            break;
        }
        if j >= crate::linalg::EXPM_MAX_TERMS * 2 {
            return Err(CoreError::ExpmDivergence {
                tol,
                max_terms: crate::linalg::EXPM_MAX_TERMS * 2,
            });
        }
        term = next;
        j += 1;
    }
    linalg::symmetrize(&mut sum);
    Ok(sum)
}

/// `out += A * x - x * A` using only the sparse entries of `A`.
fn commutator_accumulate(gen: &GeneratorMatrix, x: &Matrix, out: &mut Matrix) {
    let dim = x.nrows();
    for &(r, c, v) in gen.entries() {
        // A x: row r gains v * x[c, :], row c gains -v * x[r, :]
        for col in 0..dim {
            let xc = x[(c, col)];
            let xr = x[(r, col)];
            out[(r, col)] += v * xc;
            out[(c, col)] -= v * xr;
        }
        // -x A: column c gains -v * x[:, r], column r gains v * x[:, c]
        for row in 0..dim {
            let xr = x[(row, r)];
            let xc = x[(row, c)];
            out[(row, c)] -= v * xr;
            out[(row, r)] += v * xc;
        }
    }
}

/// Right-multiply `u` by `e^(sign * A)` via the truncated series, using only
/// the sparse entries of `A`. `sign` is +1 or -1.
pub fn apply_exp_right_sparse(
    u: &mut Matrix,
    gen: &GeneratorMatrix,
    sign: f64,
    tol: f64,
) -> Result<()> {
    let dim = u.nrows();
    let a1 = gen.one_norm();
    let mut term = u.clone();
    let mut j = 1usize;
    loop {
        // term <- sign * term * A / j
        let mut next = Matrix::zeros(dim, dim);
        for &(r, c, v) in gen.entries() {
            // (term * A)[:, c] += v * term[:, r]; (term * A)[:, r] -= v * term[:, c]
            for row in 0..dim {
                next[(row, c)] += v * term[(row, r)];
                next[(row, r)] -= v * term[(row, c)];
            }
        }
        let scale = sign / j as f64;
        let mut term_max = 0.0f64;
        for c in 0..dim {
            for r in 0..dim {
                next[(r, c)] *= scale;
                term_max = term_max.max(next[(r, c)].abs());
                u[(r, c)] += next[(r, c)];
            }
        }
        let ratio = a1 / (j + 1) as f64;
        if ratio < 0.5 && term_max * ratio / (1.0 - ratio) <= tol {
            return Ok(());
        }
        if j >= crate::linalg::EXPM_MAX_TERMS * 2 {
            return Err(CoreError::ExpmDivergence {
                tol,
                max_terms: crate::linalg::EXPM_MAX_TERMS * 2,
            });
        }
        term = next;
        j += 1;
    }
}
