//! Exact-diagonalization oracle. Ground truth for every engine claim and the
//! measurement backend for level-spacing statistics.

use crate::error::{CoreError, Result};
use crate::linalg::{self, Matrix, Par};
use crate::model::ChainGeometry;

pub const PAULI_X: [[f64; 2]; 2] = [[0.0, 1.0], [1.0, 0.0]];
pub const PAULI_Z: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, -1.0]];
/// Real antisymmetric representative of Y (equal to -iY).
pub const PAULI_Y_REAL: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

/// Full spectrum: ascending eigenvalues and the matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Max-norm residual of `V diag(E) V^T - h`, for self-consistency checks.
    pub fn reconstruction_error(&self, h: &Matrix, par: Par) -> f64 {
        let dim = self.dim();
        let scaled = Matrix::from_fn(dim, dim, |i, j| self.eigenvectors[(i, j)] * self.eigenvalues[j]);
        let mut recon = Matrix::zeros(dim, dim);
        faer::linalg::matmul::matmul(
            recon.as_mut(),
            faer::Accum::Replace,
            scaled.as_ref(),
            self.eigenvectors.transpose(),
            1.0,
            par,
        );
        let mut err = 0.0f64;
        for j in 0..dim {
            for i in 0..dim {
                err = err.max((recon[(i, j)] - h[(i, j)]).abs());
            }
        }
        err
    }
}

/// Exact diagonalization of a symmetric matrix.
pub fn diagonalize(h: &Matrix) -> Result<Spectrum> {
    diagonalize_with(h, faer::get_global_parallelism())
}

/// Exact diagonalization with explicit threading (deterministic paths pass
/// `Par::Seq`).
pub fn diagonalize_with(h: &Matrix, par: Par) -> Result<Spectrum> {
    if h.nrows() != h.ncols() {
        return Err(CoreError::ShapeMismatch("hamiltonian must be square".into()));
    }
    let scale = linalg::max_abs(h).max(1.0);
    let asym = linalg::symmetry_error(h);
    if asym > 1e-10 * scale {
        return Err(CoreError::NotSymmetric(asym));
    }
    let (eigenvalues, eigenvectors) = linalg::eigh(h, par)?;
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Minimum spacing between distinct levels, over adjacent sorted pairs.
pub fn min_level_spacing(spectrum: &Spectrum) -> Result<f64> {
    min_gap_of_sorted(&spectrum.eigenvalues)
}

/// Same, on a plain ascending eigenvalue list.
pub fn min_gap_of_sorted(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "minimum level spacing needs at least two levels".into(),
        ));
    }
    Ok(eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min))
}

/// Expectation of `op` in eigenstate `alpha`: `v_alpha^T op v_alpha`.
pub fn eigenstate_expectation(op: &Matrix, spectrum: &Spectrum, alpha: usize) -> Result<f64> {
    let dim = spectrum.dim();
    if op.nrows() != dim || op.ncols() != dim {
        return Err(CoreError::ShapeMismatch(format!(
            "operator is {}x{}, spectrum dimension is {dim}",
            op.nrows(),
            op.ncols()
        )));
    }
    if alpha >= dim {
        return Err(CoreError::InvalidArgument(format!(
            "eigenstate index {alpha} out of range for dimension {dim}"
        )));
    }
    let mut acc = 0.0;
    for i in 0..dim {
        let vi = spectrum.eigenvectors[(i, alpha)];
        if vi == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..dim {
            row += op[(i, j)] * spectrum.eigenvectors[(j, alpha)];
        }
        acc += vi * row;
    }
    Ok(acc)
}

/// Tensor product of single-site operators, identity on unlisted sites,
/// leftmost site in the most significant bit.
pub fn kron_operator(
    site_ops: &[(i64, [[f64; 2]; 2])],
    geometry: &ChainGeometry,
) -> Result<Matrix> {
    let n = geometry.sites();
    let mut by_array: Vec<Option<[[f64; 2]; 2]>> = vec![None; n];
    for &(site, op) in site_ops {
        let u = geometry.array_index(site)?;
        if by_array[u].is_some() {
            return Err(CoreError::InvalidArgument(format!(
                "duplicate site {site} in operator product"
            )));
        }
        by_array[u] = Some(op);
    }

    let mut out = Matrix::from_fn(1, 1, |_, _| 1.0);
    for u in 0..n {
        let factor = by_array[u].unwrap_or([[1.0, 0.0], [0.0, 1.0]]);
        out = kron2(&out, &factor);
    }
    Ok(out)
}

fn kron2(a: &Matrix, b: &[[f64; 2]; 2]) -> Matrix {
    let (m, n) = (a.nrows(), a.ncols());
    Matrix::from_fn(2 * m, 2 * n, |i, j| a[(i / 2, j / 2)] * b[i % 2][j % 2])
}

/// Diagonal of `S^z_site` over basis labels, as a vector.
pub fn sz_diagonal(geometry: &ChainGeometry, site: i64) -> Result<Vec<f64>> {
    let u = geometry.array_index(site)?;
    let n = geometry.sites();
    let bit = 1usize << (n - 1 - u);
    Ok((0..geometry.dim())
        .map(|idx| if idx & bit == 0 { 1.0 } else { -1.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, sample_disorder, DistributionSpec, DEFAULT_MAX_SITES};

    #[test]
    fn diagonal_matrix_spectrum() {
        let mut h = Matrix::zeros(3, 3);
        h[(0, 0)] = 3.0;
        h[(1, 1)] = 1.0;
        h[(2, 2)] = 2.0;
        let s = diagonalize(&h).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_analytic() {
        let mut h = Matrix::zeros(2, 2);
        h[(0, 0)] = 0.5;
        h[(1, 1)] = -0.5;
        h[(0, 1)] = 0.3;
        h[(1, 0)] = 0.3;
        let s = diagonalize(&h).unwrap();
        let lam = 0.34f64.sqrt();
        assert!((s.eigenvalues[0] + lam).abs() < 1e-14);
        assert!((s.eigenvalues[1] - lam).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut h = Matrix::zeros(2, 2);
        h[(0, 1)] = 1.0;
        assert!(matches!(diagonalize(&h), Err(CoreError::NotSymmetric(_))));
    }

    #[test]
    fn reconstruction_residual_small() {
        let g = crate::model::ChainGeometry::from_sites(6).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.1), &g, 5).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let s = diagonalize(&h).unwrap();
        let norm = s.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        assert!(s.reconstruction_error(&h, Par::Seq) <= 1e-9 * norm);
        assert!(linalg::orthogonality_error(&s.eigenvectors, Par::Seq) < 1e-10);
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        let g = crate::model::ChainGeometry::from_sites(5).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.2), &g, 17).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let s = diagonalize(&h).unwrap();
        let trace: f64 = (0..h.nrows()).map(|i| h[(i, i)]).sum();
        let sum: f64 = s.eigenvalues.iter().sum();
        let norm = s.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        assert!((trace - sum).abs() <= 1e-10 * norm.max(1.0));
    }

    #[test]
    fn min_spacing_examples() {
        assert_eq!(min_gap_of_sorted(&[1.0, 2.0, 4.0]).unwrap(), 1.0);
        assert_eq!(min_gap_of_sorted(&[0.0, 0.0, 5.0]).unwrap(), 0.0);
        assert!(min_gap_of_sorted(&[1.0]).is_err());
    }

    #[test]
    fn min_spacing_pigeonhole() {
        let g = crate::model::ChainGeometry::from_sites(4).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.05), &g, 23).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let s = diagonalize(&h).unwrap();
        let span = s.eigenvalues.last().unwrap() - s.eigenvalues.first().unwrap();
        let gap = min_level_spacing(&s).unwrap();
        assert!(gap <= span / (g.dim() - 1) as f64 + 1e-15);
    }

    #[test]
    fn expectation_identity_is_one() {
        let g = crate::model::ChainGeometry::from_sites(3).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.1), &g, 2).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let s = diagonalize(&h).unwrap();
        let id = linalg::identity(8);
        for alpha in 0..8 {
            assert!((eigenstate_expectation(&id, &s, alpha).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(eigenstate_expectation(&id, &s, 8).is_err());
    }

    #[test]
    fn expectation_classical_limit() {
        // gamma = 0: eigenstates are basis states, <S^z_0> = +-1 exactly
        let g = crate::model::ChainGeometry::from_sites(3).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.0), &g, 2).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let s = diagonalize(&h).unwrap();
        let sz0 = kron_operator(&[(0, PAULI_Z)], &g).unwrap();
        for alpha in 0..8 {
            let v = eigenstate_expectation(&sz0, &s, alpha).unwrap();
            assert!((v.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_two_path_consistency() {
        let g = crate::model::ChainGeometry::from_sites(2).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.3), &g, 77).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let s = diagonalize(&h).unwrap();
        let op = Matrix::from_fn(4, 4, |i, j| {
            let v = ((i * 3 + j * 7) % 11) as f64;
            let w = ((j * 3 + i * 7) % 11) as f64;
            0.5 * (v + w)
        });
        for alpha in 0..4 {
            let fast = eigenstate_expectation(&op, &s, alpha).unwrap();
            // independent path: explicit double loop in the other order
            let mut direct = 0.0;
            for j in 0..4 {
                for i in 0..4 {
                    direct += s.eigenvectors[(i, alpha)] * op[(i, j)] * s.eigenvectors[(j, alpha)];
                }
            }
            assert!((fast - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_single_site() {
        let g = crate::model::ChainGeometry::from_sites(1).unwrap();
        let z = kron_operator(&[(0, PAULI_Z)], &g).unwrap();
        assert_eq!(z[(0, 0)], 1.0);
        assert_eq!(z[(1, 1)], -1.0);
        assert_eq!(z[(0, 1)], 0.0);
    }

    #[test]
    fn kron_empty_is_identity() {
        let g = crate::model::ChainGeometry::from_sites(2).unwrap();
        let id = kron_operator(&[], &g).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(id[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn kron_two_site_product() {
        // S^z on both sites of a two-site chain [0, 1]: diag(1, -1, -1, 1)
        let g = ChainGeometry::new(0, 1);
        let zz = kron_operator(&[(0, PAULI_Z), (1, PAULI_Z)], &g).unwrap();
        let expect = [1.0, -1.0, -1.0, 1.0];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(zz[(i, i)], e);
        }
        assert!(kron_operator(&[(0, PAULI_Z), (0, PAULI_X)], &g).is_err());
    }

    #[test]
    fn kron_matches_hamiltonian_construction() {
        // independent construction of the full Hamiltonian by Kronecker sums
        let g = crate::model::ChainGeometry::from_sites(3).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.2), &g, 31).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let dim = g.dim();
        let mut alt = Matrix::zeros(dim, dim);
        let mut add = |m: &Matrix, c: f64| {
            for j in 0..dim {
                for i in 0..dim {
                    alt[(i, j)] += c * m[(i, j)];
                }
            }
        };
        for site in g.site_iter() {
            let u = g.array_index(site).unwrap();
            add(&kron_operator(&[(site, PAULI_Z)], &g).unwrap(), r.fields[u]);
            add(&kron_operator(&[(site, PAULI_X)], &g).unwrap(), r.gamma * r.transverse[u]);
        }
        for site in g.min_site()..g.max_site() {
            let w = (site - g.min_site()) as usize + 1;
            add(
                &kron_operator(&[(site, PAULI_Z), (site + 1, PAULI_Z)], &g).unwrap(),
                r.exchange[w],
            );
        }
        // frozen exterior: boundary fields J_{-K-1} S^z_{-K} and J_{K'} S^z_{K'}
        add(&kron_operator(&[(g.min_site(), PAULI_Z)], &g).unwrap(), r.exchange[0]);
        add(
            &kron_operator(&[(g.max_site(), PAULI_Z)], &g).unwrap(),
            r.exchange[g.sites()],
        );
        for j in 0..dim {
            for i in 0..dim {
                assert!(
                    (h[(i, j)] - alt[(i, j)]).abs() < 1e-15,
                    "entry ({i},{j}): {} vs {}",
                    h[(i, j)],
                    alt[(i, j)]
                );
            }
        }
    }

    #[test]
    fn sz_diagonal_matches_kron() {
        let g = crate::model::ChainGeometry::from_sites(3).unwrap();
        for site in g.site_iter() {
            let d = sz_diagonal(&g, site).unwrap();
            let m = kron_operator(&[(site, PAULI_Z)], &g).unwrap();
            for (idx, &v) in d.iter().enumerate() {
                assert_eq!(m[(idx, idx)], v);
            }
        }
    }
}
