//! Resonant blocks: connected resonant regions, their fattened buffers, and
//! the exact sector-wise rotations that diagonalize them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{self, Matrix, Par};
use crate::model::ChainGeometry;

/// A connected resonant region `B` with its fattened buffer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonantBlock {
    /// Resonant core sites, ascending.
    pub core: Vec<i64>,
    /// Core plus its neighborhood, clipped to the chain, ascending.
    pub fattened: Vec<i64>,
    /// Chain-metric diameter of the core.
    pub diameter: usize,
    /// Core volume |B|.
    pub volume: usize,
}

impl ResonantBlock {
    fn from_core(core: BTreeSet<i64>, radius: i64, geometry: &ChainGeometry) -> Self {
        let mut fattened = BTreeSet::new();
        for &s in &core {
            for t in s - radius..=s + radius {
                if geometry.contains(t) {
                    fattened.insert(t);
                }
            }
        }
        let diameter = (core.last().unwrap() - core.first().unwrap()) as usize;
        let volume = core.len();
        ResonantBlock {
            core: core.into_iter().collect(),
            fattened: fattened.into_iter().collect(),
            diameter,
            volume,
        }
    }

    pub fn covers(&self, geometry: &ChainGeometry) -> bool {
        self.fattened.len() == geometry.sites()
    }
}

fn set_distance(a: &BTreeSet<i64>, b: &BTreeSet<i64>) -> i64 {
    let mut best = i64::MAX;
    for &x in a {
        for &y in b {
            best = best.min((x - y).abs());
        }
    }
    best
}

/// Form blocks from the accumulated resonant pairs:
/// flip sets -> nearest-neighbor components -> volume-aware merge pass ->
/// fattening by `ceil(L_k)` -> union of touching fattened blocks.
pub fn form_blocks(
    resonant_pairs: &[(usize, usize)],
    geometry: &ChainGeometry,
    length_scale: f64,
    merge_constant: f64,
) -> Vec<ResonantBlock> {
    let n = geometry.sites();
    let mut site_set = BTreeSet::new();
    for &(a, b) in resonant_pairs {
        let mut diff = a ^ b;
        while diff != 0 {
            let bit = diff.trailing_zeros() as usize;
            site_set.insert(geometry.site_at(n - 1 - bit));
            diff &= diff - 1;
        }
    }
    if site_set.is_empty() {
        return Vec::new();
    }

    // nearest-neighbor connected components
    let mut cores: Vec<BTreeSet<i64>> = Vec::new();
    let mut current = BTreeSet::new();
    let mut prev: Option<i64> = None;
    for &s in &site_set {
        if let Some(p) = prev {
            if s - p > 1 {
                cores.push(std::mem::take(&mut current));
            }
        }
        current.insert(s);
        prev = Some(s);
    }
    cores.push(current);

    // merge pass: unite blocks of volumes V1 <= V2 within exp(c sqrt(V1)),
    // iterated to a fixed point
    loop {
        let mut merged = false;
        'outer: for i in 0..cores.len() {
            for j in i + 1..cores.len() {
                let v_min = cores[i].len().min(cores[j].len()) as f64;
                let reach = (merge_constant * v_min.sqrt()).exp();
                if (set_distance(&cores[i], &cores[j]) as f64) <= reach {
                    let other = cores.remove(j);
                    cores[i].extend(other);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    // fatten and unite touching or overlapping buffers
    let radius = length_scale.ceil() as i64;
    let mut blocks: Vec<ResonantBlock> = cores
        .into_iter()
        .map(|c| ResonantBlock::from_core(c, radius, geometry))
        .collect();
    blocks.sort_by_key(|b| b.fattened[0]);
    loop {
        let mut united = false;
        'outer: for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                let fi: BTreeSet<i64> = blocks[i].fattened.iter().copied().collect();
                let fj: BTreeSet<i64> = blocks[j].fattened.iter().copied().collect();
                if set_distance(&fi, &fj) <= 1 {
                    let other = blocks.remove(j);
                    let mut core: BTreeSet<i64> = blocks[i].core.iter().copied().collect();
                    core.extend(other.core);
                    blocks[i] = ResonantBlock::from_core(core, radius, geometry);
                    united = true;
                    break 'outer;
                }
            }
        }
        if !united {
            break;
        }
    }
    blocks.sort_by_key(|b| b.core[0]);
    blocks
}

/// Per-sector relabeling produced by a block rotation: for each configuration
/// of the exterior spins, `sector_maps[e][label] = eigenstate index` (by
/// ascending sector energy) assigned to that interior basis label.
#[derive(Clone, Debug)]
pub struct MetaspinMap {
    pub sites: Vec<i64>,
    pub sector_maps: Vec<Vec<u32>>,
}

/// Exact rotation of one fattened block: a direct sum over exterior sectors
/// of small eigenvector matrices, with metaspin labels assigned by greedy
/// maximum overlap.
#[derive(Clone, Debug)]
pub struct BlockRotation {
    /// Array indices of the interior (fattened) sites, ascending.
    pub interior: Vec<usize>,
    /// Global index lists per sector, each of length `2^|interior|`.
    pub sectors: Vec<Vec<usize>>,
    /// Sector rotation matrices, columns labeled by interior basis labels.
    pub sector_rotations: Vec<Matrix>,
    pub metaspin: MetaspinMap,
}

impl BlockRotation {
    /// Materialize the full orthogonal matrix O (identity nowhere: the
    /// sectors partition all indices).
    pub fn matrix(&self, dim: usize) -> Matrix {
        let mut o = Matrix::zeros(dim, dim);
        for (indices, rot) in self.sectors.iter().zip(&self.sector_rotations) {
            let m = indices.len();
            for b in 0..m {
                for a in 0..m {
                    o[(indices[a], indices[b])] = rot[(a, b)];
                }
            }
        }
        o
    }
}

/// Diagonalize the interior of a fattened block exactly, sector by sector.
///
/// Interior couplings are exactly the entries of `h` whose labels agree
/// outside the block. Labels are reassigned by greedy maximum overlap with
/// the incoming basis, ties broken by ascending energy.
pub fn block_rotation(
    h: &Matrix,
    block: &ResonantBlock,
    geometry: &ChainGeometry,
) -> Result<BlockRotation> {
    let n = geometry.sites();
    let dim = geometry.dim();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(CoreError::ShapeMismatch(format!(
            "hamiltonian is {}x{}, geometry dimension is {dim}",
            h.nrows(),
            h.ncols()
        )));
    }
    if block.fattened.is_empty() {
        return Err(CoreError::InvalidArgument("block has an empty fattened set".into()));
    }
    let interior: Vec<usize> = block
        .fattened
        .iter()
        .map(|&s| geometry.array_index(s))
        .collect::<Result<_>>()?;
    let int_bits: Vec<usize> = interior.iter().map(|&u| geometry.bit_of(u)).collect();
    let ext_bits: Vec<usize> = (0..n)
        .filter(|&u| !interior.contains(&u))
        .map(|u| geometry.bit_of(u))
        .collect();
    let m = int_bits.len();
    let sector_dim = 1usize << m;
    let sector_count = 1usize << ext_bits.len();

    let spread = |pattern: usize, bits: &[usize]| -> usize {
        let mut out = 0usize;
        for (pos, &bit) in bits.iter().enumerate() {
            if (pattern >> pos) & 1 == 1 {
                out |= 1 << bit;
            }
        }
        out
    };

    let mut sectors = Vec::with_capacity(sector_count);
    let mut rotations = Vec::with_capacity(sector_count);
    let mut sector_maps = Vec::with_capacity(sector_count);
    let mut sub = Matrix::zeros(sector_dim, sector_dim);
    for e in 0..sector_count {
        let ext_part = spread(e, &ext_bits);
        let indices: Vec<usize> = (0..sector_dim).map(|b| ext_part | spread(b, &int_bits)).collect();
        for b in 0..sector_dim {
            for a in 0..sector_dim {
                sub[(a, b)] = h[(indices[a], indices[b])];
            }
        }
        let (values, vectors) = linalg::eigh(&sub, Par::Seq)
            .map_err(|e| CoreError::EigenFailure(format!("block sector: {e}")))?;
        let (rot, map) = assign_metaspins(&values, &vectors);
        sectors.push(indices);
        rotations.push(rot);
        sector_maps.push(map);
    }

    Ok(BlockRotation {
        interior,
        sectors,
        sector_rotations: rotations,
        metaspin: MetaspinMap {
            sites: block.fattened.clone(),
            sector_maps,
        },
    })
}

/// Greedy maximum-overlap assignment of eigenvectors (ascending energy) to
/// basis labels. Returns the relabeled rotation matrix (column `j` holds the
/// eigenvector assigned to label `j`, sign-fixed) and the label -> eigenstate
/// map.
fn assign_metaspins(values: &[f64], vectors: &Matrix) -> (Matrix, Vec<u32>) {
    let dim = values.len();
    let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(dim * dim);
    for alpha in 0..dim {
        for label in 0..dim {
            candidates.push((alpha, label));
        }
    }
    // descending overlap, ties by ascending energy (alpha is energy-ordered),
    // then by label for full determinism
    candidates.sort_by(|&(a1, l1), &(a2, l2)| {
        let w1 = vectors[(l1, a1)].abs();
        let w2 = vectors[(l2, a2)].abs();
        w2.total_cmp(&w1).then(a1.cmp(&a2)).then(l1.cmp(&l2))
    });
    let mut label_of_alpha = vec![usize::MAX; dim];
    let mut alpha_of_label = vec![usize::MAX; dim];
    let mut assigned = 0;
    for (alpha, label) in candidates {
        if label_of_alpha[alpha] == usize::MAX && alpha_of_label[label] == usize::MAX {
            label_of_alpha[alpha] = label;
            alpha_of_label[label] = alpha;
            assigned += 1;
            if assigned == dim {
                break;
            }
        }
    }
    let mut rot = Matrix::zeros(dim, dim);
    for label in 0..dim {
        let alpha = alpha_of_label[label];
        // sign convention: overlap with the assigned label is nonnegative
        let mut sign = vectors[(label, alpha)];
        if sign == 0.0 {
            sign = (0..dim)
                .map(|i| vectors[(i, alpha)])
                .find(|v| *v != 0.0)
                .unwrap_or(1.0);
        }
        let sign = if sign < 0.0 { -1.0 } else { 1.0 };
        for i in 0..dim {
            rot[(i, label)] = sign * vectors[(i, alpha)];
        }
    }
    (rot, alpha_of_label.into_iter().map(|a| a as u32).collect())
}

/// Apply `O^T h O` in place, sector by sector.
pub fn apply_block_rotation(h: &mut Matrix, rot: &BlockRotation, par: Par) {
    let dim = h.nrows();
    // rows: h[I_e, :] <- O_e^T h[I_e, :]
    for (indices, o) in rot.sectors.iter().zip(&rot.sector_rotations) {
        let m = indices.len();
        let mut gathered = Matrix::zeros(m, dim);
        for (a, &idx) in indices.iter().enumerate() {
            for col in 0..dim {
                gathered[(a, col)] = h[(idx, col)];
            }
        }
        let transformed = linalg::mat_tmul(o, &gathered, par);
        for (a, &idx) in indices.iter().enumerate() {
            for col in 0..dim {
                h[(idx, col)] = transformed[(a, col)];
            }
        }
    }
    // columns: h[:, I_e] <- h[:, I_e] O_e
    apply_block_rotation_right(h, rot, par);
}

/// Apply `u <- u O` in place (columns only).
pub fn apply_block_rotation_right(u: &mut Matrix, rot: &BlockRotation, par: Par) {
    let dim = u.nrows();
    for (indices, o) in rot.sectors.iter().zip(&rot.sector_rotations) {
        let m = indices.len();
        let mut gathered = Matrix::zeros(dim, m);
        for (b, &idx) in indices.iter().enumerate() {
            for row in 0..dim {
                gathered[(row, b)] = u[(row, idx)];
            }
        }
        let transformed = linalg::mat_mul(&gathered, o, par);
        for (b, &idx) in indices.iter().enumerate() {
            for row in 0..dim {
                u[(row, idx)] = transformed[(row, b)];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, sample_disorder, DistributionSpec, DEFAULT_MAX_SITES};

    fn pair_for_sites(geometry: &ChainGeometry, sites: &[i64]) -> (usize, usize) {
        let mut b = 0usize;
        for &s in sites {
            b |= 1 << geometry.bit_of(geometry.array_index(s).unwrap());
        }
        (0, b)
    }

    #[test]
    fn blocks_from_spec_example() {
        // resonant sites {3,4,7} on a wide chain, L_k = 1, c -> 0:
        // cores {3,4} and {7}; fattened {2..5} and {6..8} unite into {2..8}
        let g = ChainGeometry::new(0, 10);
        let pairs = vec![pair_for_sites(&g, &[3, 4]), pair_for_sites(&g, &[7])];
        let blocks = form_blocks(&pairs, &g, 1.0, 1e-9);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].core, vec![3, 4, 7]);
        assert_eq!(blocks[0].fattened, (2..=8).collect::<Vec<_>>());
    }

    #[test]
    fn blocks_empty_without_resonances() {
        let g = ChainGeometry::from_sites(6).unwrap();
        assert!(form_blocks(&[], &g, 1.0, 1.0).is_empty());
    }

    #[test]
    fn merge_rule_arithmetic() {
        // volumes 1 and 4 at distance 2, c = 1: exp(1) = 2.718 >= 2 -> merged
        let g = ChainGeometry::new(0, 12);
        let pairs = vec![
            pair_for_sites(&g, &[0]),
            pair_for_sites(&g, &[2, 3, 4, 5]),
        ];
        let blocks = form_blocks(&pairs, &g, 0.0, 1.0);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].core, vec![0, 2, 3, 4, 5]);
        assert_eq!(blocks[0].volume, 5);
        assert_eq!(blocks[0].diameter, 5);
        // with c = 0 the reach is exp(0) = 1 < 2, no merge; and with L_k = 0
        // the fattened sets {0} and {2..5} have gap 2, so they stay apart
        let blocks = form_blocks(&pairs, &g, 0.0, 0.0);
        assert_eq!(blocks.len(), 2);
    }

    #[test]
    fn blocks_monotone_under_added_pairs() {
        let g = ChainGeometry::new(0, 10);
        let base = vec![pair_for_sites(&g, &[1, 2])];
        let more = vec![pair_for_sites(&g, &[1, 2]), pair_for_sites(&g, &[5])];
        let b0 = form_blocks(&base, &g, 1.0, 1.0);
        let b1 = form_blocks(&more, &g, 1.0, 1.0);
        // every site covered before stays covered
        let covered0: BTreeSet<i64> = b0.iter().flat_map(|b| b.core.iter().copied()).collect();
        let covered1: BTreeSet<i64> = b1.iter().flat_map(|b| b.core.iter().copied()).collect();
        assert!(covered0.is_subset(&covered1));
    }

    #[test]
    fn rotation_of_diagonal_matrix_is_identity() {
        let g = ChainGeometry::from_sites(3).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.0), &g, 5).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let block = ResonantBlock {
            core: vec![0],
            fattened: vec![-1, 0, 1],
            diameter: 0,
            volume: 1,
        };
        let rot = block_rotation(&h, &block, &g).unwrap();
        let o = rot.matrix(g.dim());
        for j in 0..g.dim() {
            for i in 0..g.dim() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((o[(i, j)] - expect).abs() < 1e-12);
            }
        }
        // the recorded map is the energy-rank permutation of each sector's
        // diagonal; labels themselves are unchanged (O = I)
        for (indices, map) in rot.sectors.iter().zip(&rot.metaspin.sector_maps) {
            let mut energies: Vec<(f64, usize)> = indices
                .iter()
                .enumerate()
                .map(|(label, &idx)| (h[(idx, idx)], label))
                .collect();
            energies.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (label, &alpha) in map.iter().enumerate() {
                assert_eq!(energies[alpha as usize].1, label);
            }
        }
    }

    #[test]
    fn single_site_block_closed_form() {
        // n=2 chain, block interior = site 0 only: each sector is a 2x2
        // rotation by 0.5 * atan(coupling / field-difference-half)
        let g = ChainGeometry::new(1, 0); // sites -1, 0
        let r = DisorderRealization_for_closed_form(&g);
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let block = ResonantBlock {
            core: vec![0],
            fattened: vec![0],
            diameter: 0,
            volume: 1,
        };
        let rot = block_rotation(&h, &block, &g).unwrap();
        assert_eq!(rot.sectors.len(), 2);
        let o = rot.matrix(4);
        assert!(linalg::orthogonality_error(&o, Par::Seq) < 1e-12);
        // each sector block is [[cos t, -sin t], [sin t, cos t]]-like with
        // t = 0.5 atan(0.3 / 0.5); check the mixing angle magnitude
        let t = 0.5 * (0.3f64 / 0.5).atan();
        for sector in 0..2 {
            let m = &rot.sector_rotations[sector];
            assert!((m[(0, 0)].abs() - t.cos()).abs() < 1e-10);
            assert!((m[(1, 0)].abs() - t.sin()).abs() < 1e-10);
        }
    }

    fn DisorderRealization_for_closed_form(g: &ChainGeometry) -> crate::model::DisorderRealization {
        // site -1 has zero couplings; site 0 has field 0.5 and transverse 0.3
        crate::model::DisorderRealization {
            geometry: *g,
            fields: vec![0.0, 0.5],
            transverse: vec![0.0, 1.0],
            exchange: vec![0.0, 0.0, 0.0],
            gamma: 0.3,
        }
    }

    #[test]
    fn full_chain_block_matches_oracle() {
        let g = ChainGeometry::from_sites(4).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.3), &g, 21).unwrap();
        let mut h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let block = ResonantBlock {
            core: g.site_iter().collect(),
            fattened: g.site_iter().collect(),
            diameter: g.sites() - 1,
            volume: g.sites(),
        };
        let oracle = crate::oracle::diagonalize(&h).unwrap();
        let rot = block_rotation(&h, &block, &g).unwrap();
        assert!(rot.covers_all(g.dim()));
        apply_block_rotation(&mut h, &rot, Par::Seq);
        assert!(linalg::max_abs_offdiag(&h) < 1e-12);
        let mut diag: Vec<f64> = (0..g.dim()).map(|i| h[(i, i)]).collect();
        diag.sort_by(f64::total_cmp);
        let norm = oracle.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        for (a, b) in diag.iter().zip(&oracle.eigenvalues) {
            assert!((a - b).abs() <= 1e-10 * norm.max(1.0));
        }
    }

    #[test]
    fn sector_application_matches_dense_conjugation() {
        let g = ChainGeometry::from_sites(4).unwrap();
        let r = sample_disorder(&DistributionSpec::uniform_unit(0.2), &g, 33).unwrap();
        let h = build_hamiltonian(&r, DEFAULT_MAX_SITES).unwrap();
        let block = ResonantBlock {
            core: vec![0],
            fattened: vec![-1, 0],
            diameter: 0,
            volume: 1,
        };
        let rot = block_rotation(&h, &block, &g).unwrap();
        let o = rot.matrix(g.dim());
        let dense = linalg::conjugate(&h, &o, Par::Seq);
        let mut sector = h.clone();
        apply_block_rotation(&mut sector, &rot, Par::Seq);
        for j in 0..g.dim() {
            for i in 0..g.dim() {
                assert!((dense[(i, j)] - sector[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
