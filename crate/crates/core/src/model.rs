//! Disordered-chain model: geometry, couplings, classical energies, the
//! single-flip energy change, the first-step resonance test, and the dense
//! transverse-field Hamiltonian.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * sites live on the interval `[-K, K']`; spins outside are frozen to `+1`;
//! * a basis state is a bit pattern in `0..2^n` with the leftmost site `-K`
//!   stored in the most significant bit; bit value 0 means spin `+1`, bit
//!   value 1 means spin `-1`;
//! * the transverse coupling at site `i` is `gamma * Gamma_i`.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::Matrix;
use crate::rng::Stream;

/// Default cap on the number of sites for dense-matrix construction.
pub const DEFAULT_MAX_SITES: usize = 14;

/// Chain interval `[-K, K']`; `n = K + K' + 1` sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainGeometry {
    left_end: usize,
    right_end: usize,
}

impl ChainGeometry {
    pub fn new(left_end: usize, right_end: usize) -> Self {
        Self { left_end, right_end }
    }

    /// Geometry with `n` sites placed so that site 0 exists and the chain is
    /// as balanced as possible: `K = n - 1 - (n - 1) / 2`, `K' = (n - 1) / 2`.
    pub fn from_sites(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidArgument("chain needs at least one site".into()));
        }
        let right = (n - 1) / 2;
        Ok(Self::new(n - 1 - right, right))
    }

    pub fn left_end(&self) -> usize {
        self.left_end
    }

    pub fn right_end(&self) -> usize {
        self.right_end
    }

    /// Number of sites `n`.
    pub fn sites(&self) -> usize {
        self.left_end + self.right_end + 1
    }

    /// Basis dimension `2^n`.
    pub fn dim(&self) -> usize {
        1usize << self.sites()
    }

    pub fn min_site(&self) -> i64 {
        -(self.left_end as i64)
    }

    pub fn max_site(&self) -> i64 {
        self.right_end as i64
    }

    pub fn contains(&self, site: i64) -> bool {
        site >= self.min_site() && site <= self.max_site()
    }

    /// Sites in order, `-K ..= K'`.
    pub fn site_iter(&self) -> impl Iterator<Item = i64> {
        self.min_site()..=self.max_site()
    }

    /// Array index `0..n` of a site.
    pub fn array_index(&self, site: i64) -> Result<usize> {
        if !self.contains(site) {
            return Err(CoreError::SiteOutOfRange {
                site,
                lo: self.min_site(),
                hi: self.max_site(),
            });
        }
        Ok((site - self.min_site()) as usize)
    }

    /// Site at array index `u`.
    pub fn site_at(&self, u: usize) -> i64 {
        self.min_site() + u as i64
    }

    /// Bit position of array index `u` inside a basis label (site `-K` is the
    /// most significant bit).
    #[inline]
    pub fn bit_of(&self, u: usize) -> usize {
        self.sites() - 1 - u
    }

    pub fn check_cap(&self, max_sites: usize) -> Result<()> {
        let n = self.sites();
        if n > max_sites || n >= usize::BITS as usize - 1 {
            return Err(CoreError::DimensionCap { n, cap: max_sites });
        }
        Ok(())
    }
}

/// Spin value (+1.0 or -1.0) of array site `u` inside basis label `index`.
#[inline]
pub fn spin_value(index: usize, n: usize, u: usize) -> f64 {
    1.0 - 2.0 * ((index >> (n - 1 - u)) & 1) as f64
}

/// Classical basis label: one spin configuration of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    bits: u64,
    n: u32,
}

impl SpinConfiguration {
    pub fn from_index(index: u64, geometry: &ChainGeometry) -> Result<Self> {
        let n = geometry.sites();
        if index >= (1u64 << n) {
            return Err(CoreError::ShapeMismatch(format!(
                "basis index {index} out of range for {n} sites"
            )));
        }
        Ok(Self { bits: index, n: n as u32 })
    }

    /// Build from explicit spins listed by site, `-K` first.
    pub fn from_spins(spins: &[i8], geometry: &ChainGeometry) -> Result<Self> {
        let n = geometry.sites();
        if spins.len() != n {
            return Err(CoreError::ShapeMismatch(format!(
                "{} spins for {} sites",
                spins.len(),
                n
            )));
        }
        let mut bits = 0u64;
        for (u, &s) in spins.iter().enumerate() {
            match s {
                1 => {}
                -1 => bits |= 1 << (n - 1 - u),
                _ => {
                    return Err(CoreError::InvalidArgument(format!(
                        "spin value {s} is not +1 or -1"
                    )))
                }
            }
        }
        Ok(Self { bits, n: n as u32 })
    }

    pub fn index(&self) -> u64 {
        self.bits
    }

    pub fn sites(&self) -> usize {
        self.n as usize
    }

    /// Spin at array index `u`.
    #[inline]
    pub fn spin_at(&self, u: usize) -> i8 {
        if (self.bits >> (self.n as usize - 1 - u)) & 1 == 0 {
            1
        } else {
            -1
        }
    }

    /// Spin at a site, by paper index.
    pub fn spin(&self, geometry: &ChainGeometry, site: i64) -> Result<i8> {
        Ok(self.spin_at(geometry.array_index(site)?))
    }

    /// Configuration with the spin at array index `u` flipped.
    pub fn flipped_at(&self, u: usize) -> Self {
        Self {
            bits: self.bits ^ (1 << (self.n as usize - 1 - u)),
            n: self.n,
        }
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.sites()).map(|u| self.spin_at(u)).collect()
    }
}

/// One bounded coupling density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Density {
    Uniform { lo: f64, hi: f64 },
    Point { value: f64 },
}

impl Density {
    pub fn uniform_unit() -> Self {
        Density::Uniform { lo: -1.0, hi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Density::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(CoreError::InvalidDistribution(
                        "uniform bounds must be finite".into(),
                    ));
                }
                if hi <= lo {
                    return Err(CoreError::InvalidDistribution(format!(
                        "uniform density has zero or negative width [{lo}, {hi}]; \
                         use a point mass for degenerate couplings"
                    )));
                }
                Ok(())
            }
            Density::Point { value } => {
                if !value.is_finite() {
                    return Err(CoreError::InvalidDistribution(
                        "point mass must be finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn sample(&self, stream: &mut Stream) -> f64 {
        match *self {
            Density::Uniform { lo, hi } => stream.uniform(lo, hi),
            Density::Point { value } => value,
        }
    }
}

/// Coupling distributions plus the global transverse scale gamma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    /// Longitudinal fields h_i.
    pub field: Density,
    /// Transverse amplitudes Gamma_i (multiplied by gamma).
    pub transverse: Density,
    /// Exchange couplings J_i.
    pub exchange: Density,
    /// Global transverse scale.
    pub gamma: f64,
}

impl DistributionSpec {
    /// All couplings uniform on [-1, 1].
    pub fn uniform_unit(gamma: f64) -> Self {
        Self {
            field: Density::uniform_unit(),
            transverse: Density::uniform_unit(),
            exchange: Density::uniform_unit(),
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.transverse.validate()?;
        self.exchange.validate()?;
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(CoreError::InvalidDistribution(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}

/// One disorder sample: all couplings of one Hamiltonian instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub geometry: ChainGeometry,
    /// h_i by array index, length n.
    pub fields: Vec<f64>,
    /// Gamma_i by array index, length n.
    pub transverse: Vec<f64>,
    /// J_i for bonds (i, i+1), i = -K-1 ..= K'; array index `w` couples array
    /// sites `w-1` and `w`, with the exterior at `w = 0` and `w = n`.
    pub exchange: Vec<f64>,
    pub gamma: f64,
}

impl DisorderRealization {
    pub fn sites(&self) -> usize {
        self.geometry.sites()
    }

    /// Field h_i by paper site index.
    pub fn field(&self, site: i64) -> Result<f64> {
        Ok(self.fields[self.geometry.array_index(site)?])
    }

    /// Exchange J_i of the bond (i, i+1) by paper bond index.
    pub fn bond(&self, bond: i64) -> Result<f64> {
        let lo = self.geometry.min_site() - 1;
        let hi = self.geometry.max_site();
        if bond < lo || bond > hi {
            return Err(CoreError::SiteOutOfRange { site: bond, lo, hi });
        }
        Ok(self.exchange[(bond - lo) as usize])
    }

    /// Fields with the frozen exterior folded in as boundary shifts:
    /// `h_{-K} + J_{-K-1}` and `h_{K'} + J_{K'}`.
    pub fn effective_fields(&self) -> Vec<f64> {
        let n = self.sites();
        let mut h = self.fields.clone();
        h[0] += self.exchange[0];
        h[n - 1] += self.exchange[n];
        h
    }
}

/// Draw one disorder realization. Pure function of its arguments.
pub fn sample_disorder(
    dist: &DistributionSpec,
    geometry: &ChainGeometry,
    seed: u64,
) -> Result<DisorderRealization> {
    dist.validate()?;
    let n = geometry.sites();
    let mut stream = Stream::new(seed);
    let fields = (0..n).map(|_| dist.field.sample(&mut stream)).collect();
    let transverse = (0..n).map(|_| dist.transverse.sample(&mut stream)).collect();
    let exchange = (0..=n).map(|_| dist.exchange.sample(&mut stream)).collect();
    Ok(DisorderRealization {
        geometry: *geometry,
        fields,
        transverse,
        exchange,
        gamma: dist.gamma,
    })
}

/// Classical (diagonal) energy of a configuration:
/// `sum_i h_i s_i + sum_bonds J s s'` with exterior spins frozen to +1.
pub fn classical_energy(real: &DisorderRealization, sigma: &SpinConfiguration) -> Result<f64> {
    let n = real.sites();
    if sigma.sites() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "configuration has {} sites, realization has {n}",
            sigma.sites()
        )));
    }
    Ok(classical_energy_of_index(real, sigma.index() as usize))
}

#[inline]
fn classical_energy_of_index(real: &DisorderRealization, index: usize) -> f64 {
    let n = real.sites();
    // frozen exterior spins enter as boundary field shifts: h_{-K} + J_{-K-1}
    // on the left, J_{K'} * s_{K'} on the right
    let mut prev = spin_value(index, n, 0);
    let mut e = (real.fields[0] + real.exchange[0]) * prev;
    for u in 1..n {
        let s = spin_value(index, n, u);
        e += real.fields[u] * s + real.exchange[u] * prev * s;
        prev = s;
    }
    e + real.exchange[n] * prev
}

/// Diagonal of the Hamiltonian: classical energies of all `2^n` labels.
pub fn classical_energies(real: &DisorderRealization) -> Vec<f64> {
    let dim = real.geometry.dim();
    (0..dim).map(|idx| classical_energy_of_index(real, idx)).collect()
}

/// Energy change of flipping the spin at `site`:
/// `2 s_i (h_i + J_i s_{i+1} + J_{i-1} s_{i-1})`, exterior spins +1.
///
/// Equals `classical_energy(sigma) - classical_energy(sigma with site flipped)`
/// identically.
pub fn single_flip_delta(
    real: &DisorderRealization,
    sigma: &SpinConfiguration,
    site: i64,
) -> Result<f64> {
    let n = real.sites();
    if sigma.sites() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "configuration has {} sites, realization has {n}",
            sigma.sites()
        )));
    }
    let u = real.geometry.array_index(site)?;
    Ok(single_flip_delta_at(real, sigma.index() as usize, u))
}

#[inline]
pub(crate) fn single_flip_delta_at(real: &DisorderRealization, index: usize, u: usize) -> f64 {
    let n = real.sites();
    let s = spin_value(index, n, u);
    let left = if u == 0 { 1.0 } else { spin_value(index, n, u - 1) };
    let right = if u == n - 1 { 1.0 } else { spin_value(index, n, u + 1) };
    2.0 * s * (real.fields[u] + real.exchange[u + 1] * right + real.exchange[u] * left)
}

/// First-step resonance test: is there a neighbor configuration with
/// `|Delta E_i| < eps`? Frozen exterior neighbors contribute a fixed +1.
pub fn is_resonant_site(real: &DisorderRealization, site: i64, eps: f64) -> Result<bool> {
    let u = real.geometry.array_index(site)?;
    let n = real.sites();
    let h = real.fields[u];
    let j_left = real.exchange[u];
    let j_right = real.exchange[u + 1];
    let left_choices: &[f64] = if u == 0 { &[1.0] } else { &[-1.0, 1.0] };
    let right_choices: &[f64] = if u == n - 1 { &[1.0] } else { &[-1.0, 1.0] };
    for &sl in left_choices {
        for &sr in right_choices {
            if (2.0 * (h + j_right * sr + j_left * sl)).abs() < eps {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Dense `2^n x 2^n` Hamiltonian: classical energies on the diagonal,
/// `gamma * Gamma_i` on every single-flip pair.
pub fn build_hamiltonian(real: &DisorderRealization, max_sites: usize) -> Result<Matrix> {
    real.geometry.check_cap(max_sites)?;
    let n = real.sites();
    let dim = real.geometry.dim();
    let mut h = Matrix::zeros(dim, dim);
    let energies = classical_energies(real);
    for (idx, &e) in energies.iter().enumerate() {
        h[(idx, idx)] = e;
    }
    for u in 0..n {
        let coupling = real.gamma * real.transverse[u];
        let bit = 1usize << (n - 1 - u);
        for idx in 0..dim {
            h[(idx, idx ^ bit)] = coupling;
        }
    }
    Ok(h)
}
