//! Nambu (Bogoliubov-de Gennes) representation of the transverse-field Ising
//! ring after a Jordan-Wigner mapping.
//!
//! The Nambu vector is `(c_1 .. c_N, c_1^† .. c_N^†)`. A quadratic fermion
//! Hamiltonian `Ψ^† ℍ Ψ` is then a `2N × 2N` Hermitian matrix
//! `[[A, B], [-B, -A]]` with `A` real symmetric and `B` real antisymmetric.
//! With this normalisation `Ψ^† ℍ Ψ` equals the spin Hamiltonian exactly, with
//! no constant offset, so traces against `ℍ` are many-body energies.

mod gap;
pub mod precise;
mod spectrum;

pub use gap::{
    bottleneck, gap_point, gap_scan, gap_scan_with, locate_minimum, many_body_gap, sector_gap,
    sector_levels, Bottleneck, GapKind, GapPoint, GapScan, SectorLevels, BOTTLENECK_GRID, EXTENDED_THRESHOLD,
};
pub(crate) use spectrum::sorted_svd;
pub use spectrum::{diagonalize, majorana_map, majorana_orthogonal, majorana_parity, BdgSpectrum, ZERO_MODE_TOL};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub(crate) const HERMITIAN_TOL: f64 = 1e-12;
pub(crate) const UNITARY_TOL: f64 = 1e-10;

/// An Ising ring: `H_z = -Σ J_j σ^z_j σ^z_{j+1}` (site `N+1 ≡ 1`) and
/// `H_x = -h Σ σ^x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub n_sites: usize,
    /// `couplings[j-1]` is the bond between sites `j` and `j+1`.
    pub couplings: Vec<f64>,
    pub field_h: f64,
    #[serde(default)]
    pub label: String,
}

impl CouplingConfig {
    pub fn new(couplings: Vec<f64>, field_h: f64, label: impl Into<String>) -> Result<Self> {
        let cfg = CouplingConfig {
            n_sites: couplings.len(),
            couplings,
            field_h,
            label: label.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::config(format!(
                "a ring needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if self.couplings.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: self.couplings.len(),
            });
        }
        if !self.field_h.is_finite() || self.couplings.iter().any(|j| !j.is_finite()) {
            return Err(Error::config("couplings and field must be finite"));
        }
        Ok(())
    }

    pub fn with_field(mut self, h: f64) -> Self {
        self.field_h = h;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n_sites
    }

    /// Fermion parity of the ground state of `H_x`: the empty state for
    /// `h > 0`, the filled one (parity `(-1)^N`) for `h < 0`. The circuit
    /// never leaves this sector.
    pub fn initial_parity(&self) -> FermionParity {
        if self.field_h < 0.0 && self.n_sites % 2 == 1 {
            FermionParity::Odd
        } else {
            FermionParity::Even
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FermionParity {
    Even,
    Odd,
}

impl FermionParity {
    /// `(-1)^p`.
    pub fn sign(self) -> f64 {
        match self {
            FermionParity::Even => 1.0,
            FermionParity::Odd => -1.0,
        }
    }

    pub fn from_sign(sign: f64) -> Self {
        if sign < 0.0 {
            FermionParity::Odd
        } else {
            FermionParity::Even
        }
    }

    pub fn flip(self) -> Self {
        match self {
            FermionParity::Even => FermionParity::Odd,
            FermionParity::Odd => FermionParity::Even,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FermionParity::Even => "even",
            FermionParity::Odd => "odd",
        }
    }
}

impl std::fmt::Display for FermionParity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Hermitian,
    Unitary,
}

/// A dense `2N × 2N` complex matrix in Nambu ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct NambuMatrix {
    entries: CMatrix,
    kind: MatrixKind,
}

impl NambuMatrix {
    pub fn hermitian(entries: CMatrix) -> Result<Self> {
        check_even_square(&entries)?;
        let dev = hermiticity_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotStructured {
                kind: "Hermitian",
                deviation: dev,
            });
        }
        Ok(NambuMatrix {
            entries,
            kind: MatrixKind::Hermitian,
        })
    }

    pub fn unitary(entries: CMatrix) -> Result<Self> {
        check_even_square(&entries)?;
        let dev = unitarity_deviation(&entries);
        if dev > UNITARY_TOL {
            return Err(Error::NotStructured {
                kind: "unitary",
                deviation: dev,
            });
        }
        Ok(NambuMatrix {
            entries,
            kind: MatrixKind::Unitary,
        })
    }

    pub(crate) fn from_parts_unchecked(entries: CMatrix, kind: MatrixKind) -> Self {
        NambuMatrix { entries, kind }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of fermionic modes `N`.
    pub fn n_modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    /// `N × N` block `(row, col)` with `row, col ∈ {0, 1}`.
    pub fn block(&self, row: usize, col: usize) -> CMatrix {
        let n = self.n_modes();
        self.entries.view((row * n, col * n), (n, n)).into_owned()
    }

    /// Largest deviation from the particle-hole pattern appropriate for the
    /// matrix kind: `[[A, B], [-B*, -A*]]` for generators, `[[U, V*], [V, U*]]`
    /// for evolutions.
    pub fn particle_hole_deviation(&self) -> f64 {
        let n = self.n_modes();
        let e = &self.entries;
        let sign = match self.kind {
            MatrixKind::Hermitian => -1.0,
            MatrixKind::Unitary => 1.0,
        };
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                dev = dev.max((e[(n + i, n + j)] - e[(i, j)].conj() * sign).norm());
                dev = dev.max((e[(n + i, j)] - e[(i, n + j)].conj() * sign).norm());
            }
        }
        dev
    }
}

fn check_even_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() % 2 != 0 || m.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: 2 * (m.nrows() / 2).max(1),
            found: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub(crate) fn unitarity_deviation(m: &CMatrix) -> f64 {
    let prod = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// The Green's function of the initial vacuum, `diag(0_N, 1_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GammaMatrix {
    n: usize,
}

impl GammaMatrix {
    pub fn new(n: usize) -> Self {
        GammaMatrix { n }
    }

    pub fn matrix(&self) -> CMatrix {
        let mut g = CMatrix::zeros(2 * self.n, 2 * self.n);
        for j in self.n..2 * self.n {
            g[(j, j)] = C64::new(1.0, 0.0);
        }
        g
    }

    /// `Tr(M Γ)`: the sum of the lower-right diagonal of `M`.
    pub fn trace_with(&self, m: &CMatrix) -> C64 {
        (self.n..2 * self.n).map(|j| m[(j, j)]).sum()
    }

    /// Frobenius norm of `[Γ, W]`.
    pub fn commutator_norm(&self, w: &CMatrix) -> f64 {
        let g = self.matrix();
        (&g * w - w * &g).norm()
    }
}

/// Real `A` and `B` blocks of `s ℍ_z + (1-s) ℍ_x` in the given parity sector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealBlocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl RealBlocks {
    pub fn new(config: &CouplingConfig, s: f64, parity: FermionParity) -> Self {
        let n = config.n_sites;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DMatrix::<f64>::zeros(n, n);
        for j in 0..n - 1 {
            let half = 0.5 * s * config.couplings[j];
            a[(j, j + 1)] -= half;
            a[(j + 1, j)] -= half;
            b[(j, j + 1)] -= half;
            b[(j + 1, j)] += half;
        }
        // The closing bond picks up (-1)^p from the Jordan-Wigner string.
        let edge = parity.sign() * 0.5 * s * config.couplings[n - 1];
        a[(n - 1, 0)] += edge;
        a[(0, n - 1)] += edge;
        b[(n - 1, 0)] += edge;
        b[(0, n - 1)] -= edge;
        for j in 0..n {
            a[(j, j)] += (1.0 - s) * config.field_h;
        }
        RealBlocks { a, b }
    }

    /// `A - B`, whose singular values are the quasiparticle energies.
    pub fn svd_matrix(&self) -> DMatrix<f64> {
        &self.a - &self.b
    }

    pub fn to_nambu(&self) -> NambuMatrix {
        let n = self.a.nrows();
        let mut m = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (self.a[(i, j)], self.b[(i, j)]);
                m[(i, j)] = C64::new(a, 0.0);
                m[(i, n + j)] = C64::new(b, 0.0);
                m[(n + i, j)] = C64::new(-b, 0.0);
                m[(n + i, n + j)] = C64::new(-a, 0.0);
            }
        }
        NambuMatrix::from_parts_unchecked(m, MatrixKind::Hermitian)
    }
}

/// `ℍ_x = diag(h·1, -h·1)`.
pub fn build_hx(config: &CouplingConfig) -> Result<NambuMatrix> {
    config.validate()?;
    Ok(RealBlocks::new(config, 0.0, FermionParity::Even).to_nambu())
}

/// `ℍ_z = [[A_z, B_z], [-B_z, -A_z]]` with the parity-dependent closing bond.
pub fn build_hz(config: &CouplingConfig, parity: FermionParity) -> Result<NambuMatrix> {
    config.validate()?;
    Ok(RealBlocks::new(config, 1.0, parity).to_nambu())
}

/// `ℍ(s) = s ℍ_z + (1-s) ℍ_x`.
pub fn build_h(config: &CouplingConfig, s: f64, parity: FermionParity) -> Result<NambuMatrix> {
    config.validate()?;
    check_s(s)?;
    Ok(RealBlocks::new(config, s, parity).to_nambu())
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// The reflection `ℙ = diag(P, -P)` with `P` the anti-diagonal permutation.
pub fn reflection_operator(n: usize) -> CMatrix {
    let mut p = CMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        p[(j, n - 1 - j)] = C64::new(1.0, 0.0);
        p[(n + j, 2 * n - 1 - j)] = C64::new(-1.0, 0.0);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(j: &[f64], h: f64) -> CouplingConfig {
        CouplingConfig::new(j.to_vec(), h, "t").unwrap()
    }

    fn re(m: &NambuMatrix, i: usize, j: usize) -> f64 {
        m.entries()[(i, j)].re
    }

    #[test]
    fn hx_is_diagonal_field() {
        let hx = build_hx(&cfg(&[1.0, 1.0], 1.0)).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| re(&hx, i, i)).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
        let hx = build_hx(&cfg(&[1.0, 1.0, 1.0], -0.5)).unwrap();
        let diag: Vec<f64> = (0..6).map(|i| re(&hx, i, i)).collect();
        assert_eq!(diag, vec![-0.5, -0.5, -0.5, 0.5, 0.5, 0.5]);
        assert!(hx.entries().iter().filter(|z| z.norm() != 0.0).count() == 6);
    }

    #[test]
    fn hz_sign_pattern_even_and_odd() {
        let c = cfg(&[1.0, 1.0, 1.0], 1.0);
        let even = build_hz(&c, FermionParity::Even).unwrap();
        let b = |m: &NambuMatrix, i: usize, j: usize| re(m, i, 3 + j);
        assert_eq!(re(&even, 0, 1), -0.5);
        assert_eq!(re(&even, 0, 2), 0.5);
        assert_eq!(b(&even, 0, 1), -0.5);
        assert_eq!(b(&even, 2, 0), 0.5);
        assert_eq!(b(&even, 0, 2), -0.5);
        let odd = build_hz(&c, FermionParity::Odd).unwrap();
        assert_eq!(re(&odd, 0, 2), -0.5);
        assert_eq!(b(&odd, 2, 0), -0.5);
        for m in [&even, &odd] {
            assert_eq!(hermiticity_deviation(m.entries()), 0.0);
            assert_eq!(m.particle_hole_deviation(), 0.0);
        }
    }

    #[test]
    fn hz_blocks_are_exactly_symmetric_and_antisymmetric() {
        let c = cfg(&[0.3, -1.2, 0.7, 2.0, -0.1], 0.4);
        for parity in [FermionParity::Even, FermionParity::Odd] {
            let blocks = RealBlocks::new(&c, 1.0, parity);
            assert_eq!(blocks.a, blocks.a.transpose());
            assert_eq!(blocks.b, -blocks.b.transpose());
        }
    }

    #[test]
    fn h_interpolates_between_endpoints() {
        let c = cfg(&[1.0, 1.0, 1.0], 1.0);
        assert_eq!(
            build_h(&c, 0.0, FermionParity::Even).unwrap(),
            build_hx(&c).unwrap()
        );
        assert_eq!(
            build_h(&c, 1.0, FermionParity::Even).unwrap(),
            build_hz(&c, FermionParity::Even).unwrap()
        );
        let mid = build_h(&c, 0.5, FermionParity::Even).unwrap();
        assert_eq!(re(&mid, 0, 0), 0.5);
        assert!(matches!(
            build_h(&c, 1.5, FermionParity::Even),
            Err(Error::OutOfRange { .. })
        ));
        assert!(build_h(&c, -0.01, FermionParity::Odd).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CouplingConfig::new(vec![1.0], 1.0, "").is_err());
        let bad = CouplingConfig {
            n_sites: 3,
            couplings: vec![1.0, 1.0],
            field_h: 1.0,
            label: String::new(),
        };
        assert!(matches!(bad.validate(), Err(Error::DimensionMismatch { .. })));
        assert!(CouplingConfig::new(vec![1.0, f64::NAN], 1.0, "").is_err());
    }

    #[test]
    fn gamma_commutes_with_block_diagonal_gauge() {
        let n = 3;
        let g = GammaMatrix::new(n);
        let mut w = CMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = C64::new((i * 3 + j) as f64 * 0.1, (i as f64) - (j as f64));
                w[(i, j)] = z;
                w[(n + i, n + j)] = z.conj();
            }
        }
        assert_eq!(g.commutator_norm(&w), 0.0);
        let gm = g.matrix();
        assert_eq!(&gm * &gm, gm);
    }
}
