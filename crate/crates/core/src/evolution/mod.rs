//! Digitised Bogoliubov-de Gennes evolution of the QAOA circuit.
//!
//! The dense route ([`evolve`], [`qaoa_energy`], [`qaoa_gradient`]) works with
//! the `2N × 2N` complex Nambu unitary. [`MajoranaCircuit`] evaluates the same
//! energy in the Majorana basis, where every layer is a product of commuting
//! plane rotations; the optimizer runs on it.

mod majorana;
pub mod momentum;

pub use majorana::{MajoranaCircuit, TargetFrame, Workspace};
pub use momentum::{momentum_energy, momentum_evolve, MomentumBlock};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nambu::{
    build_hx, build_hz, reflection_operator, unitarity_deviation, CMatrix, CouplingConfig,
    GammaMatrix, MatrixKind, NambuMatrix, C64, UNITARY_TOL,
};

/// The `2P` angles of a depth-`P` circuit and the target `s_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub thetas_x: Vec<f64>,
    pub thetas_z: Vec<f64>,
    pub s_target: f64,
}

impl QaoaParams {
    pub fn new(thetas_x: Vec<f64>, thetas_z: Vec<f64>, s_target: f64) -> Result<Self> {
        let p = QaoaParams {
            thetas_x,
            thetas_z,
            s_target,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(depth: usize, s_target: f64) -> Result<Self> {
        Self::new(vec![0.0; depth], vec![0.0; depth], s_target)
    }

    /// Splits `(θ^x_1 … θ^x_P, θ^z_1 … θ^z_P)`.
    pub fn from_flat(flat: &[f64], s_target: f64) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: flat.len() + 1,
                found: flat.len(),
            });
        }
        let p = flat.len() / 2;
        Self::new(flat[..p].to_vec(), flat[p..].to_vec(), s_target)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.thetas_x.iter().chain(&self.thetas_z).copied().collect()
    }

    pub fn depth(&self) -> usize {
        self.thetas_x.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas_x.len() != self.thetas_z.len() {
            return Err(Error::DimensionMismatch {
                expected: self.thetas_x.len(),
                found: self.thetas_z.len(),
            });
        }
        if self.thetas_x.is_empty() {
            return Err(Error::config("QAOA depth must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.s_target) {
            return Err(Error::OutOfRange {
                name: "s_target",
                value: self.s_target,
                range: "[0, 1]",
            });
        }
        if self.thetas_x.iter().chain(&self.thetas_z).any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("QAOA angle".into()));
        }
        Ok(())
    }
}

/// Eigendecomposition `ℍ = V Λ V^†` used for `e^{-2iθℍ}`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &NambuMatrix) -> Result<Self> {
        let eig = SymmetricEigen::try_new(h.entries().clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("Hermitian eigensolver did not converge".into()))?;
        Ok(HermitianEigen {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    /// `e^{-2iθℍ}`.
    pub fn exp(&self, theta: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -2.0 * theta * l);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= l);
        }
        scaled * self.vectors.adjoint()
    }
}

/// `e^{-2iθℍ}` for a single generator.
pub fn nambu_exp(h: &NambuMatrix, theta: f64) -> NambuMatrix {
    let eig = HermitianEigen::new(h).expect("Hermitian eigensolver failed");
    NambuMatrix::from_parts_unchecked(eig.exp(theta), MatrixKind::Unitary)
}

/// θ-independent data for one ring, in the even parity sector.
#[derive(Debug, Clone)]
pub struct EvolutionCache {
    config: CouplingConfig,
    hx: NambuMatrix,
    hz: NambuMatrix,
    eig_x: HermitianEigen,
    eig_z: HermitianEigen,
    u0: NambuMatrix,
    circuit: MajoranaCircuit,
}

impl EvolutionCache {
    pub fn new(config: &CouplingConfig) -> Result<Self> {
        config.validate()?;
        if config.field_h == 0.0 {
            return Err(Error::config(
                "the initial state needs a nonzero transverse field",
            ));
        }
        let hx = build_hx(config)?;
        let hz = build_hz(config, config.initial_parity())?;
        let eig_x = HermitianEigen::new(&hx)?;
        let eig_z = HermitianEigen::new(&hz)?;
        Ok(EvolutionCache {
            config: config.clone(),
            u0: initial_unitary(config.n_sites, config.field_h),
            circuit: MajoranaCircuit::new(config)?,
            hx,
            hz,
            eig_x,
            eig_z,
        })
    }

    pub fn config(&self) -> &CouplingConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n_sites
    }

    pub fn hx(&self) -> &NambuMatrix {
        &self.hx
    }

    pub fn hz(&self) -> &NambuMatrix {
        &self.hz
    }

    pub fn eig_x(&self) -> &HermitianEigen {
        &self.eig_x
    }

    pub fn eig_z(&self) -> &HermitianEigen {
        &self.eig_z
    }

    pub fn u0(&self) -> &NambuMatrix {
        &self.u0
    }

    pub fn circuit(&self) -> &MajoranaCircuit {
        &self.circuit
    }

    /// `ℍ(s) = s ℍ_z + (1-s) ℍ_x` in the sector of the initial state.
    pub fn target(&self, s: f64) -> CMatrix {
        self.hz.entries() * C64::new(s, 0.0) + self.hx.entries() * C64::new(1.0 - s, 0.0)
    }
}

/// `𝕌_0`: identity for `h > 0`, the particle-hole swap for `h < 0`.
pub fn initial_unitary(n: usize, h: f64) -> NambuMatrix {
    let mut u = CMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        if h > 0.0 {
            u[(j, j)] = C64::new(1.0, 0.0);
            u[(n + j, n + j)] = C64::new(1.0, 0.0);
        } else {
            u[(j, n + j)] = C64::new(1.0, 0.0);
            u[(n + j, j)] = C64::new(1.0, 0.0);
        }
    }
    NambuMatrix::from_parts_unchecked(u, MatrixKind::Unitary)
}

/// `𝕌(θ) = 𝕌_P ⋯ 𝕌_1 𝕌_0` with `𝕌_p = e^{-2iθ^x_p ℍ_x} e^{-2iθ^z_p ℍ_z}`.
pub fn evolve(params: &QaoaParams, cache: &EvolutionCache) -> Result<NambuMatrix> {
    params.validate()?;
    let mut u = cache.u0.entries().clone();
    for (&tx, &tz) in params.thetas_x.iter().zip(&params.thetas_z) {
        u = cache.eig_z.exp(tz) * u;
        u = cache.eig_x.exp(tx) * u;
    }
    let dev = unitarity_deviation(&u);
    if dev > UNITARY_TOL {
        return Err(Error::NotStructured {
            kind: "unitary",
            deviation: dev,
        });
    }
    Ok(NambuMatrix::from_parts_unchecked(u, MatrixKind::Unitary))
}

/// `Tr(𝕌^† ℍ 𝕌 Γ)`, returned with its imaginary part.
pub fn trace_energy(u: &CMatrix, h: &CMatrix) -> C64 {
    let hu = h * u;
    let n = u.nrows() / 2;
    let mut e = C64::new(0.0, 0.0);
    for j in n..2 * n {
        for r in 0..2 * n {
            e += u[(r, j)].conj() * hu[(r, j)];
        }
    }
    e
}

fn real_energy(e: C64) -> Result<f64> {
    if !e.re.is_finite() || !e.im.is_finite() {
        return Err(Error::NonFinite("QAOA energy".into()));
    }
    if e.im.abs() > 1e-10 {
        return Err(Error::NotStructured {
            kind: "real-valued energy trace",
            deviation: e.im.abs(),
        });
    }
    Ok(e.re)
}

/// `E_P(s_T) = Tr(𝕌^†(θ) ℍ(s_T) 𝕌(θ) Γ)`.
pub fn qaoa_energy(params: &QaoaParams, cache: &EvolutionCache) -> Result<f64> {
    let u = evolve(params, cache)?;
    real_energy(trace_energy(u.entries(), &cache.target(params.s_target)))
}

/// Energy of an arbitrary Nambu unitary against `ℍ(s_T)`.
pub fn energy_of(u: &NambuMatrix, cache: &EvolutionCache, s_target: f64) -> Result<f64> {
    real_energy(trace_energy(u.entries(), &cache.target(s_target)))
}

/// Gradient in the layout of [`QaoaParams::to_flat`], from one forward sweep
/// storing the partial products `F_k` and one backward sweep of
/// `Y_k = (L_{2P} ⋯ L_{k+1})^† ℍ 𝕌`:
/// `∂E/∂θ_k = 2 Re Tr(Y_k^† (-2i G_k) F_k Γ)`.
pub fn qaoa_gradient(params: &QaoaParams, cache: &EvolutionCache) -> Result<Vec<f64>> {
    params.validate()?;
    let p = params.depth();
    let n = cache.n();
    // Elementary factors in application order: z_1, x_1, z_2, x_2, ...
    let mut factors = Vec::with_capacity(2 * p);
    for (&tx, &tz) in params.thetas_x.iter().zip(&params.thetas_z) {
        factors.push(cache.eig_z.exp(tz));
        factors.push(cache.eig_x.exp(tx));
    }
    let mut forward = Vec::with_capacity(2 * p);
    let mut u = cache.u0.entries().clone();
    for f in &factors {
        u = f * &u;
        forward.push(u.clone());
    }
    let mut y = cache.target(params.s_target) * &u;
    let mut grad = vec![0.0; 2 * p];
    for k in (0..2 * p).rev() {
        let g = if k % 2 == 0 { cache.hz.entries() } else { cache.hx.entries() };
        let gf = g * &forward[k];
        let mut tr = C64::new(0.0, 0.0);
        for j in n..2 * n {
            for r in 0..2 * n {
                tr += y[(r, j)].conj() * gf[(r, j)];
            }
        }
        let d = 2.0 * (C64::new(0.0, -2.0) * tr).re;
        let layer = k / 2;
        if k % 2 == 0 {
            grad[p + layer] = d;
        } else {
            grad[layer] = d;
        }
        y = factors[k].adjoint() * y;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("QAOA gradient".into()));
    }
    Ok(grad)
}

/// `diag(W, W^*)` for `W ∈ U(N)`.
pub fn gauge_matrix(w: &CMatrix) -> Result<NambuMatrix> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.ncols(),
        });
    }
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(w);
    m.view_mut((n, n), (n, n)).copy_from(&w.map(|z| z.conj()));
    NambuMatrix::unitary(m)
}

/// The Thouless matrix `Z` of `|ψ⟩ ∝ exp(½ Σ Z_{jj'} c_j^† c_{j'}^†)|0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThoulessZ {
    pub z: CMatrix,
}

impl ThoulessZ {
    /// `‖Z + Z^T‖` (Frobenius).
    pub fn antisymmetry_deviation(&self) -> f64 {
        (&self.z + self.z.transpose()).norm()
    }

    /// `‖Z P + P Z‖` with `P` the site reflection.
    pub fn reflection_anticommutator(&self) -> f64 {
        let n = self.z.nrows();
        let p = CMatrix::from_fn(n, n, |i, j| {
            if i + j == n - 1 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        (&self.z * &p + &p * &self.z).norm()
    }
}

/// Smallest singular value of the top-left block below which [`thouless_z`]
/// reports the state as leaving the chart around the reference vacuum.
pub const THOULESS_SINGULAR_TOL: f64 = 1e-12;

/// `Z = V^* (U^*)^{-1}` from the left block column `(U; V)` of `u`.
pub fn thouless_z(u: &NambuMatrix) -> Result<ThoulessZ> {
    let n = u.n_modes();
    let ub = u.block(0, 0).map(|z| z.conj());
    let vb = u.block(1, 0).map(|z| z.conj());
    let smallest = ub
        .clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if smallest < THOULESS_SINGULAR_TOL {
        return Err(Error::SingularBlock { smallest });
    }
    // Z^T = (U^*)^{-T} (V^*)^T, via LU rather than an explicit inverse.
    let zt = ub
        .transpose()
        .lu()
        .solve(&vb.transpose())
        .ok_or(Error::SingularBlock { smallest })?;
    let z = zt.transpose();
    debug_assert_eq!(z.nrows(), n);
    Ok(ThoulessZ { z })
}

/// Whether `u` has the `[[U, V^*], [V, U^*]]` pattern and satisfies
/// `U^†U + V^†V = 1` and `U^†V^* + V^†U^* = 0`, all to `1e-10`.
pub fn verify_ph_structure(u: &NambuMatrix) -> bool {
    let tol = 1e-10;
    let e = u.entries();
    if e.nrows() != e.ncols() || e.nrows() % 2 != 0 {
        return false;
    }
    let n = e.nrows() / 2;
    let ub = e.view((0, 0), (n, n)).into_owned();
    let vb = e.view((n, 0), (n, n)).into_owned();
    let pattern = NambuMatrix::from_parts_unchecked(e.clone(), MatrixKind::Unitary)
        .particle_hole_deviation();
    if pattern > tol {
        return false;
    }
    let k = ub.adjoint() * &ub + vb.adjoint() * &vb - CMatrix::identity(n, n);
    let q = ub.adjoint() * vb.map(|z| z.conj()) + vb.adjoint() * ub.map(|z| z.conj());
    max_abs(&k) <= tol && max_abs(&q) <= tol
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Norm of `[𝕌, ℙ]` for `h > 0` or `{𝕌, ℙ}` for `h < 0`.
pub fn reflection_defect(u: &NambuMatrix, sign_of_h: f64) -> f64 {
    let p = reflection_operator(u.n_modes());
    let e = u.entries();
    if sign_of_h >= 0.0 {
        (e * &p - &p * e).norm()
    } else {
        (e * &p + &p * e).norm()
    }
}

pub fn verify_reflection(u: &NambuMatrix, sign_of_h: f64) -> bool {
    reflection_defect(u, sign_of_h) <= 1e-10
}

/// `‖[Γ, W]‖`, zero for the gauge matrices of [`gauge_matrix`].
pub fn gamma_commutator(w: &NambuMatrix) -> f64 {
    GammaMatrix::new(w.n_modes()).commutator_norm(w.entries())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nambu::{build_h, FermionParity};

    fn ring5() -> CouplingConfig {
        CouplingConfig::new(vec![1.0, 0.5, 0.55, 1.0, -0.45], 1.0, "").unwrap()
    }

    #[test]
    fn zero_angles_give_initial_unitary() {
        let cache = EvolutionCache::new(&ring5()).unwrap();
        let u = evolve(&QaoaParams::zeros(3, 1.0).unwrap(), &cache).unwrap();
        assert!(max_abs(&(u.entries() - CMatrix::identity(10, 10))) < 1e-14);

        let neg = EvolutionCache::new(&ring5().with_field(-1.0)).unwrap();
        let u = evolve(&QaoaParams::zeros(2, 1.0).unwrap(), &neg).unwrap();
        assert!(max_abs(&(u.entries() - initial_unitary(5, -1.0).entries())) < 1e-14);
    }

    #[test]
    fn zero_angle_energy() {
        let cache = EvolutionCache::new(&ring5()).unwrap();
        for &s in &[0.0, 0.3, 1.0] {
            let e = qaoa_energy(&QaoaParams::zeros(2, s).unwrap(), &cache).unwrap();
            assert!((e + (1.0 - s) * 5.0).abs() < 1e-13);
        }
    }

    #[test]
    fn flat_layout_round_trip() {
        let p = QaoaParams::new(vec![1.0, 2.0], vec![3.0, 4.0], 0.5).unwrap();
        assert_eq!(p.to_flat(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(QaoaParams::from_flat(&p.to_flat(), 0.5).unwrap(), p);
        assert!(QaoaParams::new(vec![1.0], vec![], 0.5).is_err());
        assert!(QaoaParams::new(vec![], vec![], 0.5).is_err());
    }

    #[test]
    fn single_z_layer_matches_exponential() {
        let c = CouplingConfig::new(vec![1.0; 3], 1.0, "").unwrap();
        let cache = EvolutionCache::new(&c).unwrap();
        let u = evolve(&QaoaParams::new(vec![0.0], vec![0.3], 1.0).unwrap(), &cache).unwrap();
        let direct = nambu_exp(&build_h(&c, 1.0, FermionParity::Even).unwrap(), 0.3);
        assert!(max_abs(&(u.entries() - direct.entries())) < 1e-13);
    }

    #[test]
    fn thouless_of_identity_is_zero() {
        let z = thouless_z(&initial_unitary(4, 1.0)).unwrap();
        assert_eq!(max_abs(&z.z), 0.0);
        assert!(matches!(
            thouless_z(&initial_unitary(4, -1.0)),
            Err(Error::SingularBlock { .. })
        ));
    }

    #[test]
    fn ph_structure_checks() {
        assert!(verify_ph_structure(&initial_unitary(3, 1.0)));
        let cache = EvolutionCache::new(&ring5()).unwrap();
        let params = QaoaParams::new(vec![0.3, -1.2], vec![2.1, 0.4], 1.0).unwrap();
        assert!(verify_ph_structure(&evolve(&params, &cache).unwrap()));
        // A plain permutation of modes that mixes particles with holes
        // asymmetrically breaks the pattern.
        let mut m = CMatrix::identity(4, 4);
        m.swap_columns(0, 3);
        assert!(!verify_ph_structure(&NambuMatrix::unitary(m).unwrap()));
    }
}
