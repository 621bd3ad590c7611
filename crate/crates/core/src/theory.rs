//! Dimension counting for the reachable Gaussian manifold, and numerical
//! certificates for the counts.
//!
//! `dim_U` is the dimension of the group of Bogoliubov unitaries the circuit
//! can reach, `dim_W` that of the gauge freedom that leaves the state
//! unchanged, and `dim_F = dim_U - dim_W` that of the manifold of Gaussian
//! states. Matching `2P` angles to `dim_F` gives the predicted critical depth.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{thouless_z, MajoranaCircuit};
use crate::models::{is_reflection_symmetric, is_translation_invariant};
use crate::nambu::{CMatrix, CouplingConfig, MatrixKind, NambuMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryClass {
    General,
    ReflectionSymmetric,
    TranslationInvariant,
}

impl SymmetryClass {
    /// The most restrictive class the couplings belong to. Translation
    /// invariance is only used for even `N`, where the momentum blocks pair up.
    pub fn of(config: &CouplingConfig) -> Self {
        if config.n_sites % 2 == 0 && is_translation_invariant(config) {
            SymmetryClass::TranslationInvariant
        } else if is_reflection_symmetric(config) {
            SymmetryClass::ReflectionSymmetric
        } else {
            SymmetryClass::General
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NParity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub n: usize,
    pub class: SymmetryClass,
    pub dim_u: usize,
    pub dim_w: usize,
    pub dim_f: usize,
    pub p_critical: usize,
    pub parity_of_n: NParity,
}

pub fn predict_pcr(n: usize, class: SymmetryClass) -> Result<DimensionReport> {
    if n < 2 {
        return Err(Error::config(format!("need at least 2 sites, got {n}")));
    }
    let odd = n % 2 == 1;
    let (dim_u, dim_w, dim_f) = match class {
        SymmetryClass::General => (2 * n * n - n, n * n, n * (n - 1)),
        SymmetryClass::ReflectionSymmetric if odd => (n * n, (n * n + 1) / 2, (n * n - 1) / 2),
        SymmetryClass::ReflectionSymmetric => (n * n, n * n / 2, n * n / 2),
        SymmetryClass::TranslationInvariant if odd => {
            return Err(Error::config(format!(
                "the translation-invariant count needs an even number of sites, got {n}"
            )))
        }
        SymmetryClass::TranslationInvariant => (2 * n, n, n),
    };
    let report = DimensionReport {
        n,
        class,
        dim_u,
        dim_w,
        dim_f,
        p_critical: dim_f / 2,
        parity_of_n: if odd { NParity::Odd } else { NParity::Even },
    };
    debug_assert_eq!(report.dim_u - report.dim_w, report.dim_f);
    debug_assert_eq!(2 * report.p_critical, report.dim_f);
    Ok(report)
}

/// Largest `N` accepted by [`certify_gaussian_dimension`].
pub const MAX_CERTIFY_SITES: usize = 8;
/// Relative singular-value cutoff for the Jacobian rank.
pub const RANK_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-6;

/// Random couplings in `[0.5, 1.5]` with the requested symmetry, `h = 1`.
pub fn random_config(n: usize, class: SymmetryClass, rng: &mut ChaCha8Rng) -> Result<CouplingConfig> {
    let mut j: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    match class {
        SymmetryClass::General => {}
        SymmetryClass::ReflectionSymmetric => {
            for b in 1..n {
                j[n - b - 1] = j[b - 1];
            }
        }
        SymmetryClass::TranslationInvariant => j = vec![j[0]; n],
    }
    CouplingConfig::new(j, 1.0, format!("random-{class:?}").to_lowercase())
}

fn z_coordinates(circuit: &MajoranaCircuit, theta: &[f64]) -> Result<Vec<f64>> {
    let u = NambuMatrix::unitary(circuit.nambu_unitary(theta)?)?;
    let z = thouless_z(&u)?.z;
    let n = z.nrows();
    let mut out = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in i + 1..n {
            out.push(z[(i, j)].re);
            out.push(z[(i, j)].im);
        }
    }
    Ok(out)
}

/// Numerical rank of `∂Z/∂θ` at a random point of a depth-`2 dim_F` circuit.
pub fn jacobian_rank(config: &CouplingConfig, depth: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let circuit = MajoranaCircuit::new(config)?;
    let theta: Vec<f64> = (0..2 * depth)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let base = z_coordinates(&circuit, &theta)?;
    let mut jac = DMatrix::zeros(base.len(), theta.len());
    let mut t = theta.clone();
    for k in 0..theta.len() {
        t[k] = theta[k] + FD_STEP;
        let plus = z_coordinates(&circuit, &t)?;
        t[k] = theta[k] - FD_STEP;
        let minus = z_coordinates(&circuit, &t)?;
        t[k] = theta[k];
        for (r, (p, m)) in plus.iter().zip(&minus).enumerate() {
            jac[(r, k)] = (p - m) / (2.0 * FD_STEP);
        }
    }
    Ok(numerical_rank(jac))
}

fn numerical_rank(m: DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// Rank of the Thouless-matrix Jacobian on a random ring of the given class.
/// Up to `draws` random points are tried while the rank falls short of the
/// predicted `dim_F`; a shortfall on every draw is reported as an error.
pub fn certify_gaussian_dimension(n: usize, class: SymmetryClass, draws: usize, seed: u64) -> Result<usize> {
    if n > MAX_CERTIFY_SITES {
        return Err(Error::TooLarge {
            n,
            limit: MAX_CERTIFY_SITES,
        });
    }
    let expected = predict_pcr(n, class)?.dim_f;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = random_config(n, class, &mut rng)?;
    let depth = 2 * expected;
    let mut found = 0;
    for _ in 0..draws.max(1) {
        match jacobian_rank(&config, depth, &mut rng) {
            Ok(r) => found = found.max(r),
            Err(Error::SingularBlock { .. }) => continue,
            Err(e) => return Err(e),
        }
        if found >= expected {
            return Ok(found);
        }
    }
    Err(Error::RankDeficient {
        found,
        expected,
        draws: draws.max(1),
    })
}

/// `K = U^†U + V^†V` and `Q = U^†V^* + V^†U^*` for the left block column of a
/// particle-hole structured matrix. For a Bogoliubov unitary `K = 1` and
/// `Q = 0`; these are the constraints that cut the free parameters of
/// `(U, V)` down to `dim_U`.
pub fn constraint_blocks(u: &CMatrix, v: &CMatrix) -> (CMatrix, CMatrix) {
    let k = u.adjoint() * u + v.adjoint() * v;
    let q = u.adjoint() * v.map(|z| z.conj()) + v.adjoint() * u.map(|z| z.conj());
    (k, q)
}

/// Number of independent real parameters of `K` and `Q` when `[U, P] = 0`
/// and `{V, P} = 0`.
pub fn symmetric_constraint_counts(n: usize) -> (usize, usize) {
    if n % 2 == 1 {
        ((n * n + 1) / 2, (n * n - 1) / 2)
    } else {
        (n * n / 2, n * n / 2)
    }
}

fn reflection(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| C64::new(if i + j == n - 1 { 1.0 } else { 0.0 }, 0.0))
}

/// Random complex `(U, V)` with `[U, P] = 0` and `{V, P} = 0`, obtained by
/// projecting Gaussian matrices.
pub fn random_symmetric_blocks(n: usize, rng: &mut ChaCha8Rng) -> (CMatrix, CMatrix) {
    let p = reflection(n);
    let mut draw = || CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let a = draw();
    let b = draw();
    let u = (&a + &p * &a * &p) * C64::new(0.5, 0.0);
    let v = (&b - &p * &b * &p) * C64::new(0.5, 0.0);
    (u, v)
}

/// Dimension of the real span of `K` and of `Q` over `samples` random
/// reflection-symmetric `(U, V)`; equals [`symmetric_constraint_counts`]
/// for enough samples.
pub fn constraint_span_ranks(n: usize, samples: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ks = DMatrix::zeros(2 * n * n, samples);
    let mut qs = DMatrix::zeros(2 * n * n, samples);
    for c in 0..samples {
        let (u, v) = random_symmetric_blocks(n, &mut rng);
        let (k, q) = constraint_blocks(&u, &v);
        for (r, (zk, zq)) in k.iter().zip(q.iter()).enumerate() {
            ks[(2 * r, c)] = zk.re;
            ks[(2 * r + 1, c)] = zk.im;
            qs[(2 * r, c)] = zq.re;
            qs[(2 * r + 1, c)] = zq.im;
        }
    }
    (numerical_rank(ks), numerical_rank(qs))
}

/// `(‖K - K^†‖, ‖[K, P]‖, ‖Q - Q^T‖, ‖{Q, P}‖)`.
pub fn constraint_symmetry_defects(k: &CMatrix, q: &CMatrix) -> [f64; 4] {
    let p = reflection(k.nrows());
    [
        (k - k.adjoint()).norm(),
        (k * &p - &p * k).norm(),
        (q - q.transpose()).norm(),
        (q * &p + &p * q).norm(),
    ]
}

/// Constraint blocks of a circuit unitary (`K = 1`, `Q = 0` up to rounding).
pub fn unitary_constraint_blocks(u: &NambuMatrix) -> Result<(CMatrix, CMatrix)> {
    if u.kind() != MatrixKind::Unitary {
        return Err(Error::NotStructured {
            kind: "unitary",
            deviation: f64::NAN,
        });
    }
    Ok(constraint_blocks(&u.block(0, 0), &u.block(1, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let g = predict_pcr(13, SymmetryClass::General).unwrap();
        assert_eq!((g.dim_u, g.dim_w, g.dim_f, g.p_critical), (325, 169, 156, 78));
        let s = predict_pcr(13, SymmetryClass::ReflectionSymmetric).unwrap();
        assert_eq!((s.dim_u, s.dim_w, s.dim_f, s.p_critical), (169, 85, 84, 42));
        let s = predict_pcr(6, SymmetryClass::ReflectionSymmetric).unwrap();
        assert_eq!((s.dim_w, s.dim_f, s.p_critical), (18, 18, 9));
        let t = predict_pcr(8, SymmetryClass::TranslationInvariant).unwrap();
        assert_eq!((t.dim_u, t.dim_w, t.p_critical), (16, 8, 4));
        assert!(predict_pcr(7, SymmetryClass::TranslationInvariant).is_err());
        assert!(predict_pcr(1, SymmetryClass::General).is_err());
    }

    #[test]
    fn classification() {
        use crate::models::{uniform_chain, RingSpec};
        assert_eq!(SymmetryClass::of(&uniform_chain(8).unwrap()), SymmetryClass::TranslationInvariant);
        assert_eq!(SymmetryClass::of(&uniform_chain(5).unwrap()), SymmetryClass::ReflectionSymmetric);
        assert_eq!(
            SymmetryClass::of(&RingSpec::symmetric(13).build().unwrap()),
            SymmetryClass::ReflectionSymmetric
        );
        assert_eq!(SymmetryClass::of(&RingSpec::broken(13).build().unwrap()), SymmetryClass::General);
    }

    #[test]
    fn small_certificates() {
        assert_eq!(certify_gaussian_dimension(2, SymmetryClass::General, 3, 1).unwrap(), 2);
        assert_eq!(certify_gaussian_dimension(4, SymmetryClass::General, 3, 1).unwrap(), 12);
        assert_eq!(certify_gaussian_dimension(5, SymmetryClass::ReflectionSymmetric, 3, 1).unwrap(), 12);
        assert!(matches!(
            certify_gaussian_dimension(9, SymmetryClass::General, 3, 1),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn constraint_spans() {
        for n in 2..=7 {
            let (rk, rq) = constraint_span_ranks(n, 2 * n * n + 4, n as u64);
            assert_eq!((rk, rq), symmetric_constraint_counts(n), "n = {n}");
            let (nk, nq) = symmetric_constraint_counts(n);
            assert_eq!(4 * n * n - 2 * n * n - nk - nq, n * n);
        }
    }
}
