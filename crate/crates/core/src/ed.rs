//! Dense `2^N` spin-basis reference.
//!
//! Basis state `b` has `σ^z_j = +1` when bit `j` is clear. Everything here is
//! built from Pauli strings directly and never touches the fermion mapping, so
//! it can serve as an independent check on the Nambu pipeline. Note the spin
//! layers use `e^{-iθH}`; the factor two exists only in the Nambu picture.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::evolution::QaoaParams;
use crate::nambu::{CouplingConfig, FermionParity, C64};

/// Largest ring for Hamiltonians and gaps.
pub const MAX_DENSE_SITES: usize = 12;
/// Largest ring for full state-vector QAOA.
pub const MAX_STATE_SITES: usize = 10;

fn check_size(config: &CouplingConfig, limit: usize) -> Result<usize> {
    config.validate()?;
    let n = config.n_sites;
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    Ok(n)
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange {
            name: "s",
            value: s,
            range: "[0, 1]",
        });
    }
    Ok(())
}

fn spin(b: usize, j: usize) -> f64 {
    if b >> j & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal of `H_z = -Σ J_j σ^z_j σ^z_{j+1}` with site `N+1 ≡ 1`.
pub fn zz_diagonal(config: &CouplingConfig) -> Vec<f64> {
    let n = config.n_sites;
    (0..1usize << n)
        .map(|b| {
            -(0..n)
                .map(|j| config.couplings[j] * spin(b, j) * spin(b, (j + 1) % n))
                .sum::<f64>()
        })
        .collect()
}

/// `H(s) = s H_z + (1 - s) H_x` as a dense real matrix.
pub fn dense_hamiltonian(config: &CouplingConfig, s: f64) -> Result<DMatrix<f64>> {
    let n = check_size(config, MAX_DENSE_SITES)?;
    check_s(s)?;
    let dim = 1usize << n;
    let diag = zz_diagonal(config);
    let off = -(1.0 - s) * config.field_h;
    let mut h = DMatrix::zeros(dim, dim);
    for b in 0..dim {
        h[(b, b)] = s * diag[b];
        for j in 0..n {
            h[(b ^ (1 << j), b)] += off;
        }
    }
    if h != h.transpose() {
        return Err(Error::NotStructured {
            kind: "Hermitian",
            deviation: (&h - h.transpose()).amax(),
        });
    }
    Ok(h)
}

/// `H(s)` restricted to the `Π σ^x = ±1` subspace, in the basis
/// `(|b⟩ ± |b̄⟩)/√2` with the top bit of `b` clear.
pub fn parity_block(config: &CouplingConfig, s: f64, parity: FermionParity) -> Result<DMatrix<f64>> {
    let n = check_size(config, MAX_DENSE_SITES)?;
    check_s(s)?;
    let p = parity.sign();
    let half = 1usize << (n - 1);
    let mask = (1usize << n) - 1;
    let diag = zz_diagonal(config);
    let off = -(1.0 - s) * config.field_h;
    let mut h = DMatrix::zeros(half, half);
    for b in 0..half {
        h[(b, b)] += s * diag[b];
        for j in 0..n {
            let f = b ^ (1 << j);
            if f < half {
                h[(f, b)] += off;
            } else {
                h[(f ^ mask, b)] += p * off;
            }
        }
    }
    Ok(h)
}

fn ascending_eigenvalues(m: DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("dense eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Full ascending spectrum of `H(s)`.
pub fn dense_spectrum(config: &CouplingConfig, s: f64) -> Result<Vec<f64>> {
    ascending_eigenvalues(dense_hamiltonian(config, s)?)
}

/// Ascending spectrum of one parity sector.
pub fn dense_sector_spectrum(config: &CouplingConfig, s: f64, parity: FermionParity) -> Result<Vec<f64>> {
    ascending_eigenvalues(parity_block(config, s, parity)?)
}

/// `E_1 - E_0` over the full Hilbert space.
pub fn dense_gap(config: &CouplingConfig, s: f64) -> Result<f64> {
    let mut all = dense_sector_spectrum(config, s, FermionParity::Even)?;
    all.extend(dense_sector_spectrum(config, s, FermionParity::Odd)?);
    all.sort_by(f64::total_cmp);
    Ok(all[1] - all[0])
}

/// `E_1 - E_0` inside one parity sector.
pub fn dense_sector_gap(config: &CouplingConfig, s: f64, parity: FermionParity) -> Result<f64> {
    let e = dense_sector_spectrum(config, s, parity)?;
    Ok(e[1] - e[0])
}

fn apply_hamiltonian(config: &CouplingConfig, s: f64, diag: &[f64], psi: &DVector<C64>) -> DVector<C64> {
    let n = config.n_sites;
    let off = -(1.0 - s) * config.field_h;
    DVector::from_fn(psi.len(), |b, _| {
        let mut acc = psi[b] * (s * diag[b]);
        for j in 0..n {
            acc += psi[b ^ (1 << j)] * off;
        }
        acc
    })
}

/// `⟨ψ|H(s)|ψ⟩` for a normalised state.
pub fn dense_energy(config: &CouplingConfig, s: f64, psi: &DVector<C64>) -> Result<f64> {
    let n = check_size(config, MAX_DENSE_SITES)?;
    check_s(s)?;
    if psi.len() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: psi.len(),
        });
    }
    let diag = zz_diagonal(config);
    let hpsi = apply_hamiltonian(config, s, &diag, psi);
    Ok(psi.dotc(&hpsi).re)
}

/// `∏_p e^{-iθ^x_p H_x} e^{-iθ^z_p H_z} |ψ_0⟩`, with `|ψ_0⟩` the ground state
/// of `H_x` (`|+⟩^⊗N` for `h > 0`). `e^{-iθH_x}` comes from a full
/// eigendecomposition of the dense `H_x`.
pub fn dense_qaoa_state(config: &CouplingConfig, params: &QaoaParams) -> Result<DVector<C64>> {
    let n = check_size(config, MAX_STATE_SITES)?;
    params.validate()?;
    let dim = 1usize << n;
    let amp = (dim as f64).sqrt().recip();
    let mut psi = DVector::from_fn(dim, |b, _| {
        let sign = if config.field_h < 0.0 && b.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        C64::new(sign * amp, 0.0)
    });
    let diag = zz_diagonal(config);
    let hx = dense_hamiltonian(config, 0.0)?;
    let eig = SymmetricEigen::try_new(hx, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("dense eigensolver did not converge".into()))?;
    let vecs = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    for (&tx, &tz) in params.thetas_x.iter().zip(&params.thetas_z) {
        for (z, &d) in psi.iter_mut().zip(&diag) {
            *z *= C64::from_polar(1.0, -tz * d);
        }
        let mut coeffs = vecs.adjoint() * &psi;
        for (c, &l) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
            *c *= C64::from_polar(1.0, -tx * l);
        }
        psi = &vecs * coeffs;
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotStructured {
            kind: "norm-preserving",
            deviation: (norm - 1.0).abs(),
        });
    }
    Ok(psi)
}

/// QAOA energy at `params.s_target` from the dense state.
pub fn dense_qaoa_energy(config: &CouplingConfig, params: &QaoaParams) -> Result<f64> {
    let psi = dense_qaoa_state(config, params)?;
    dense_energy(config, params.s_target, &psi)
}
