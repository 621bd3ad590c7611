use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use super::{CMatrix, FermionParity, MatrixKind, NambuMatrix, C64};
use crate::error::{Error, Result};

/// Quasiparticle energies below this are reported as exact zeros.
pub const ZERO_MODE_TOL: f64 = 1e-12;
const PAIRING_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BdgSpectrum {
    /// Nonnegative, ascending.
    pub epsilons: Vec<f64>,
    /// `𝕌_T` with `𝕌_T^† ℍ 𝕌_T = diag(ε, -ε)`.
    pub transform: NambuMatrix,
    pub vacuum_energy: f64,
    pub vacuum_parity: FermionParity,
    pub sector: FermionParity,
}

impl BdgSpectrum {
    /// `𝕌_T diag(ε, -ε) 𝕌_T^†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.epsilons.len();
        let u = self.transform.entries();
        let mut scaled = u.clone();
        for (j, &e) in self.epsilons.iter().enumerate() {
            scaled.column_mut(j).scale_mut(e);
            scaled.column_mut(n + j).scale_mut(-e);
        }
        scaled * u.adjoint()
    }

    /// Parity-resolved many-body levels reachable in `self.sector`, lowest
    /// first. Only the two lowest are produced.
    pub fn lowest_levels(&self) -> [f64; 2] {
        two_lowest_levels(
            &self.epsilons,
            self.vacuum_energy,
            self.vacuum_parity,
            self.sector,
        )
    }
}

pub(crate) fn two_lowest_levels(
    eps: &[f64],
    vacuum_energy: f64,
    vacuum_parity: FermionParity,
    sector: FermionParity,
) -> [f64; 2] {
    let e1 = eps.first().copied().unwrap_or(0.0);
    let e2 = eps.get(1).copied().unwrap_or(f64::INFINITY);
    if vacuum_parity == sector {
        [vacuum_energy, vacuum_energy + 2.0 * (e1 + e2)]
    } else {
        [vacuum_energy + 2.0 * e1, vacuum_energy + 2.0 * e2]
    }
}

/// Bogoliubov diagonalisation of a particle-hole symmetric generator.
///
/// Real inputs (every generator built by this crate) go through an SVD of
/// `A - B`, which is exact in the zero-mode limit. Complex inputs use a
/// Hermitian eigendecomposition; the zero-mode subspace is given a basis
/// invariant under the particle-hole conjugation before pairing.
pub fn diagonalize(m: &NambuMatrix, sector: FermionParity) -> Result<BdgSpectrum> {
    if m.kind() != MatrixKind::Hermitian {
        return Err(Error::NotStructured {
            kind: "Hermitian",
            deviation: f64::NAN,
        });
    }
    let dev = m.particle_hole_deviation();
    if dev > PAIRING_TOL {
        return Err(Error::NotStructured {
            kind: "particle-hole symmetric",
            deviation: dev,
        });
    }
    if m.entries().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("Nambu matrix entries".into()));
    }
    let is_real = m.entries().iter().all(|z| z.im == 0.0);
    let (epsilons, transform) = if is_real {
        diagonalize_real(m)?
    } else {
        diagonalize_complex(m)?
    };
    let vacuum_parity = majorana_parity(&transform)?;
    let vacuum_energy = -epsilons.iter().sum::<f64>();
    Ok(BdgSpectrum {
        epsilons,
        transform: NambuMatrix::from_parts_unchecked(transform, MatrixKind::Unitary),
        vacuum_energy,
        vacuum_parity,
        sector,
    })
}

fn clamp_zero(e: f64) -> f64 {
    if e < ZERO_MODE_TOL {
        0.0
    } else {
        e
    }
}

/// Largest tolerated `‖M - Φ Σ Ψ^T‖_max`, relative to `max(1, ‖M‖_max)`.
const SVD_RESIDUAL_TOL: f64 = 1e-12;

fn raw_svd(m: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)?;
    let (u, vt) = (svd.u?, svd.v_t?);
    let rebuilt = &u * DMatrix::from_diagonal(&svd.singular_values) * &vt;
    let scale = m.amax().max(1.0);
    ((rebuilt - m).amax() <= SVD_RESIDUAL_TOL * scale).then(|| (svd.singular_values, u, vt.transpose()))
}

/// One-sided (Hestenes) Jacobi SVD: orthogonalises the columns of `M V` by
/// plane rotations accumulated in `V`. Columns whose norm is lost in rounding
/// get `Φ` columns from Gram-Schmidt completion.
fn jacobi_svd(m: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    const MAX_SWEEPS: usize = 80;
    let n = m.ncols();
    let mut w = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON * n as f64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (wi, wj) = (w.column(i), w.column(j));
                let alpha = wi.norm_squared();
                let beta = wj.norm_squared();
                let gamma = wi.dot(&wj);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = (1.0 + t * t).sqrt().recip();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let sigma = DVector::from_fn(n, |k, _| w.column(k).norm());
    let floor = sigma.max() * n as f64 * f64::EPSILON;
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut missing = Vec::new();
    for k in 0..n {
        if sigma[k] > floor {
            u.set_column(k, &(w.column(k) / sigma[k]));
        } else {
            missing.push(k);
        }
    }
    let mut e = 0;
    for k in missing {
        loop {
            if e >= n {
                return None;
            }
            let mut x = DVector::<f64>::zeros(n);
            x[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for c in 0..n {
                    let p = u.column(c).dot(&x);
                    x -= u.column(c) * p;
                }
            }
            let norm = x.norm();
            if norm > 0.5 {
                u.set_column(k, &(x / norm));
                break;
            }
        }
    }
    let rebuilt = &u * DMatrix::from_diagonal(&sigma) * v.transpose();
    ((rebuilt - m).amax() <= SVD_RESIDUAL_TOL * m.amax().max(1.0)).then_some((sigma, u, v))
}

/// `M = Φ diag(σ) Ψ^T` with ascending `σ`. nalgebra's bidiagonal SVD
/// occasionally returns a decomposition that does not reproduce `M` (seen on
/// frustrated rings close to `s = 1`); every result is checked by
/// reconstruction and a one-sided Jacobi SVD takes over on failure.
pub(crate) fn sorted_svd(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let found = raw_svd(&m).or_else(|| {
        log::debug!("bidiagonal SVD failed its reconstruction check; using Jacobi");
        jacobi_svd(&m)
    });
    let (sv, u, v) = found.ok_or_else(|| Error::Eigen("SVD failed the reconstruction check".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let sigma = order.iter().map(|&i| sv[i]).collect();
    let phi = DMatrix::from_fn(n, n, |r, c| u[(r, order[c])]);
    let psi = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((sigma, phi, psi))
}

fn diagonalize_real(m: &NambuMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.n_modes();
    let e = m.entries();
    let a_minus_b = DMatrix::from_fn(n, n, |i, j| e[(i, j)].re - e[(i, n + j)].re);
    let (sigma, phi, psi) = sorted_svd(a_minus_b)?;
    let u = (&phi + &psi) * 0.5;
    let v = (&phi - &psi) * 0.5;
    let mut t = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let (uu, vv) = (C64::new(u[(i, j)], 0.0), C64::new(v[(i, j)], 0.0));
            t[(i, j)] = uu;
            t[(n + i, n + j)] = uu;
            t[(n + i, j)] = vv;
            t[(i, n + j)] = vv;
        }
    }
    Ok((sigma.into_iter().map(clamp_zero).collect(), t))
}

fn ph_conjugate(x: &[C64]) -> Vec<C64> {
    let n = x.len() / 2;
    x[n..].iter().chain(x[..n].iter()).map(|z| z.conj()).collect()
}

fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn diagonalize_complex(m: &NambuMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.n_modes();
    let eig = SymmetricEigen::try_new(m.entries().clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lam: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let scale = lam.iter().fold(1.0f64, |acc, l| acc.max(l.abs()));
    for i in 0..n {
        let (lo, hi) = (lam[n - 1 - i], lam[n + i]);
        if (lo + hi).abs() > PAIRING_TOL * scale {
            return Err(Error::PairingViolated { lo, hi });
        }
    }
    let eps: Vec<f64> = (0..n).map(|i| 0.5 * (lam[n + i] - lam[n - 1 - i])).collect();
    let n_zero = eps.iter().take_while(|&&e| e < ZERO_MODE_TOL * scale).count();
    let column = |k: usize| -> Vec<C64> { eig.eigenvectors.column(order[k]).iter().copied().collect() };

    let mut particles: Vec<Vec<C64>> = Vec::with_capacity(n);
    if n_zero > 0 {
        // Build an orthonormal basis of the kernel whose vectors are fixed by
        // the particle-hole conjugation C, then pair them up as (r1 ∓ i r2)/√2.
        let mut real_basis: Vec<Vec<C64>> = Vec::with_capacity(2 * n_zero);
        for k in n - n_zero..n + n_zero {
            let x = column(k);
            let cx = ph_conjugate(&x);
            let plus: Vec<C64> = x.iter().zip(&cx).map(|(a, b)| a + b).collect();
            let minus: Vec<C64> = x.iter().zip(&cx).map(|(a, b)| (a - b) * C64::i()).collect();
            for mut cand in [plus, minus] {
                for r in &real_basis {
                    let c = inner(r, &cand);
                    for (z, rz) in cand.iter_mut().zip(r) {
                        *z -= c * rz;
                    }
                }
                let norm = inner(&cand, &cand).re.sqrt();
                if norm > 1e-6 && real_basis.len() < 2 * n_zero {
                    real_basis.push(cand.iter().map(|z| z / norm).collect());
                }
            }
        }
        if real_basis.len() != 2 * n_zero {
            return Err(Error::Eigen(format!(
                "zero-mode subspace of dimension {} could not be paired",
                2 * n_zero
            )));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for pair in real_basis.chunks(2) {
            particles.push(
                pair[0]
                    .iter()
                    .zip(&pair[1])
                    .map(|(a, b)| (a - C64::i() * b) * s)
                    .collect(),
            );
        }
    }
    for k in n + n_zero..2 * n {
        particles.push(column(k));
    }

    let mut t = CMatrix::zeros(2 * n, 2 * n);
    for (j, x) in particles.iter().enumerate() {
        let cx = ph_conjugate(x);
        for r in 0..2 * n {
            t[(r, j)] = x[r];
            t[(r, n + j)] = cx[r];
        }
    }
    let eps = eps
        .into_iter()
        .enumerate()
        .map(|(i, e)| if i < n_zero { 0.0 } else { clamp_zero(e) })
        .collect();
    Ok((eps, t))
}

/// Fermion parity of the Bogoliubov vacuum annihilated by the first `N`
/// columns' quasiparticles: the sign of the determinant of the transform in
/// the Majorana basis, where it is real orthogonal.
pub fn majorana_parity(transform: &CMatrix) -> Result<FermionParity> {
    let o = majorana_orthogonal(transform);
    let imag = o.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    if imag > 1e-8 {
        return Err(Error::NotStructured {
            kind: "particle-hole unitary",
            deviation: imag,
        });
    }
    let real = o.map(|z| z.re);
    let det = real.lu().determinant();
    if !det.is_finite() || det.abs() < 0.5 {
        return Err(Error::NotStructured {
            kind: "orthogonal in the Majorana basis",
            deviation: (det.abs() - 1.0).abs(),
        });
    }
    Ok(FermionParity::from_sign(det))
}

/// `Ω 𝕌 Ω^†` with `Ω = [[1, 1], [i, -i]] / √2`.
pub fn majorana_orthogonal(u: &CMatrix) -> CMatrix {
    let n = u.nrows() / 2;
    let omega = majorana_map(n);
    &omega * u * omega.adjoint()
}

pub fn majorana_map(n: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut omega = CMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        omega[(j, j)] = C64::new(s, 0.0);
        omega[(j, n + j)] = C64::new(s, 0.0);
        omega[(n + j, j)] = C64::new(0.0, s);
        omega[(n + j, n + j)] = C64::new(0.0, -s);
    }
    omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nambu::{build_h, build_hx, unitarity_deviation, CouplingConfig};

    fn max_dev(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    #[test]
    fn hx_spectrum() {
        let c = CouplingConfig::new(vec![1.0; 4], 1.0, "").unwrap();
        let sp = diagonalize(&build_hx(&c).unwrap(), FermionParity::Even).unwrap();
        assert_eq!(sp.epsilons, vec![1.0; 4]);
        assert_eq!(sp.vacuum_energy, -4.0);
        assert_eq!(sp.vacuum_parity, FermionParity::Even);
    }

    #[test]
    fn negative_field_vacuum_is_filled_state() {
        for n in [3usize, 4] {
            let c = CouplingConfig::new(vec![1.0; n], -1.0, "").unwrap();
            let sp = diagonalize(&build_hx(&c).unwrap(), FermionParity::Even).unwrap();
            let expected = if n % 2 == 0 { FermionParity::Even } else { FermionParity::Odd };
            assert_eq!(sp.vacuum_parity, expected);
        }
    }

    #[test]
    fn round_trip_real_and_complex_paths() {
        let c = CouplingConfig::new(vec![0.7, -1.1, 0.4, 1.3, 0.9], 0.8, "").unwrap();
        let h = build_h(&c, 0.6, FermionParity::Odd).unwrap();
        let sp = diagonalize(&h, FermionParity::Odd).unwrap();
        assert!(max_dev(&sp.reconstruct(), h.entries()) < 1e-12);
        assert!(unitarity_deviation(sp.transform.entries()) < 1e-12);
        assert!(sp.transform.particle_hole_deviation() < 1e-14);

        // Rotate by a particle-hole unitary to get a genuinely complex input.
        let w = crate::evolution::nambu_exp(&build_h(&c, 0.3, FermionParity::Even).unwrap(), 0.37);
        let hc = w.entries() * h.entries() * w.entries().adjoint();
        let hc = NambuMatrix::hermitian((&hc + hc.adjoint()) * C64::new(0.5, 0.0)).unwrap();
        let spc = diagonalize(&hc, FermionParity::Odd).unwrap();
        assert!(max_dev(&spc.reconstruct(), hc.entries()) < 1e-12);
        for (a, b) in sp.epsilons.iter().zip(&spc.epsilons) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(sp.vacuum_parity, spc.vacuum_parity);
    }

    #[test]
    fn zero_modes_are_paired() {
        // An open chain at s = 1 has an exact Majorana zero mode.
        let c = CouplingConfig::new(vec![1.0, 1.0, 1.0, 0.0], 1.0, "").unwrap();
        let h = build_h(&c, 1.0, FermionParity::Odd).unwrap();
        let sp = diagonalize(&h, FermionParity::Odd).unwrap();
        assert_eq!(sp.epsilons[0], 0.0);
        assert!(max_dev(&sp.reconstruct(), h.entries()) < 1e-12);

        let w = crate::evolution::nambu_exp(&build_h(&c, 0.5, FermionParity::Even).unwrap(), 0.2);
        let hc = w.entries() * h.entries() * w.entries().adjoint();
        let hc = NambuMatrix::hermitian((&hc + hc.adjoint()) * C64::new(0.5, 0.0)).unwrap();
        let spc = diagonalize(&hc, FermionParity::Odd).unwrap();
        assert_eq!(spc.epsilons[0], 0.0);
        assert!(max_dev(&spc.reconstruct(), hc.entries()) < 1e-12);
        assert!(unitarity_deviation(spc.transform.entries()) < 1e-12);
        assert!(spc.transform.particle_hole_deviation() < 1e-12);
    }

    #[test]
    fn rejects_unpaired_input() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(2, 2)] = C64::new(0.5, 0.0);
        let m = NambuMatrix::hermitian(m).unwrap();
        assert!(diagonalize(&m, FermionParity::Even).is_err());
    }

    fn ring_matrix(j: &[f64], h: f64, s: f64) -> DMatrix<f64> {
        let n = j.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = (1.0 - s) * h;
        }
        for i in 0..n - 1 {
            m[(i + 1, i)] = -s * j[i];
        }
        m[(0, n - 1)] = s * j[n - 1];
        m
    }

    fn gram_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(m.transpose() * m)
            .eigenvalues
            .iter()
            .map(|x| x.max(0.0).sqrt())
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn svd_survives_bad_bidiagonal_case() {
        // A disordered 21-site ring near s = 1 on which the bidiagonal SVD
        // returns a decomposition that does not reproduce the matrix.
        let c = crate::models::RingSpec::broken(21).with_disorder(0, false).build().unwrap();
        let m = ring_matrix(&c.couplings, 1.0, 0.9989245825);
        let (sigma, phi, psi) = sorted_svd(m.clone()).unwrap();
        let rebuilt = &phi * DMatrix::from_diagonal(&DVector::from_vec(sigma.clone())) * psi.transpose();
        assert!((rebuilt - &m).amax() < 1e-12);
        for (a, b) in sigma.iter().zip(gram_singular_values(&m)) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!((sigma[0] - 0.4495152439605901).abs() < 1e-9);
    }

    #[test]
    fn jacobi_matches_reference_with_rank_deficiency() {
        let m = ring_matrix(&[1.0, 0.7, -0.4, 1.3, 0.9, 0.6], 0.8, 0.35);
        let (sv, u, v) = jacobi_svd(&m).unwrap();
        let mut sorted: Vec<f64> = sv.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        for (a, b) in sorted.iter().zip(gram_singular_values(&m)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((u.transpose() * &u - DMatrix::identity(6, 6)).amax() < 1e-13);
        assert!((v.transpose() * &v - DMatrix::identity(6, 6)).amax() < 1e-13);
        // An open chain at s = 1 has an exact zero singular value.
        let m = ring_matrix(&[1.0, 1.0, 1.0, 0.0], 1.0, 1.0);
        let (sv, u, v) = jacobi_svd(&m).unwrap();
        assert!(sv.min() < 1e-15);
        assert!((u.transpose() * &u - DMatrix::identity(4, 4)).amax() < 1e-13);
        let rebuilt = &u * DMatrix::from_diagonal(&sv) * v.transpose();
        assert!((rebuilt - m).amax() < 1e-14);
    }
}
