//! The uniform ring in momentum space: for even `N` and even parity the
//! Nambu problem splits into `N/2` independent `2 × 2` blocks, one per
//! `k_m = (2m - 1)π/N`.

use nalgebra::Matrix2;

use super::QaoaParams;
use crate::error::{Error, Result};
use crate::nambu::{CouplingConfig, C64};

type M2 = Matrix2<C64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumBlock {
    pub k: f64,
    pub u: M2,
}

fn uniform_coupling(config: &CouplingConfig) -> Result<f64> {
    config.validate()?;
    let n = config.n_sites;
    if n % 2 != 0 {
        return Err(Error::config(format!(
            "momentum-space evolution needs an even number of sites, got {n}"
        )));
    }
    let j = config.couplings[0];
    if config.couplings.iter().any(|&x| x != j) {
        return Err(Error::config("momentum-space evolution needs uniform couplings"));
    }
    if config.field_h == 0.0 {
        return Err(Error::config("the initial state needs a nonzero transverse field"));
    }
    Ok(j)
}

pub fn momenta(n: usize) -> Vec<f64> {
    (1..=n / 2)
        .map(|m| (2 * m - 1) as f64 * std::f64::consts::PI / n as f64)
        .collect()
}

fn block_x(h: f64) -> M2 {
    M2::new(C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-h, 0.0))
}

fn block_z(j: f64, k: f64) -> M2 {
    let (s, c) = k.sin_cos();
    M2::new(
        C64::new(-j * c, 0.0),
        C64::new(j * s, 0.0),
        C64::new(j * s, 0.0),
        C64::new(j * c, 0.0),
    )
}

/// `e^{-2iθA}` for a real symmetric traceless `2 × 2` block `A`, whose
/// eigenvalues are `±ω`: `cos(2θω) 1 - i sin(2θω) A/ω`.
fn exp_block(a: &M2, theta: f64) -> M2 {
    let omega = (a[(0, 0)].re.powi(2) + a[(0, 1)].re.powi(2)).sqrt();
    if omega == 0.0 {
        return M2::identity();
    }
    let (s, c) = (2.0 * theta * omega).sin_cos();
    M2::identity() * C64::new(c, 0.0) + a * C64::new(0.0, -s / omega)
}

/// Per-momentum evolution `U_k(θ) = ∏ e^{-2iθ^x A_x^k} e^{-2iθ^z A_z^k} U_0^k`.
pub fn momentum_evolve(params: &QaoaParams, config: &CouplingConfig) -> Result<Vec<MomentumBlock>> {
    params.validate()?;
    let j = uniform_coupling(config)?;
    let h = config.field_h;
    let ax = block_x(h);
    let u0 = if h > 0.0 {
        M2::identity()
    } else {
        M2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    };
    Ok(momenta(config.n_sites)
        .into_iter()
        .map(|k| {
            let az = block_z(j, k);
            let mut u = u0;
            for (&tx, &tz) in params.thetas_x.iter().zip(&params.thetas_z) {
                u = exp_block(&az, tz) * u;
                u = exp_block(&ax, tx) * u;
            }
            MomentumBlock { k, u }
        })
        .collect())
}

/// `E = 2 Σ_k (U_k^† A^k(s) U_k)_{22}`: with `Γ = diag(D, D')`, the hole
/// block contributes the same amount as the particle block.
pub fn momentum_energy(blocks: &[MomentumBlock], config: &CouplingConfig, s_target: f64) -> Result<f64> {
    let j = uniform_coupling(config)?;
    let ax = block_x(config.field_h);
    let mut e = 0.0;
    for b in blocks {
        let a = block_z(j, b.k) * C64::new(s_target, 0.0) + ax * C64::new(1.0 - s_target, 0.0);
        let m = b.u.adjoint() * a * b.u;
        e += 2.0 * m[(1, 1)].re;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{qaoa_energy, EvolutionCache};

    #[test]
    fn block_count_and_zero_angle_energy() {
        let c = CouplingConfig::new(vec![1.0; 8], 1.0, "").unwrap();
        let params = QaoaParams::zeros(3, 0.35).unwrap();
        let blocks = momentum_evolve(&params, &c).unwrap();
        assert_eq!(blocks.len(), 4);
        let e = momentum_energy(&blocks, &c, 0.35).unwrap();
        assert!((e + 0.65 * 8.0).abs() < 1e-13);
    }

    #[test]
    fn agrees_with_real_space() {
        for h in [1.0, -1.0] {
            let c = CouplingConfig::new(vec![1.0; 6], h, "").unwrap();
            let cache = EvolutionCache::new(&c).unwrap();
            let params = QaoaParams::new(vec![0.3, 1.1, -0.4], vec![0.7, 2.0, 0.2], 0.8).unwrap();
            let blocks = momentum_evolve(&params, &c).unwrap();
            let em = momentum_energy(&blocks, &c, 0.8).unwrap();
            let er = qaoa_energy(&params, &cache).unwrap();
            assert!((em - er).abs() < 1e-12, "{em} vs {er}");
        }
    }

    #[test]
    fn rejects_odd_or_nonuniform() {
        let params = QaoaParams::zeros(1, 1.0).unwrap();
        let odd = CouplingConfig::new(vec![1.0; 5], 1.0, "").unwrap();
        assert!(momentum_evolve(&params, &odd).is_err());
        let bumpy = CouplingConfig::new(vec![1.0, 1.0, 0.9, 1.0], 1.0, "").unwrap();
        assert!(momentum_evolve(&params, &bumpy).is_err());
    }
}
