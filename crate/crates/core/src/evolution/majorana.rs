//! The QAOA energy in the Majorana basis.
//!
//! With `Ω = [[1, 1], [i, -i]] / √2`, a generator maps to `Ω ℍ Ω^† = iK` with
//! `K = [[0, -(A - B)], [A + B, 0]]` real antisymmetric, a layer
//! `e^{-2iθℍ}` to the rotation `e^{2θK}`, and `Γ` to `(1 + iS)/2` with
//! `S = [[0, 1], [-1, 0]]`. The energy becomes `E = -½ Tr(K_T O S O^T)` for
//! the real orthogonal `O = Ω 𝕌 Ω^†`. For the Ising ring `K_x` and `K_z` are
//! each a sum of `N` disjoint planes, so a layer costs `O(N²)` instead of a
//! dense complex product.

use crate::error::{Error, Result};
use crate::nambu::{check_s, sorted_svd, CMatrix, CouplingConfig, FermionParity, RealBlocks, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Plane {
    p: usize,
    q: usize,
    /// `K[p, q]`.
    kappa: f64,
}

/// Plane data of `K_x`, `K_z` (in the sector of the initial state) and the
/// initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct MajoranaCircuit {
    n: usize,
    x_planes: Vec<Plane>,
    z_planes: Vec<Plane>,
    negative_field: bool,
}

/// Scratch buffers for one evaluation thread.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    states: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    q: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

fn rotate_rows(m: &mut [f64], dim: usize, pl: &Plane, c: f64, s: f64) {
    let (top, bottom) = m.split_at_mut(pl.q * dim);
    let rp = &mut top[pl.p * dim..(pl.p + 1) * dim];
    let rq = &mut bottom[..dim];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x + s * y;
        *b = c * y - s * x;
    }
}

/// The target in its own quasiparticle frame. With `A - B = Φ Σ Ψ^T` and
/// `W = diag(Φ, Ψ)`, `W^T K_T W` pairs rows `k` and `N+k` with strength
/// `ε_k`, and for `Q = W^T O` the excess energy of mode `k` is
/// `ε_k (1 - u S v^T) = ε_k |v - u S|² / 2` with `u, v` rows `k, N+k` of `Q`.
/// Summing these squares gives `E - E_gs` without the cancellation of a
/// difference of two large energies. When the vacuum lies in the other
/// parity sector the lowest mode is occupied in the sector ground state and
/// enters with the opposite orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFrame {
    n: usize,
    /// `W^T`, row-major.
    w_t: Vec<f64>,
    eps: Vec<f64>,
    lowest_occupied: bool,
    ground_energy: f64,
}

impl TargetFrame {
    pub fn new(config: &CouplingConfig, s_target: f64) -> Result<Self> {
        config.validate()?;
        check_s(s_target)?;
        let n = config.n_sites;
        let sector = config.initial_parity();
        let (eps, phi, psi) = sorted_svd(RealBlocks::new(config, s_target, sector).svd_matrix())?;
        let det = phi.clone().lu().determinant() * psi.clone().lu().determinant();
        let lowest_occupied = FermionParity::from_sign(det) != sector;
        let dim = 2 * n;
        let mut w_t = vec![0.0; dim * dim];
        for k in 0..n {
            for j in 0..n {
                w_t[k * dim + j] = phi[(j, k)];
                w_t[(n + k) * dim + n + j] = psi[(j, k)];
            }
        }
        let vacuum = -eps.iter().sum::<f64>();
        let ground_energy = if lowest_occupied { vacuum + 2.0 * eps[0] } else { vacuum };
        Ok(TargetFrame {
            n,
            w_t,
            eps,
            lowest_occupied,
            ground_energy,
        })
    }

    /// Ground energy of the target in the sector of the initial state.
    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    pub fn quasiparticle_energies(&self) -> &[f64] {
        &self.eps
    }

    /// `E - E_gs` for the orthogonal state `o` (row-major `2N × 2N`).
    pub fn excess_energy(&self, o: &[f64], q: &mut Vec<f64>) -> f64 {
        let n = self.n;
        let dim = 2 * n;
        q.clear();
        q.resize(dim * dim, 0.0);
        for r in 0..dim {
            let row = &mut q[r * dim..(r + 1) * dim];
            for (k, &w) in self.w_t[r * dim..(r + 1) * dim].iter().enumerate() {
                if w != 0.0 {
                    for (qc, oc) in row.iter_mut().zip(&o[k * dim..(k + 1) * dim]) {
                        *qc += w * oc;
                    }
                }
            }
        }
        let mut total = 0.0;
        for k in 0..n {
            let u = &q[k * dim..(k + 1) * dim];
            let v = &q[(n + k) * dim..(n + k + 1) * dim];
            // (u S)_c = -u_{c+N} for c < N and u_{c-N} for c >= N.
            let flip = if k == 0 && self.lowest_occupied { -1.0 } else { 1.0 };
            let mut sq = 0.0;
            for c in 0..n {
                let a = v[c] - flip * -u[n + c];
                let b = v[n + c] - flip * u[c];
                sq += a * a + b * b;
            }
            total += flip * self.eps[k] * 0.5 * sq;
        }
        total
    }
}

impl MajoranaCircuit {
    pub fn new(config: &CouplingConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_sites;
        let h = config.field_h;
        if h == 0.0 {
            return Err(Error::config("the initial state needs a nonzero transverse field"));
        }
        let x_planes = (0..n)
            .map(|j| Plane {
                p: j,
                q: n + j,
                kappa: -h,
            })
            .collect();
        let sigma = config.initial_parity().sign();
        let mut z_planes: Vec<Plane> = (0..n - 1)
            .map(|j| Plane {
                p: j + 1,
                q: n + j,
                kappa: config.couplings[j],
            })
            .collect();
        z_planes.push(Plane {
            p: 0,
            q: 2 * n - 1,
            kappa: -sigma * config.couplings[n - 1],
        });
        Ok(MajoranaCircuit {
            n,
            x_planes,
            z_planes,
            negative_field: h < 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        2 * self.n
    }

    fn initial_state(&self, out: &mut [f64]) {
        let dim = self.dim();
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..dim {
            let sign = if self.negative_field && i >= self.n { -1.0 } else { 1.0 };
            out[i * dim + i] = sign;
        }
    }

    /// Planes applied at half-layer `k` (z first within each layer) and the
    /// index of the angle in the flat layout `(θ^x…, θ^z…)`.
    fn half_layer(&self, k: usize, depth: usize) -> (&[Plane], usize) {
        if k % 2 == 0 {
            (&self.z_planes, depth + k / 2)
        } else {
            (&self.x_planes, k / 2)
        }
    }

    fn apply_half_layer(&self, m: &mut [f64], planes: &[Plane], theta: f64, inverse: bool) {
        let dim = self.dim();
        for pl in planes {
            let (s, c) = (2.0 * theta * pl.kappa).sin_cos();
            let s = if inverse { -s } else { s };
            rotate_rows(m, dim, pl, c, s);
        }
    }

    /// `Y = K_T O` followed by `X = Y S`.
    fn target_times_state(&self, o: &[f64], s_target: f64, y: &mut Vec<f64>, x: &mut Vec<f64>) {
        let dim = self.dim();
        let n = self.n;
        y.clear();
        y.resize(dim * dim, 0.0);
        let weighted = [(&self.z_planes, s_target), (&self.x_planes, 1.0 - s_target)];
        for (planes, w) in weighted {
            if w == 0.0 {
                continue;
            }
            for pl in planes.iter() {
                let k = w * pl.kappa;
                for c in 0..dim {
                    y[pl.p * dim + c] += k * o[pl.q * dim + c];
                    y[pl.q * dim + c] -= k * o[pl.p * dim + c];
                }
            }
        }
        x.clear();
        x.resize(dim * dim, 0.0);
        for r in 0..dim {
            for j in 0..n {
                x[r * dim + j] = -y[r * dim + n + j];
                x[r * dim + n + j] = y[r * dim + j];
            }
        }
    }

    fn check(&self, theta: &[f64], s_target: f64) -> Result<usize> {
        if theta.is_empty() || theta.len() % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: theta.len() + theta.len() % 2,
                found: theta.len(),
            });
        }
        if !(0.0..=1.0).contains(&s_target) {
            return Err(Error::OutOfRange {
                name: "s_target",
                value: s_target,
                range: "[0, 1]",
            });
        }
        Ok(theta.len() / 2)
    }

    /// Final orthogonal state `O(θ)` (row-major).
    pub fn state(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let depth = self.check(theta, 0.0)?;
        let dim = self.dim();
        let mut o = vec![0.0; dim * dim];
        self.initial_state(&mut o);
        for k in 0..2 * depth {
            let (planes, idx) = self.half_layer(k, depth);
            self.apply_half_layer(&mut o, planes, theta[idx], false);
        }
        Ok(o)
    }

    pub fn energy(&self, theta: &[f64], s_target: f64, ws: &mut Workspace) -> Result<f64> {
        self.check(theta, s_target)?;
        let o = self.state(theta)?;
        self.target_times_state(&o, s_target, &mut ws.y, &mut ws.x);
        let e = -0.5 * ws.x.iter().zip(&o).map(|(a, b)| a * b).sum::<f64>();
        if !e.is_finite() {
            return Err(Error::NonFinite("QAOA energy".into()));
        }
        Ok(e)
    }

    /// Energy and its gradient in the flat layout, by storing the forward
    /// states and sweeping `X_k = B_k^T K_T O S` backwards, with
    /// `∂E/∂θ_k = -2 Tr(X_k^T K_k O_k)`.
    pub fn energy_and_gradient(
        &self,
        theta: &[f64],
        s_target: f64,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> Result<f64> {
        let depth = self.check(theta, s_target)?;
        if grad.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                found: grad.len(),
            });
        }
        let dim = self.dim();
        let block = dim * dim;
        let steps = 2 * depth;
        ws.states.resize((steps + 1) * block, 0.0);
        self.initial_state(&mut ws.states[..block]);
        for k in 0..steps {
            let (planes, idx) = self.half_layer(k, depth);
            let (prev, next) = ws.states.split_at_mut((k + 1) * block);
            next[..block].copy_from_slice(&prev[k * block..]);
            self.apply_half_layer(&mut next[..block], planes, theta[idx], false);
        }
        let fin = &ws.states[steps * block..];
        self.target_times_state(fin, s_target, &mut ws.y, &mut ws.x);
        let e = -0.5 * ws.x.iter().zip(fin).map(|(a, b)| a * b).sum::<f64>();
        for k in (0..steps).rev() {
            let (planes, idx) = self.half_layer(k, depth);
            let o = &ws.states[(k + 1) * block..(k + 2) * block];
            let x = &ws.x;
            let mut g = 0.0;
            for pl in planes {
                let (xp, xq) = (&x[pl.p * dim..(pl.p + 1) * dim], &x[pl.q * dim..(pl.q + 1) * dim]);
                let (op, oq) = (&o[pl.p * dim..(pl.p + 1) * dim], &o[pl.q * dim..(pl.q + 1) * dim]);
                let mut acc = 0.0;
                for c in 0..dim {
                    acc += xp[c] * oq[c] - xq[c] * op[c];
                }
                g += pl.kappa * acc;
            }
            grad[idx] = -2.0 * g;
            self.apply_half_layer(&mut ws.x, planes, theta[idx], true);
        }
        if !e.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("QAOA energy or gradient".into()));
        }
        Ok(e)
    }

    /// `E - E_gs` and its gradient; see [`TargetFrame`].
    pub fn excess_and_gradient(
        &self,
        theta: &[f64],
        s_target: f64,
        frame: &TargetFrame,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.energy_and_gradient(theta, s_target, ws, grad)?;
        let block = self.dim() * self.dim();
        let fin = &ws.states[theta.len() * block..(theta.len() + 1) * block];
        let r = frame.excess_energy(fin, &mut ws.q);
        if !r.is_finite() {
            return Err(Error::NonFinite("excess energy".into()));
        }
        Ok(r)
    }

    pub fn excess(&self, theta: &[f64], frame: &TargetFrame, ws: &mut Workspace) -> Result<f64> {
        let o = self.state(theta)?;
        Ok(frame.excess_energy(&o, &mut ws.q))
    }

    /// The Nambu unitary `𝕌 = Ω^† O Ω` of the circuit.
    pub fn nambu_unitary(&self, theta: &[f64]) -> Result<CMatrix> {
        let o = self.state(theta)?;
        let dim = self.dim();
        let om = CMatrix::from_fn(dim, dim, |r, c| C64::new(o[r * dim + c], 0.0));
        let omega = crate::nambu::majorana_map(self.n);
        Ok(omega.adjoint() * om * omega)
    }
}
