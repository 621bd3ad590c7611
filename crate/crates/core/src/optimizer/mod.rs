//! Multistart minimisation of the QAOA energy and the empirical critical
//! depth: the smallest `P` at which at least one restart reaches the target
//! ground energy to within the numerical zero.

pub mod lbfgs;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lbfgs::{LbfgsOutcome, LbfgsSettings, StopReason};

use crate::error::{Error, Result};
use crate::evolution::{MajoranaCircuit, TargetFrame, Workspace};
use crate::nambu::CouplingConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub n_samples: usize,
    pub init_range: [f64; 2],
    pub seed: u64,
    /// Euclidean norm of the gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// L-BFGS history length. The landscapes near the critical depth are
    /// ill-conditioned enough that a history comparable to `2P` is needed.
    pub memory: usize,
    pub numerical_zero: f64,
    /// A restart stops once its residual is below
    /// `early_stop_fraction * numerical_zero`; `0` disables this.
    pub early_stop_fraction: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            n_samples: 100,
            init_range: [0.0, TAU],
            seed: 0,
            grad_tol: 1e-10,
            max_iters: 10_000,
            memory: 200,
            numerical_zero: 1e-12,
            early_stop_fraction: 1e-2,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be at least 1"));
        }
        let [lo, hi] = self.init_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(format!("invalid init_range [{lo}, {hi}]")));
        }
        for (name, v) in [("grad_tol", self.grad_tol), ("numerical_zero", self.numerical_zero)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.early_stop_fraction) {
            return Err(Error::config("early_stop_fraction must lie in [0, 1]"));
        }
        if self.max_iters == 0 || self.memory == 0 {
            return Err(Error::config("max_iters and memory must be positive"));
        }
        Ok(())
    }
}

/// Seed of restart `index`: a SplitMix64 step on `master + index · φ`.
pub fn restart_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub depth: usize,
    pub s_target: f64,
    /// Flat layout `(θ^x_1..θ^x_P, θ^z_1..θ^z_P)`.
    pub initial_angles: Vec<f64>,
    pub final_angles: Vec<f64>,
    pub final_energy: f64,
    pub residual_energy_per_site: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub stop: StopReason,
    pub converged: bool,
}

impl RunRecord {
    pub fn succeeded(&self, numerical_zero: f64) -> bool {
        self.residual_energy_per_site <= numerical_zero
    }
}

/// A fixed instance: ring, depth and target. The objective is the excess
/// energy `E - E_gs` over the target ground state of the sector the circuit
/// lives in, evaluated as a sum of squares so that residuals far below the
/// rounding error of `E` itself stay resolvable.
#[derive(Debug, Clone)]
pub struct QaoaProblem {
    circuit: MajoranaCircuit,
    frame: TargetFrame,
    n: usize,
    depth: usize,
    s_target: f64,
}

impl QaoaProblem {
    pub fn new(config: &CouplingConfig, depth: usize, s_target: f64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::config("circuit depth must be at least 1"));
        }
        Ok(QaoaProblem {
            circuit: MajoranaCircuit::new(config)?,
            frame: TargetFrame::new(config, s_target)?,
            n: config.n_sites,
            depth,
            s_target,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn s_target(&self) -> f64 {
        self.s_target
    }

    pub fn ground_energy(&self) -> f64 {
        self.frame.ground_energy()
    }

    pub fn energy(&self, angles: &[f64]) -> Result<f64> {
        self.circuit.energy(angles, self.s_target, &mut Workspace::new())
    }

    /// `(E - E_gs) / N`.
    pub fn residual(&self, angles: &[f64]) -> Result<f64> {
        Ok(self.circuit.excess(angles, &self.frame, &mut Workspace::new())? / self.n as f64)
    }

    /// `E - E_gs` and its gradient.
    pub fn excess_and_gradient(&self, angles: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.circuit
            .excess_and_gradient(angles, self.s_target, &self.frame, &mut Workspace::new(), grad)
    }

    /// One local descent from uniform-random angles drawn with `seed`.
    pub fn run(&self, seed: u64, settings: &OptimizerSettings) -> Result<RunRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [lo, hi] = settings.init_range;
        let x0: Vec<f64> = (0..2 * self.depth).map(|_| rng.random_range(lo..hi)).collect();
        self.descend(seed, x0, settings)
    }

    /// Local descent from given angles.
    pub fn descend(&self, seed: u64, x0: Vec<f64>, settings: &OptimizerSettings) -> Result<RunRecord> {
        let mut ws = Workspace::new();
        let target = if settings.early_stop_fraction > 0.0 {
            settings.early_stop_fraction * settings.numerical_zero * self.n as f64
        } else {
            f64::NEG_INFINITY
        };
        let lb = LbfgsSettings {
            grad_tol: settings.grad_tol,
            max_iters: settings.max_iters,
            memory: settings.memory,
            target,
        };
        let out = lbfgs::minimize(
            |x, g| {
                self.circuit
                    .excess_and_gradient(x, self.s_target, &self.frame, &mut ws, g)
            },
            &x0,
            &lb,
        )?;
        Ok(RunRecord {
            seed,
            depth: self.depth,
            s_target: self.s_target,
            initial_angles: x0,
            residual_energy_per_site: out.f / self.n as f64,
            final_energy: self.ground_energy() + out.f,
            final_angles: out.x,
            iterations: out.iterations,
            evaluations: out.evaluations,
            grad_norm: out.grad_norm,
            converged: out.stop.converged(),
            stop: out.stop,
        })
    }
}

pub fn optimize_once(
    config: &CouplingConfig,
    depth: usize,
    s_target: f64,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<RunRecord> {
    settings.validate()?;
    QaoaProblem::new(config, depth, s_target)?.run(seed, settings)
}

/// All `n_samples` restarts, sorted by restart index.
pub fn residual_distribution(
    config: &CouplingConfig,
    depth: usize,
    s_target: f64,
    settings: &OptimizerSettings,
) -> Result<Vec<RunRecord>> {
    settings.validate()?;
    let problem = QaoaProblem::new(config, depth, s_target)?;
    (0..settings.n_samples as u64)
        .into_par_iter()
        .map(|k| problem.run(restart_seed(settings.seed, k), settings))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthOutcome {
    pub depth: usize,
    /// Restarts run before the first success (all of them on failure).
    pub restarts: usize,
    pub success: bool,
    pub min_residual: f64,
    pub best: RunRecord,
}

/// Restarts at one depth, in index order, stopping at the first success.
/// The outcome does not depend on the number of worker threads.
pub fn first_success(
    config: &CouplingConfig,
    depth: usize,
    s_target: f64,
    settings: &OptimizerSettings,
) -> Result<DepthOutcome> {
    settings.validate()?;
    let problem = QaoaProblem::new(config, depth, s_target)?;
    first_success_for(&problem, settings)
}

fn first_success_for(problem: &QaoaProblem, settings: &OptimizerSettings) -> Result<DepthOutcome> {
    let zero = settings.numerical_zero;
    let total = settings.n_samples as u64;
    let chunk = rayon::current_num_threads().max(1) as u64;
    let mut best: Option<RunRecord> = None;
    let mut start = 0;
    while start < total {
        let end = (start + chunk).min(total);
        let records: Vec<RunRecord> = (start..end)
            .into_par_iter()
            .map(|k| problem.run(restart_seed(settings.seed, k), settings))
            .collect::<Result<_>>()?;
        for (k, rec) in (start..end).zip(records) {
            if rec.succeeded(zero) {
                return Ok(DepthOutcome {
                    depth: problem.depth,
                    restarts: k as usize + 1,
                    success: true,
                    min_residual: rec.residual_energy_per_site,
                    best: rec,
                });
            }
            if best
                .as_ref()
                .is_none_or(|b| rec.residual_energy_per_site < b.residual_energy_per_site)
            {
                best = Some(rec);
            }
        }
        start = end;
    }
    let best = best.expect("n_samples >= 1");
    Ok(DepthOutcome {
        depth: problem.depth,
        restarts: settings.n_samples,
        success: false,
        min_residual: best.residual_energy_per_site,
        best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalDepth {
    /// `None` when no depth in the window succeeded.
    pub p_critical: Option<usize>,
    pub scanned: Vec<DepthOutcome>,
    pub ground_energy: f64,
    /// `E_gs(s_T) + (1 - s_T) N |h|`: how far the target ground state lies
    /// below the initial-state energy. Small values mean the threshold can
    /// fire below the true critical depth.
    pub ground_energy_offset: f64,
}

/// Ascending scan over `p_lo..=p_hi` with early exit at the first depth that
/// has a successful restart.
pub fn critical_depth_search(
    config: &CouplingConfig,
    s_target: f64,
    p_lo: usize,
    p_hi: usize,
    settings: &OptimizerSettings,
) -> Result<CriticalDepth> {
    settings.validate()?;
    if p_lo == 0 || p_lo > p_hi {
        return Err(Error::config(format!("invalid depth window [{p_lo}, {p_hi}]")));
    }
    let mut scanned = Vec::new();
    let mut p_critical = None;
    let mut ground_energy = f64::NAN;
    for depth in p_lo..=p_hi {
        let problem = QaoaProblem::new(config, depth, s_target)?;
        ground_energy = problem.ground_energy();
        let outcome = first_success_for(&problem, settings)?;
        log::info!(
            "depth {depth}: success={} after {} restarts, min residual {:.3e}",
            outcome.success,
            outcome.restarts,
            outcome.min_residual
        );
        let success = outcome.success;
        scanned.push(outcome);
        if success {
            p_critical = Some(depth);
            break;
        }
    }
    let n = config.n_sites as f64;
    Ok(CriticalDepth {
        p_critical,
        scanned,
        ground_energy,
        ground_energy_offset: ground_energy + (1.0 - s_target) * n * config.field_h.abs(),
    })
}
