//! Coupling families: the frustrated ring (with or without reflection
//! symmetry), its disordered variants and the uniform chain.
//!
//! Bond indices in the docs are 1-based, `J_j` couples sites `j` and `j+1`,
//! and `J_N` closes the ring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nambu::CouplingConfig;

/// Tolerance for the coupling-pattern predicates.
pub const SYMMETRY_TOL: f64 = 1e-14;

fn default_j() -> f64 {
    1.0
}

fn default_h() -> f64 {
    1.0
}

fn default_interval() -> [f64; 2] {
    [0.8, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub seed: u64,
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
}

/// Frustrated ring: `J_{(N+1)/2} = jw`, `J_{(N-1)/2} = jw_prime`,
/// `J_N = -jf`, every other bond `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub n_sites: usize,
    #[serde(default = "default_j")]
    pub j: f64,
    pub jw: f64,
    pub jw_prime: f64,
    /// Positive magnitude; the stored coupling is `-jf`.
    pub jf: f64,
    #[serde(default = "default_h")]
    pub field_h: f64,
    #[serde(default)]
    pub disorder: Option<DisorderSpec>,
}

impl RingSpec {
    pub fn new(n_sites: usize, jw: f64, jw_prime: f64, jf: f64) -> Self {
        RingSpec {
            n_sites,
            j: 1.0,
            jw,
            jw_prime,
            jf,
            field_h: 1.0,
            disorder: None,
        }
    }

    /// The ring used throughout with broken reflection symmetry.
    pub fn broken(n_sites: usize) -> Self {
        Self::new(n_sites, 0.5, 0.55, 0.45)
    }

    /// The reflection-symmetric ring, `jw = jw_prime`.
    pub fn symmetric(n_sites: usize) -> Self {
        Self::new(n_sites, 0.5, 0.5, 0.45)
    }

    pub fn with_disorder(mut self, seed: u64, symmetric: bool) -> Self {
        self.disorder = Some(DisorderSpec {
            seed,
            symmetric,
            interval: default_interval(),
        });
        self
    }

    /// Number of randomised bond pairs, `⌊(N-1)/4⌋`.
    pub fn n_rand(&self) -> usize {
        (self.n_sites.saturating_sub(1)) / 4
    }

    pub fn build(&self) -> Result<CouplingConfig> {
        match &self.disorder {
            None => clean_ring(self),
            Some(_) => disordered_ring(self),
        }
    }
}

fn check_odd(n: usize) -> Result<()> {
    if n % 2 == 0 || n < 5 {
        return Err(Error::config(format!(
            "frustrated rings need an odd number of sites N >= 5, got {n}"
        )));
    }
    Ok(())
}

fn clean_ring(spec: &RingSpec) -> Result<CouplingConfig> {
    let n = spec.n_sites;
    check_odd(n)?;
    let mut j = vec![spec.j; n];
    j[(n + 1) / 2 - 1] = spec.jw;
    j[(n - 1) / 2 - 1] = spec.jw_prime;
    j[n - 1] = -spec.jf;
    let label = if spec.jw == spec.jw_prime {
        "frustrated-symmetric"
    } else {
        "frustrated-broken"
    };
    CouplingConfig::new(j, spec.field_h, label)
}

pub fn frustrated_ring(n: usize, jw: f64, jw_prime: f64, jf: f64) -> Result<CouplingConfig> {
    clean_ring(&RingSpec::new(n, jw, jw_prime, jf))
}

/// Replaces `J_j` and `J_{N-j}`, `j = 1..⌊(N-1)/4⌋`, by uniform draws from the
/// disorder interval. With the symmetric flag one draw is shared by each pair.
pub fn disordered_ring(spec: &RingSpec) -> Result<CouplingConfig> {
    let d = spec
        .disorder
        .as_ref()
        .ok_or_else(|| Error::config("disordered_ring needs a disorder block"))?;
    let [lo, hi] = d.interval;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::config(format!("invalid disorder interval [{lo}, {hi}]")));
    }
    let mut cfg = clean_ring(spec)?;
    let n = spec.n_sites;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    for j in 1..=spec.n_rand() {
        let a = rng.random_range(lo..=hi);
        let b = if d.symmetric { a } else { rng.random_range(lo..=hi) };
        cfg.couplings[j - 1] = a;
        cfg.couplings[n - j - 1] = b;
    }
    cfg.label = format!(
        "disordered-{}-seed{}",
        if d.symmetric { "symmetric" } else { "broken" },
        d.seed
    );
    Ok(cfg)
}

pub fn uniform_chain(n: usize) -> Result<CouplingConfig> {
    CouplingConfig::new(vec![1.0; n], 1.0, "uniform")
}

/// `J_j = J_{N-j}` for `j = 1..N-1`.
pub fn is_reflection_symmetric(config: &CouplingConfig) -> bool {
    let n = config.couplings.len();
    (1..n).all(|j| (config.couplings[j - 1] - config.couplings[n - j - 1]).abs() <= SYMMETRY_TOL)
}

pub fn is_translation_invariant(config: &CouplingConfig) -> bool {
    let first = config.couplings.first().copied().unwrap_or(0.0);
    config.couplings.iter().all(|&j| (j - first).abs() <= SYMMETRY_TOL)
}
