use serde::{Deserialize, Serialize};

use super::spectrum::{sorted_svd, two_lowest_levels, ZERO_MODE_TOL};
use super::{check_s, precise, CouplingConfig, FermionParity, RealBlocks};
use crate::error::{Error, Result};

/// The two lowest many-body levels of one parity sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorLevels {
    pub sector: FermionParity,
    /// Ascending quasiparticle energies.
    pub epsilons: Vec<f64>,
    pub vacuum_energy: f64,
    pub vacuum_parity: FermionParity,
    pub levels: [f64; 2],
}

impl SectorLevels {
    /// Level splitting inside the sector, computed without subtracting the
    /// (large) vacuum energy.
    pub fn gap(&self) -> f64 {
        let e1 = self.epsilons.first().copied().unwrap_or(0.0);
        let e2 = self.epsilons.get(1).copied().unwrap_or(f64::INFINITY);
        if self.vacuum_parity == self.sector {
            2.0 * (e1 + e2)
        } else {
            2.0 * (e2 - e1)
        }
    }
}

/// Sector levels from the singular values of `A - B`. The vacuum parity is
/// `sign(det Φ · det Ψ)` for `A - B = Φ Σ Ψ^T`, i.e. the determinant of the
/// Bogoliubov transform in the Majorana basis.
pub fn sector_levels(config: &CouplingConfig, s: f64, sector: FermionParity) -> Result<SectorLevels> {
    config.validate()?;
    check_s(s)?;
    let m = RealBlocks::new(config, s, sector).svd_matrix();
    let (sigma, phi, psi) = sorted_svd(m)?;
    let det = phi.lu().determinant() * psi.lu().determinant();
    if !det.is_finite() {
        return Err(Error::NonFinite("singular-vector determinant".into()));
    }
    let epsilons: Vec<f64> = sigma
        .into_iter()
        .map(|e| if e < ZERO_MODE_TOL { 0.0 } else { e })
        .collect();
    let vacuum_energy = -epsilons.iter().sum::<f64>();
    let vacuum_parity = FermionParity::from_sign(det);
    let levels = two_lowest_levels(&epsilons, vacuum_energy, vacuum_parity, sector);
    Ok(SectorLevels {
        sector,
        epsilons,
        vacuum_energy,
        vacuum_parity,
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GapKind {
    /// Lowest two levels over both parity sectors.
    Global,
    /// Lowest two levels of the even sector, the one containing `|+⟩^⊗N`
    /// and hence the one the annealing and QAOA dynamics explore.
    #[default]
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub s: f64,
    pub gap: f64,
    pub sector_e0: FermionParity,
    pub sector_e1: FermionParity,
}

pub fn gap_point(config: &CouplingConfig, s: f64, kind: GapKind) -> Result<GapPoint> {
    match kind {
        GapKind::Even | GapKind::Odd => {
            let sector = if kind == GapKind::Even {
                FermionParity::Even
            } else {
                FermionParity::Odd
            };
            let lv = sector_levels(config, s, sector)?;
            Ok(GapPoint {
                s,
                gap: lv.gap(),
                sector_e0: sector,
                sector_e1: sector,
            })
        }
        GapKind::Global => {
            let even = sector_levels(config, s, FermionParity::Even)?;
            let odd = sector_levels(config, s, FermionParity::Odd)?;
            let mut all = [
                (even.levels[0], FermionParity::Even),
                (even.levels[1], FermionParity::Even),
                (odd.levels[0], FermionParity::Odd),
                (odd.levels[1], FermionParity::Odd),
            ];
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.sign().total_cmp(&b.1.sign()).reverse()));
            let gap = if all[0].1 == all[1].1 {
                // Both levels in one sector: use the cancellation-free form.
                if all[0].1 == FermionParity::Even {
                    even.gap()
                } else {
                    odd.gap()
                }
            } else {
                all[1].0 - all[0].0
            };
            Ok(GapPoint {
                s,
                gap: gap.max(0.0),
                sector_e0: all[0].1,
                sector_e1: all[1].1,
            })
        }
    }
}

/// `E_1 - E_0` over both parity sectors.
pub fn many_body_gap(config: &CouplingConfig, s: f64) -> Result<f64> {
    Ok(gap_point(config, s, GapKind::Global)?.gap)
}

/// `E_1 - E_0` restricted to one parity sector.
pub fn sector_gap(config: &CouplingConfig, s: f64, sector: FermionParity) -> Result<f64> {
    Ok(sector_levels(config, s, sector)?.gap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub kind: GapKind,
    pub points: Vec<GapPoint>,
    pub min_gap: Option<f64>,
    pub argmin: Option<f64>,
}

impl GapScan {
    fn from_points(kind: GapKind, points: Vec<GapPoint>) -> Self {
        let best = points
            .iter()
            .min_by(|a, b| a.gap.total_cmp(&b.gap))
            .map(|p| (p.gap, p.s));
        GapScan {
            kind,
            points,
            min_gap: best.map(|b| b.0),
            argmin: best.map(|b| b.1),
        }
    }
}

/// Even-sector gap over `s_grid`.
pub fn gap_scan(config: &CouplingConfig, s_grid: &[f64]) -> Result<GapScan> {
    gap_scan_with(config, s_grid, GapKind::Even)
}

pub fn gap_scan_with(config: &CouplingConfig, s_grid: &[f64], kind: GapKind) -> Result<GapScan> {
    let points = s_grid
        .iter()
        .map(|&s| gap_point(config, s, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(GapScan::from_points(kind, points))
}

/// Minimum of the gap on `[lo, hi]` by repeated grid refinement: each pass
/// lays `points` nodes over the current window and shrinks it to the two
/// neighbouring cells around the best node.
pub fn locate_minimum(
    config: &CouplingConfig,
    lo: f64,
    hi: f64,
    kind: GapKind,
    tol: f64,
) -> Result<GapPoint> {
    check_s(lo)?;
    check_s(hi)?;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::config("locate_minimum needs lo < hi and tol > 0"));
    }
    const POINTS: usize = 41;
    let (mut a, mut b) = (lo, hi);
    let mut best = gap_point(config, lo, kind)?;
    loop {
        let step = (b - a) / (POINTS - 1) as f64;
        let grid: Vec<f64> = (0..POINTS).map(|i| a + step * i as f64).collect();
        let scan = gap_scan_with(config, &grid, kind)?;
        let i = scan
            .points
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.gap.total_cmp(&y.1.gap))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if scan.points[i].gap <= best.gap {
            best = scan.points[i];
        }
        if step < tol {
            return Ok(best);
        }
        a = grid[i.saturating_sub(2)];
        b = grid[(i + 2).min(POINTS - 1)];
    }
}

/// Location and depth of the sector-gap bottleneck.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bottleneck {
    pub s_b: f64,
    pub min_gap: f64,
    /// Whether the extended-precision refinement was needed.
    pub extended: bool,
}

/// Below this, the double-precision sector gap is dominated by rounding and
/// the minimum is refined in extended precision.
pub const EXTENDED_THRESHOLD: f64 = 1e-6;

/// Nodes of the coarse scan that seeds [`bottleneck`].
pub const BOTTLENECK_GRID: usize = 201;
const MAX_CANDIDATES: usize = 8;

/// Bottleneck of the gap in `sector` on `[lo, hi]`, resolving exponentially
/// small gaps beyond double precision. Every local minimum of a coarse scan
/// is refined separately: the avoided crossing is a narrow V that a single
/// shrinking window can lose to a shallower, smoother minimum.
pub fn bottleneck(
    config: &CouplingConfig,
    sector: FermionParity,
    lo: f64,
    hi: f64,
) -> Result<Bottleneck> {
    check_s(lo)?;
    check_s(hi)?;
    if !(lo < hi) {
        return Err(Error::config("bottleneck needs lo < hi"));
    }
    let kind = match sector {
        FermionParity::Even => GapKind::Even,
        FermionParity::Odd => GapKind::Odd,
    };
    let step = (hi - lo) / (BOTTLENECK_GRID - 1) as f64;
    let grid: Vec<f64> = (0..BOTTLENECK_GRID).map(|i| lo + step * i as f64).collect();
    let scan = gap_scan_with(config, &grid, kind)?;
    let g: Vec<f64> = scan.points.iter().map(|p| p.gap).collect();
    let last = g.len() - 1;
    let mut candidates: Vec<usize> = (0..=last)
        .filter(|&i| (i == 0 || g[i] < g[i - 1]) && (i == last || g[i] <= g[i + 1]))
        .collect();
    candidates.sort_by(|&a, &b| g[a].total_cmp(&g[b]));
    candidates.truncate(MAX_CANDIDATES);

    let mut coarse: Option<GapPoint> = None;
    for i in candidates {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(last)];
        let p = locate_minimum(config, a, b, kind, 1e-9)?;
        if coarse.is_none_or(|c| p.gap < c.gap) {
            coarse = Some(p);
        }
    }
    let coarse = coarse.expect("the scan has at least one local minimum");
    if coarse.gap > EXTENDED_THRESHOLD || coarse.s <= 0.0 || coarse.s >= 1.0 {
        return Ok(Bottleneck {
            s_b: coarse.s,
            min_gap: coarse.gap,
            extended: false,
        });
    }
    let refined = precise::minimize_gap(config, sector, coarse.s)?;
    Ok(Bottleneck {
        s_b: refined.s,
        min_gap: refined.gap,
        extended: true,
    })
}
