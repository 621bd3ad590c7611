//! Experiment configs, orchestration and result files.
//!
//! One TOML file describes one experiment. [`run_experiment`] writes
//! `manifest.json`, `summary.json` and the kind-specific CSV tables into the
//! output directory. Floats in CSV files use `{:.16e}` (17 significant
//! digits, locale independent).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ed;
use crate::error::{Error, Result};
use crate::evolution::momentum::{momentum_energy, momentum_evolve};
use crate::evolution::{energy_of, evolve, gauge_matrix, qaoa_energy, qaoa_gradient, EvolutionCache, QaoaParams};
use crate::models::{uniform_chain, RingSpec};
use crate::nambu::{bottleneck, gap_scan_with, many_body_gap, CMatrix, CouplingConfig, FermionParity, GapKind, GapScan, C64};
use crate::optimizer::{
    critical_depth_search, first_success, residual_distribution, restart_seed, OptimizerSettings, RunRecord,
};
use crate::theory::{certify_gaussian_dimension, predict_pcr, DimensionReport, SymmetryClass, MAX_CERTIFY_SITES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Predict,
    GapScan,
    QaoaOpt,
    CriticalDepth,
    DisorderSweep,
    Verify,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Predict => "predict",
            ExperimentKind::GapScan => "gap-scan",
            ExperimentKind::QaoaOpt => "qaoa-opt",
            ExperimentKind::CriticalDepth => "critical-depth",
            ExperimentKind::DisorderSweep => "disorder-sweep",
            ExperimentKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Frustrated ring, optionally with a disorder block.
    Frustrated(RingSpec),
    Uniform {
        n_sites: usize,
        #[serde(default = "one")]
        field_h: f64,
    },
    Custom {
        couplings: Vec<f64>,
        #[serde(default = "one")]
        field_h: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self) -> Result<CouplingConfig> {
        match self {
            ModelSpec::Frustrated(spec) => spec.build(),
            ModelSpec::Uniform { n_sites, field_h } => Ok(uniform_chain(*n_sites)?.with_field(*field_h)),
            ModelSpec::Custom { couplings, field_h } => CouplingConfig::new(couplings.clone(), *field_h, "custom"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapSettings {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    pub kind: GapKind,
    /// Refine the minimum of the scan (in extended precision when needed).
    pub refine: bool,
}

impl Default for GapSettings {
    fn default() -> Self {
        GapSettings {
            s_min: 0.0,
            s_max: 1.0,
            points: 201,
            kind: GapKind::Even,
            refine: true,
        }
    }
}

/// Residual histogram with logarithmic bins on `[10^log10_lo, 10^log10_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSettings {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub bins: usize,
}

impl Default for HistogramSettings {
    fn default() -> Self {
        HistogramSettings {
            log10_lo: -14.0,
            log10_hi: 0.0,
            bins: 14,
        }
    }
}

impl HistogramSettings {
    pub fn edges(&self) -> Vec<f64> {
        let step = (self.log10_hi - self.log10_lo) / self.bins.max(1) as f64;
        (0..=self.bins)
            .map(|i| 10f64.powf(self.log10_lo + step * i as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub realizations: usize,
    /// Depths tried for every realization.
    pub depths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub instances: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { instances: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default = "one")]
    pub s_target: f64,
    #[serde(default)]
    pub depth: Option<usize>,
    /// Inclusive `[p_lo, p_hi]`.
    #[serde(default)]
    pub depth_range: Option<[usize; 2]>,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub gap: GapSettings,
    #[serde(default)]
    pub histogram: HistogramSettings,
    #[serde(default)]
    pub sweep: Option<SweepSettings>,
    #[serde(default)]
    pub verify: VerifySettings,
    /// Also run the Jacobian rank certificate (predict, `N ≤ 8`).
    #[serde(default)]
    pub certify: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Parses, applies `key=value` overrides to the TOML tree (dotted keys,
    /// values in TOML syntax or bare strings), then validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut tree: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !(0.0..=1.0).contains(&self.s_target) {
            return Err(Error::OutOfRange {
                name: "s_target",
                value: self.s_target,
                range: "[0, 1]",
            });
        }
        let needs_model = self.kind != ExperimentKind::Verify;
        let model = match (&self.model, needs_model) {
            (Some(m), _) => Some(m.build()?),
            (None, true) => return Err(Error::config(format!("{} needs a [model] table", self.kind.as_str()))),
            (None, false) => None,
        };
        match self.kind {
            ExperimentKind::QaoaOpt => {
                self.depth_or_err()?;
                self.histogram_edges()?;
            }
            ExperimentKind::CriticalDepth => {
                self.range_or_err()?;
            }
            ExperimentKind::DisorderSweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| Error::config("disorder-sweep needs a [sweep] table"))?;
                if sweep.realizations == 0 || sweep.depths.is_empty() || sweep.depths.contains(&0) {
                    return Err(Error::config("sweep needs realizations >= 1 and positive depths"));
                }
                match &self.model {
                    Some(ModelSpec::Frustrated(spec)) if spec.disorder.is_some() => {}
                    _ => return Err(Error::config("disorder-sweep needs a frustrated model with a disorder table")),
                }
            }
            ExperimentKind::GapScan => {
                let g = &self.gap;
                if !(0.0 <= g.s_min && g.s_min < g.s_max && g.s_max <= 1.0) || g.points < 2 {
                    return Err(Error::config("gap scan needs 0 <= s_min < s_max <= 1 and points >= 2"));
                }
            }
            ExperimentKind::Predict => {
                let n = model.as_ref().map_or(0, |m| m.n_sites);
                if self.certify && n > MAX_CERTIFY_SITES {
                    return Err(Error::config(format!(
                        "certify needs at most {MAX_CERTIFY_SITES} sites, got {n}"
                    )));
                }
            }
            ExperimentKind::Verify => {
                if self.verify.instances == 0 {
                    return Err(Error::config("verify needs instances >= 1"));
                }
            }
        }
        Ok(())
    }

    fn depth_or_err(&self) -> Result<usize> {
        match self.depth {
            Some(p) if p > 0 => Ok(p),
            _ => Err(Error::config("a positive depth is required")),
        }
    }

    fn range_or_err(&self) -> Result<[usize; 2]> {
        match self.depth_range {
            Some([lo, hi]) if lo > 0 && lo <= hi => Ok([lo, hi]),
            _ => Err(Error::config("depth_range = [p_lo, p_hi] with 1 <= p_lo <= p_hi is required")),
        }
    }

    fn histogram_edges(&self) -> Result<Vec<f64>> {
        let h = &self.histogram;
        if !(h.log10_lo.is_finite() && h.log10_hi.is_finite() && h.log10_lo < h.log10_hi) || h.bins == 0 {
            return Err(Error::config("histogram needs log10_lo < log10_hi and bins >= 1"));
        }
        Ok(h.edges())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(tree: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad override key '{key}'")));
    }
    let mut table = tree;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override key '{key}' descends into a non-table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ExperimentKind,
    /// SHA-256 of the config file bytes as read.
    pub config_sha256: String,
    pub overrides: Vec<String>,
    /// The validated config after overrides.
    pub effective_config: String,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub summary: serde_json::Value,
    pub files: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `s, gap, sector_of_E0, sector_of_E1`, in scan order.
pub fn emit_gap_curve(scan: &GapScan, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = scan
        .points
        .iter()
        .map(|p| vec![fmt(p.s), fmt(p.gap), p.sector_e0.to_string(), p.sector_e1.to_string()])
        .collect();
    write_rows(path, &["s", "gap", "sector_of_E0", "sector_of_E1"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Residuals at or below the numerical zero.
    pub numerical_zero: usize,
}

/// Residuals outside the edges are clamped into the first or last bin, so
/// the bin counts always add up to the number of runs.
pub fn residual_histogram(residuals: &[f64], edges: &[f64], numerical_zero: f64) -> Result<Histogram> {
    if edges.len() < 2 || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("bin edges must be finite and strictly increasing, at least two"));
    }
    let mut counts = vec![0; edges.len() - 1];
    for &r in residuals {
        let i = edges[1..edges.len() - 1].partition_point(|&e| e <= r);
        counts[i] += 1;
    }
    Ok(Histogram {
        edges: edges.to_vec(),
        counts,
        numerical_zero: residuals.iter().filter(|&&r| r <= numerical_zero).count(),
    })
}

/// `kind, bin_lo, bin_hi, count`: one `bin` row per bin, then one
/// `numerical-zero` row spanning `[0, zero]`.
pub fn emit_residual_histogram(hist: &Histogram, numerical_zero: f64, path: &Path) -> Result<()> {
    let mut rows: Vec<Vec<String>> = hist
        .edges
        .windows(2)
        .zip(&hist.counts)
        .map(|(w, c)| vec!["bin".into(), fmt(w[0]), fmt(w[1]), c.to_string()])
        .collect();
    rows.push(vec![
        "numerical-zero".into(),
        fmt(0.0),
        fmt(numerical_zero),
        hist.numerical_zero.to_string(),
    ]);
    write_rows(path, &["kind", "bin_lo", "bin_hi", "count"], &rows)
}

const RUN_HEADER: [&str; 13] = [
    "realization",
    "depth",
    "seed",
    "s_target",
    "final_energy",
    "residual_energy_per_site",
    "iterations",
    "evaluations",
    "grad_norm",
    "stop",
    "converged",
    "success",
    "final_angles",
];

fn run_row(realization: usize, r: &RunRecord, zero: f64) -> Vec<String> {
    let angles: Vec<String> = r.final_angles.iter().map(|&a| fmt(a)).collect();
    vec![
        realization.to_string(),
        r.depth.to_string(),
        r.seed.to_string(),
        fmt(r.s_target),
        fmt(r.final_energy),
        fmt(r.residual_energy_per_site),
        r.iterations.to_string(),
        r.evaluations.to_string(),
        fmt(r.grad_norm),
        serde_json::to_value(r.stop)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        r.converged.to_string(),
        r.succeeded(zero).to_string(),
        angles.join(";"),
    ]
}

/// Seed of disorder realization `r`: the restart counter scheme on the
/// bitwise complement of the master seed, so it never coincides with the
/// restart seeds of the same experiment.
pub fn realization_seed(master: u64, r: u64) -> u64 {
    restart_seed(!master, r)
}

/// Reads the config at `path`, applies overrides and runs it.
pub fn run_config_file(path: &Path, overrides: &[String], out: Option<&Path>) -> Result<ResultBundle> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::config(format!("config is not UTF-8: {e}")))?;
    let mut cfg = ExperimentConfig::from_toml_with_overrides(&text, overrides)?;
    if let Some(o) = out {
        cfg.out_dir = Some(o.to_path_buf());
    }
    run_experiment_with(&cfg, sha256_hex(&bytes), overrides.to_vec())
}

/// Runs an in-memory config; the manifest hashes its TOML serialisation.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let text = cfg.to_toml()?;
    run_experiment_with(cfg, sha256_hex(text.as_bytes()), Vec::new())
}

fn run_experiment_with(cfg: &ExperimentConfig, config_sha256: String, overrides: Vec<String>) -> Result<ResultBundle> {
    cfg.validate()?;
    let out_dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(cfg.kind.as_str()));
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let started_unix = unix_now();
    log::info!("{} -> {}", cfg.kind.as_str(), out_dir.display());

    let mut files = Vec::new();
    let summary = match cfg.kind {
        ExperimentKind::Predict => run_predict(cfg)?,
        ExperimentKind::GapScan => run_gap_scan(cfg, &out_dir, &mut files)?,
        ExperimentKind::QaoaOpt => run_qaoa_opt(cfg, &out_dir, &mut files)?,
        ExperimentKind::CriticalDepth => run_critical_depth(cfg, &out_dir, &mut files)?,
        ExperimentKind::DisorderSweep => run_disorder_sweep(cfg, &out_dir, &mut files)?,
        ExperimentKind::Verify => serde_json::to_value(run_verification(&cfg.verify)?)
            .map_err(|e| Error::Serialization(e.to_string()))?,
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    files.push(summary_path);

    let manifest = Manifest {
        kind: cfg.kind,
        config_sha256,
        overrides,
        effective_config: cfg.to_toml()?,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: unix_now(),
        threads: rayon::current_num_threads(),
    };
    let manifest_path = out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    files.push(manifest_path);
    Ok(ResultBundle {
        out_dir,
        manifest,
        summary,
        files,
    })
}

fn model(cfg: &ExperimentConfig) -> Result<CouplingConfig> {
    cfg.model
        .as_ref()
        .ok_or_else(|| Error::config("missing [model] table"))?
        .build()
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Serialization(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub label: String,
    pub report: DimensionReport,
    pub certified_rank: Option<usize>,
}

fn run_predict(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let config = model(cfg)?;
    let class = SymmetryClass::of(&config);
    let report = predict_pcr(config.n_sites, class)?;
    let certified_rank = if cfg.certify {
        Some(certify_gaussian_dimension(config.n_sites, class, 3, cfg.optimizer.seed)?)
    } else {
        None
    };
    to_json(&PredictSummary {
        label: config.label,
        report,
        certified_rank,
    })
}

fn run_gap_scan(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let config = model(cfg)?;
    let g = &cfg.gap;
    let step = (g.s_max - g.s_min) / (g.points - 1) as f64;
    let grid: Vec<f64> = (0..g.points).map(|i| g.s_min + step * i as f64).collect();
    let scan = gap_scan_with(&config, &grid, g.kind)?;
    let path = out.join("gap.csv");
    emit_gap_curve(&scan, &path)?;
    files.push(path);

    let refined = match (g.refine, g.kind, scan.argmin) {
        (true, GapKind::Even | GapKind::Odd, Some(s0)) => {
            let sector = if g.kind == GapKind::Odd {
                FermionParity::Odd
            } else {
                FermionParity::Even
            };
            log::debug!("grid minimum at s = {s0}");
            Some(bottleneck(&config, sector, g.s_min, g.s_max)?)
        }
        _ => None,
    };
    Ok(serde_json::json!({
        "label": config.label,
        "n_sites": config.n_sites,
        "kind": g.kind,
        "points": scan.points.len(),
        "grid_min_gap": scan.min_gap,
        "grid_argmin": scan.argmin,
        "bottleneck": refined,
    }))
}

fn run_qaoa_opt(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let config = model(cfg)?;
    let depth = cfg.depth_or_err()?;
    let zero = cfg.optimizer.numerical_zero;
    let records = residual_distribution(&config, depth, cfg.s_target, &cfg.optimizer)?;
    let rows: Vec<Vec<String>> = records.iter().map(|r| run_row(0, r, zero)).collect();
    let runs = out.join("runs.csv");
    write_rows(&runs, &RUN_HEADER, &rows)?;
    files.push(runs);

    let residuals: Vec<f64> = records.iter().map(|r| r.residual_energy_per_site).collect();
    let hist = residual_histogram(&residuals, &cfg.histogram_edges()?, zero)?;
    let hpath = out.join("histogram.csv");
    emit_residual_histogram(&hist, zero, &hpath)?;
    files.push(hpath);

    let min = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(serde_json::json!({
        "label": config.label,
        "n_sites": config.n_sites,
        "depth": depth,
        "s_target": cfg.s_target,
        "n_samples": records.len(),
        "successes": hist.numerical_zero,
        "min_residual": min,
        "converged": records.iter().filter(|r| r.converged).count(),
    }))
}

fn run_critical_depth(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let config = model(cfg)?;
    let [lo, hi] = cfg.range_or_err()?;
    let zero = cfg.optimizer.numerical_zero;
    let result = critical_depth_search(&config, cfg.s_target, lo, hi, &cfg.optimizer)?;
    let rows: Vec<Vec<String>> = result.scanned.iter().map(|d| run_row(0, &d.best, zero)).collect();
    let runs = out.join("runs.csv");
    write_rows(&runs, &RUN_HEADER, &rows)?;
    files.push(runs);
    let predicted = predict_pcr(config.n_sites, SymmetryClass::of(&config)).ok();
    let per_depth: Vec<serde_json::Value> = result
        .scanned
        .iter()
        .map(|d| {
            serde_json::json!({
                "depth": d.depth,
                "success": d.success,
                "restarts": d.restarts,
                "min_residual": d.min_residual,
            })
        })
        .collect();
    Ok(serde_json::json!({
        "label": config.label,
        "n_sites": config.n_sites,
        "s_target": cfg.s_target,
        "p_critical": result.p_critical,
        "predicted_p_critical": predicted.map(|p| p.p_critical),
        "ground_energy": result.ground_energy,
        "ground_energy_offset": result.ground_energy_offset,
        "depths": per_depth,
    }))
}

fn run_disorder_sweep(cfg: &ExperimentConfig, out: &Path, files: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("missing [sweep] table"))?;
    let base = match &cfg.model {
        Some(ModelSpec::Frustrated(spec)) => spec.clone(),
        _ => return Err(Error::config("disorder-sweep needs a frustrated model")),
    };
    let master = cfg.optimizer.seed;
    let zero = cfg.optimizer.numerical_zero;
    let mut rows = Vec::new();
    let mut realizations = Vec::new();
    for r in 0..sweep.realizations {
        let mut spec = base.clone();
        let d = spec.disorder.as_mut().expect("validated");
        d.seed = realization_seed(master, r as u64);
        let config = spec.build()?;
        let mut outcomes = Vec::new();
        for &depth in &sweep.depths {
            let o = first_success(&config, depth, cfg.s_target, &cfg.optimizer)?;
            log::info!(
                "realization {r} ({}) depth {depth}: success={} min residual {:.3e}",
                config.label,
                o.success,
                o.min_residual
            );
            rows.push(run_row(r, &o.best, zero));
            outcomes.push(serde_json::json!({
                "depth": depth,
                "success": o.success,
                "restarts": o.restarts,
                "min_residual": o.min_residual,
            }));
        }
        realizations.push(serde_json::json!({
            "realization": r,
            "disorder_seed": d_seed(&spec),
            "couplings": config.couplings,
            "depths": outcomes,
        }));
    }
    let runs = out.join("runs.csv");
    write_rows(&runs, &RUN_HEADER, &rows)?;
    files.push(runs);
    Ok(serde_json::json!({
        "n_sites": base.n_sites,
        "s_target": cfg.s_target,
        "realizations": realizations,
    }))
}

fn d_seed(spec: &RingSpec) -> Option<u64> {
    spec.disorder.as_ref().map(|d| d.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckSummary>,
    pub passed: usize,
    pub failed: usize,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

struct Check {
    name: &'static str,
    tolerance: f64,
    deviations: Vec<f64>,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Check {
            name,
            tolerance,
            deviations: Vec::new(),
        }
    }

    fn finish(self) -> CheckSummary {
        let failed = self.deviations.iter().filter(|&&d| !(d <= self.tolerance)).count();
        CheckSummary {
            name: self.name.to_string(),
            passed: self.deviations.len() - failed,
            failed,
            max_deviation: self.deviations.iter().copied().fold(0.0, f64::max),
            tolerance: self.tolerance,
        }
    }
}

fn random_ring(rng: &mut ChaCha8Rng, max_n: usize) -> Result<CouplingConfig> {
    let n = rng.random_range(2..=max_n);
    let j = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let h = rng.random_range(0.2..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    CouplingConfig::new(j, h, "random")
}

fn random_params(rng: &mut ChaCha8Rng, depth: usize) -> Result<QaoaParams> {
    let s = rng.random_range(0.0..=1.0);
    let tx = (0..depth).map(|_| rng.random_range(-1.5..1.5)).collect();
    let tz = (0..depth).map(|_| rng.random_range(-1.5..1.5)).collect();
    QaoaParams::new(tx, tz, s)
}

/// A random unitary from the QR factor of a random complex matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    m.qr().q()
}

/// Spot checks of the free-fermion engine against the dense spin reference
/// and against its own invariances.
pub fn run_verification(settings: &VerifySettings) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut energy = Check::new("energy-vs-state-vector", 1e-9);
    let mut gap = Check::new("gap-vs-dense", 1e-9);
    let mut grad = Check::new("gradient-vs-finite-difference", 1e-6);
    let mut gauge = Check::new("gauge-invariance", 1e-10);
    let mut momentum = Check::new("momentum-vs-real-space", 1e-10);
    for _ in 0..settings.instances {
        let config = random_ring(&mut rng, ed::MAX_STATE_SITES.min(8))?;
        let depth = rng.random_range(1..=4);
        let params = random_params(&mut rng, depth)?;
        let cache = EvolutionCache::new(&config)?;
        let e = qaoa_energy(&params, &cache)?;
        energy.deviations.push((e - ed::dense_qaoa_energy(&config, &params)?).abs());

        let gc = random_ring(&mut rng, 10)?;
        let s = rng.random_range(0.0..=1.0);
        gap.deviations.push((many_body_gap(&gc, s)? - ed::dense_gap(&gc, s)?).abs());

        let g = qaoa_gradient(&params, &cache)?;
        let flat = params.to_flat();
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..flat.len() {
            let mut p = flat.clone();
            p[k] += step;
            let ep = qaoa_energy(&QaoaParams::from_flat(&p, params.s_target)?, &cache)?;
            p[k] -= 2.0 * step;
            let em = qaoa_energy(&QaoaParams::from_flat(&p, params.s_target)?, &cache)?;
            let fd = (ep - em) / (2.0 * step);
            worst = worst.max((g[k] - fd).abs() / fd.abs().max(1.0));
        }
        grad.deviations.push(worst);

        let u = evolve(&params, &cache)?;
        let w = gauge_matrix(&random_unitary(config.n_sites, &mut rng))?;
        let uw = crate::nambu::NambuMatrix::unitary(u.entries() * w.entries())?;
        gauge
            .deviations
            .push((energy_of(&uw, &cache, params.s_target)? - e).abs());

        let n = 2 * rng.random_range(1..=5);
        let uni = uniform_chain(n)?;
        let ucache = EvolutionCache::new(&uni)?;
        let blocks = momentum_evolve(&params, &uni)?;
        momentum
            .deviations
            .push((momentum_energy(&blocks, &uni, params.s_target)? - qaoa_energy(&params, &ucache)?).abs());
    }
    let checks: Vec<CheckSummary> = [energy, gap, grad, gauge, momentum].into_iter().map(Check::finish).collect();
    let passed = checks.iter().map(|c| c.passed).sum();
    let failed = checks.iter().map(|c| c.failed).sum();
    Ok(VerifyReport { checks, passed, failed })
}

/// Process exit code for an error: 1 configuration, 2 numerical, 3 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::OutOfRange { .. } => 1,
        Error::Io { .. } | Error::Serialization(_) => 3,
        _ => 2,
    }
}

/// Real matrix as CSV rows, for debugging dumps.
pub fn emit_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = m.row_iter().map(|r| r.iter().map(|&x| fmt(x)).collect()).collect();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
