//! Run configuration, orchestration, persistence and parameter sweeps.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    default_test_bank, residual_convergence, weak_residual, ConvergenceReport, DiagnosticsBundle, WeakResidualTable,
};
use crate::error::{Error, Result};
use crate::field::{make_initial_data, InitialData, State};
use crate::grid::TorusGrid;
use crate::inequality::{
    calibrate, calibration_stability, quantum_suite, write_verdicts_jsonl, CalibrationTarget, FamilySpec, FieldSpec,
    InequalityVerdict, StabilityReport,
};
use crate::integrator::{integrate, RunStatus, StepControls, StepStats, Trajectory};
use crate::io::{read_energy_csv, read_json, read_snapshot, write_energy_csv, write_json, write_snapshot};
use crate::model::{ModelParams, RegParams};

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ENERGY_FILE: &str = "energy.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const WEAK_RESIDUAL_FILE: &str = "weak_residual.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const SWEEP_REPORT_FILE: &str = "sweep.json";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub side_length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 64,
            side_length: 2.0 * PI,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub seed: u64,
    pub band: usize,
    /// Bound on the log-density, log-signal and velocity perturbations.
    pub amplitude: f64,
    pub mean_rho: f64,
    pub mean_c: f64,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            band: 3,
            amplitude: 0.5,
            mean_rho: 1.0,
            mean_c: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Multiplier `M > 2` of the BD entropy blocks.
    pub bd_m: f64,
    pub weak_residual: bool,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            bd_m: 3.0,
            weak_residual: true,
        }
    }
}

/// Complete description of one run. The default is the Korteweg-level
/// reference run: `γ = 1.5`, `d = 2`, `N = 64`, `T = 1`, `κ = 1e-2`,
/// `r₀ = r₁ = 1e-3`, higher-order parameters zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub t_final: f64,
    pub record_every: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grid: GridSpec,
    pub model: ModelParams,
    pub reg: RegParams,
    pub initial: InitialSpec,
    pub controls: StepControls,
    pub diagnostics: DiagnosticsSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            t_final: 1.0,
            record_every: 0.05,
            output_dir: None,
            grid: GridSpec::default(),
            model: ModelParams::default(),
            reg: RegParams::default(),
            initial: InitialSpec::default(),
            controls: StepControls::default(),
            diagnostics: DiagnosticsSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config("<toml>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }

    /// SHA-256 of the canonical TOML form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            output_dir: None,
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("t_final", "must be positive and finite"));
        }
        if !(self.record_every > 0.0 && self.record_every <= self.t_final) {
            return Err(Error::config("record_every", "must lie in (0, t_final]"));
        }
        if !(1..=3).contains(&self.grid.dim) {
            return Err(Error::config("grid.dim", "must be 1, 2 or 3"));
        }
        if self.grid.n < 8 || !self.grid.n.is_multiple_of(2) {
            return Err(Error::config("grid.n", "must be even and at least 8"));
        }
        if !(self.grid.side_length > 0.0 && self.grid.side_length.is_finite()) {
            return Err(Error::config("grid.side_length", "must be positive"));
        }
        if self.initial.band == 0 || self.initial.band >= self.grid.n / 2 {
            return Err(Error::config("initial.band", "must lie in [1, N/2)"));
        }
        if !(self.initial.amplitude >= 0.0 && self.initial.amplitude.is_finite()) {
            return Err(Error::config("initial.amplitude", "must be nonnegative"));
        }
        if !(self.initial.mean_rho > 0.0) {
            return Err(Error::config("initial.mean_rho", "must be positive"));
        }
        if !(self.initial.mean_c > 0.0) {
            return Err(Error::config("initial.mean_c", "must be positive"));
        }
        if !(self.diagnostics.bd_m > 2.0) {
            return Err(Error::config("diagnostics.bd_m", "must exceed 2"));
        }
        self.model.validate()?;
        self.reg.validate()?;
        self.controls.validate()?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<TorusGrid>> {
        Ok(Arc::new(TorusGrid::new(self.grid.dim, self.grid.n, self.grid.side_length)?))
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        let i = &self.initial;
        make_initial_data(self.build_grid()?, i.seed, i.band, i.amplitude, i.mean_rho, i.mean_c)
    }

    /// Output directory: explicit override, then the configured one, then
    /// `runs/<hash prefix>`.
    pub fn resolve_output(&self, override_dir: Option<&Path>) -> PathBuf {
        override_dir
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.hash()[..12]))
    }
}

/// Aggregates that sweeps compare across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sup_e_k: f64,
    pub sup_e_bd: f64,
    pub sup_e_k_plus_e_bd: f64,
    pub dissipation_integral: f64,
    pub max_mass_drift: f64,
    pub energy_min_margin: f64,
    pub diagnostics_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    pub snapshot_times: Vec<f64>,
    pub status: RunStatus,
    pub stats: StepStats,
    pub summary: Option<RunSummary>,
    pub config: RunConfig,
    pub pass: bool,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("fields/snap_{index:05}.bin")
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub trajectory: Trajectory,
    pub diagnostics: Option<DiagnosticsBundle>,
    pub weak_residual: Option<WeakResidualTable>,
}

fn summarize(traj: &Trajectory, bundle: &DiagnosticsBundle) -> RunSummary {
    let r = &traj.reports;
    let sup = |f: &dyn Fn(&crate::functionals::EnergyReport) -> f64| r.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let diss = r
        .windows(2)
        .map(|w| 0.5 * (w[1].time - w[0].time) * (w[0].d_k + w[0].d_ho + w[1].d_k + w[1].d_ho))
        .sum();
    RunSummary {
        sup_e_k: sup(&|x| x.e_k),
        sup_e_bd: sup(&|x| x.e_bd),
        sup_e_k_plus_e_bd: sup(&|x| x.e_k + x.e_bd),
        dissipation_integral: diss,
        max_mass_drift: traj.max_mass_drift(),
        energy_min_margin: bundle.energy_inequality.min_margin,
        diagnostics_pass: bundle.pass(),
    }
}

/// Integrates `config`, persists every output under `out`, and returns the
/// manifest; an integration failure still persists the partial trajectory.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(out.join("fields"))?;
    let initial = config.initial_data()?;
    let traj = integrate(
        &initial,
        &config.model,
        &config.reg,
        &config.controls,
        config.t_final,
        config.record_every,
    )?;

    let mut files = vec![CONFIG_FILE.to_string()];
    std::fs::write(out.join(CONFIG_FILE), config.to_toml_string())?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        let name = snapshot_file_name(i);
        write_snapshot(&out.join(&name), s)?;
        files.push(name);
    }
    write_energy_csv(&out.join(ENERGY_FILE), &traj.reports)?;
    files.push(ENERGY_FILE.to_string());

    let bundle = DiagnosticsBundle::compute(&traj.reports, &config.model, &config.reg, config.diagnostics.bd_m)?;
    write_json(&out.join(DIAGNOSTICS_FILE), &bundle)?;
    files.push(DIAGNOSTICS_FILE.to_string());

    let weak = if config.diagnostics.weak_residual && traj.status.is_completed() {
        let table = weak_residual(
            &traj.snapshots,
            &config.model,
            &config.reg,
            &default_test_bank(config.grid.dim),
        )?;
        write_json(&out.join(WEAK_RESIDUAL_FILE), &table)?;
        files.push(WEAK_RESIDUAL_FILE.to_string());
        Some(table)
    } else {
        None
    };

    let summary = summarize(&traj, &bundle);
    let pass = traj.status.is_completed() && bundle.pass();
    files.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        code_version: CODE_VERSION.to_string(),
        seeds: vec![config.initial.seed],
        wall_time_s: started.elapsed().as_secs_f64(),
        files,
        snapshot_times: traj.snapshot_times(),
        status: traj.status.clone(),
        stats: traj.stats.clone(),
        summary: Some(summary),
        config: config.clone(),
        pass,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome {
        manifest,
        trajectory: traj,
        diagnostics: Some(bundle),
        weak_residual: weak,
    })
}

/// Regenerated diagnostics of a persisted run.
#[derive(Clone, Debug)]
pub struct ReportOutcome {
    pub diagnostics: DiagnosticsBundle,
    pub weak_residual: Option<WeakResidualTable>,
    /// Regenerated files equal the persisted ones byte for byte.
    pub identical: bool,
    pub pass: bool,
}

/// Recomputes the diagnostics of `run_dir` from its persisted files only.
pub fn report(run_dir: &Path) -> Result<ReportOutcome> {
    let manifest = RunManifest::load(run_dir)?;
    let config = &manifest.config;
    let reports = read_energy_csv(&run_dir.join(ENERGY_FILE))?;
    let bundle = DiagnosticsBundle::compute(&reports, &config.model, &config.reg, config.diagnostics.bd_m)?;
    let fresh = serde_json::to_string_pretty(&bundle)? + "\n";
    let stored = std::fs::read_to_string(run_dir.join(DIAGNOSTICS_FILE)).unwrap_or_default();
    let mut identical = fresh == stored;

    let weak = if manifest.files.iter().any(|f| f == WEAK_RESIDUAL_FILE) {
        let grid = config.build_grid()?;
        let snaps = manifest
            .files
            .iter()
            .filter(|f| f.starts_with("fields/"))
            .map(|f| read_snapshot(&run_dir.join(f), Some(&grid)))
            .collect::<Result<Vec<State>>>()?;
        let table = weak_residual(&snaps, &config.model, &config.reg, &default_test_bank(config.grid.dim))?;
        let fresh = serde_json::to_string_pretty(&table)? + "\n";
        let stored = std::fs::read_to_string(run_dir.join(WEAK_RESIDUAL_FILE)).unwrap_or_default();
        identical &= fresh == stored;
        Some(table)
    } else {
        None
    };
    let pass = manifest.status.is_completed() && bundle.pass();
    Ok(ReportOutcome {
        diagnostics: bundle,
        weak_residual: weak,
        identical,
        pass,
    })
}

/// One level of a fixed-step refinement study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub dt: f64,
    pub record_every: f64,
    pub max_violation: f64,
    pub max_abs_identity_defect: f64,
    pub min_margin: f64,
    pub max_mass_drift: f64,
    pub completed: bool,
}

fn fixed_step_trajectory(config: &RunConfig, dt: f64, record_every: f64) -> Result<Trajectory> {
    let controls = StepControls {
        implicit_terms: config.controls.implicit_terms,
        ..StepControls::fixed(dt)
    };
    integrate(
        &config.initial_data()?,
        &config.model,
        &config.reg,
        &controls,
        config.t_final,
        record_every,
    )
}

/// Energy-inequality bookkeeping under fixed-step halving `dt0 / 2^k`.
pub fn energy_refinement_study(config: &RunConfig, dt0: f64, levels: usize) -> Result<Vec<RefinementLevel>> {
    config.validate()?;
    (0..levels)
        .into_par_iter()
        .map(|k| {
            let dt = dt0 / f64::from(1u32 << k);
            let traj = fixed_step_trajectory(config, dt, config.record_every)?;
            let rep = crate::diagnostics::energy_inequality_report(&traj.reports, &config.reg)?;
            Ok(RefinementLevel {
                dt,
                record_every: config.record_every,
                max_violation: rep.max_violation,
                max_abs_identity_defect: rep.max_abs_identity_defect,
                min_margin: rep.min_margin,
                max_mass_drift: traj.max_mass_drift(),
                completed: traj.status.is_completed(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakResidualStudy {
    pub dts: Vec<f64>,
    pub record_every: Vec<f64>,
    pub tables: Vec<WeakResidualTable>,
    pub max_mass_drift: Vec<f64>,
    pub convergence: ConvergenceReport,
}

/// Weak residuals under joint halving of `(dt, record_every)` from
/// `(dt0, rec0)`; passes when every empirical order is at least 1.
pub fn weak_residual_study(config: &RunConfig, dt0: f64, rec0: f64, levels: usize) -> Result<WeakResidualStudy> {
    config.validate()?;
    if levels < 2 {
        return Err(Error::config("levels", "at least two levels are required"));
    }
    let bank = default_test_bank(config.grid.dim);
    let pairs: Vec<(f64, f64)> = (0..levels)
        .map(|k| {
            let f = f64::from(1u32 << k);
            (dt0 / f, rec0 / f)
        })
        .collect();
    let results = pairs
        .par_iter()
        .map(|&(dt, rec)| {
            let traj = fixed_step_trajectory(config, dt, rec)?;
            if !traj.status.is_completed() {
                return Err(Error::Integration {
                    time: traj.final_state().time,
                    dt,
                    reason: format!("{:?}", traj.status),
                });
            }
            let table = weak_residual(&traj.snapshots, &config.model, &config.reg, &bank)?;
            Ok((table, traj.max_mass_drift()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (tables, max_mass_drift): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let convergence = residual_convergence(&tables, 1.0);
    Ok(WeakResidualStudy {
        dts: pairs.iter().map(|p| p.0).collect(),
        record_every: pairs.iter().map(|p| p.1).collect(),
        tables,
        max_mass_drift,
        convergence,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepPreset {
    /// `(κ, r₀, r₁) → 0` with `r₀ = r₁ = κ`.
    KrLimit,
    /// `(δ, ε, η, μ) → 0` with `ε/√μ → 0`.
    HoLimit,
}

impl std::str::FromStr for SweepPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kr-limit" => Ok(SweepPreset::KrLimit),
            "ho-limit" => Ok(SweepPreset::HoLimit),
            other => Err(Error::config("preset", format!("unknown sweep preset `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub reg: RegParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub preset: SweepPreset,
    pub base: RunConfig,
    pub points: Vec<SweepPoint>,
    /// Allowed max/min ratio of `sup_t(E_K + E_BD)` across the points.
    pub uniformity_factor: f64,
}

impl SweepSpec {
    /// `κ ∈ {1e-2, 5e-3, 2.5e-3, 1.25e-3}` by default, `r₀ = r₁ = κ`.
    pub fn kr_limit(base: RunConfig, kappas: &[f64]) -> Result<Self> {
        let points = kappas
            .iter()
            .map(|&k| SweepPoint {
                label: format!("kappa_{k:.3e}"),
                reg: RegParams {
                    kappa: k,
                    r0: k,
                    r1: k,
                    ..base.reg
                },
            })
            .collect();
        let spec = Self {
            preset: SweepPreset::KrLimit,
            base,
            points,
            uniformity_factor: 2.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn default_kappas() -> [f64; 4] {
        [1e-2, 5e-3, 2.5e-3, 1.25e-3]
    }

    /// Level `k`: `ε = ε₀4⁻ᵏ`, `μ = μ₀2⁻ᵏ`, `δ = δ₀2⁻ᵏ`, `η = η₀2⁻ᵏ`, so
    /// `ε/√μ = (ε₀/√μ₀)2^{−3k/2}`.
    pub fn ho_limit(base: RunConfig, levels: usize, eps0: f64, mu0: f64, delta0: f64, eta0: f64) -> Result<Self> {
        let points = (0..levels)
            .map(|k| {
                let h = 0.5f64.powi(k as i32);
                SweepPoint {
                    label: format!("ho_level_{k}"),
                    reg: RegParams {
                        epsilon: eps0 * h * h,
                        mu: mu0 * h,
                        delta: delta0 * h,
                        eta: eta0 * h,
                        ..base.reg
                    },
                }
            })
            .collect();
        let spec = Self {
            preset: SweepPreset::HoLimit,
            base,
            points,
            uniformity_factor: 2.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Preset defaults; `ho-limit` runs in one dimension with `N = 32`.
    pub fn preset(preset: SweepPreset, base: RunConfig) -> Result<Self> {
        match preset {
            SweepPreset::KrLimit => Self::kr_limit(base, &Self::default_kappas()),
            SweepPreset::HoLimit => {
                let base = RunConfig {
                    grid: GridSpec {
                        dim: 1,
                        n: 32,
                        ..base.grid
                    },
                    ..base
                };
                Self::ho_limit(base, 4, 1e-2, 1e-3, 1e-10, 1e-4)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.points.is_empty() {
            return Err(Error::config("sweep.points", "at least one point is required"));
        }
        for p in &self.points {
            p.reg.validate()?;
        }
        let decreasing = |f: &dyn Fn(&RegParams) -> f64| self.points.windows(2).all(|w| f(&w[1].reg) < f(&w[0].reg));
        let ok = match self.preset {
            SweepPreset::KrLimit => decreasing(&|r| r.kappa) && decreasing(&|r| r.r0) && decreasing(&|r| r.r1),
            SweepPreset::HoLimit => {
                decreasing(&|r| r.epsilon)
                    && decreasing(&|r| r.mu)
                    && decreasing(&|r| r.delta)
                    && decreasing(&|r| r.eta)
                    && decreasing(&|r| r.epsilon / r.mu.sqrt())
            }
        };
        if !ok {
            return Err(Error::config("sweep.points", "parameter sequences must decrease strictly"));
        }
        Ok(())
    }

    /// The uniformity assertion applies only for `γ > 4/3`.
    pub fn asserts_uniformity(&self) -> bool {
        self.base.model.gamma > 4.0 / 3.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub kappa: f64,
    pub r0: f64,
    pub r1: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub mu: f64,
    pub completed: bool,
    pub sup_e_k: f64,
    pub sup_e_bd: f64,
    pub sup_e_k_plus_e_bd: f64,
    pub dissipation_integral: f64,
    pub max_mass_drift: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub preset: SweepPreset,
    pub gamma: f64,
    pub rows: Vec<SweepRow>,
    pub uniformity_ratio: f64,
    pub uniformity_factor: f64,
    pub asserted: bool,
    pub all_completed: bool,
    pub pass: bool,
}

pub fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point_{index:02}"))
}

fn row_from_manifest(label: &str, m: &RunManifest) -> SweepRow {
    let reg = &m.config.reg;
    let s = m.summary.as_ref();
    let get = |f: fn(&RunSummary) -> f64| s.map(f).unwrap_or(f64::NAN);
    SweepRow {
        label: label.to_string(),
        kappa: reg.kappa,
        r0: reg.r0,
        r1: reg.r1,
        delta: reg.delta,
        epsilon: reg.epsilon,
        eta: reg.eta,
        mu: reg.mu,
        completed: m.status.is_completed(),
        sup_e_k: get(|x| x.sup_e_k),
        sup_e_bd: get(|x| x.sup_e_bd),
        sup_e_k_plus_e_bd: get(|x| x.sup_e_k_plus_e_bd),
        dissipation_integral: get(|x| x.dissipation_integral),
        max_mass_drift: get(|x| x.max_mass_drift),
        wall_time_s: m.wall_time_s,
    }
}

fn summarize_rows(preset: SweepPreset, gamma: f64, factor: f64, asserted: bool, rows: Vec<SweepRow>) -> SweepSummary {
    let all_completed = rows.iter().all(|r| r.completed);
    let values: Vec<f64> = rows.iter().filter(|r| r.completed).map(|r| r.sup_e_k_plus_e_bd).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let uniformity_ratio = if min > 0.0 && !values.is_empty() { max / min } else { f64::INFINITY };
    let pass = all_completed && (!asserted || uniformity_ratio <= factor);
    SweepSummary {
        preset,
        gamma,
        rows,
        uniformity_ratio,
        uniformity_factor: factor,
        asserted,
        all_completed,
        pass,
    }
}

fn write_sweep_outputs(out: &Path, summary: &SweepSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join(SWEEP_SUMMARY_FILE))?;
    for r in &summary.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    write_json(&out.join(SWEEP_REPORT_FILE), summary)
}

/// Runs every point concurrently, each in `out/point_XX`; a failed point is
/// marked in the summary and the sweep continues.
pub fn sweep(spec: &SweepSpec, out: &Path) -> Result<SweepSummary> {
    spec.validate()?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("sweep_spec.json"), spec)?;
    let rows: Vec<SweepRow> = spec
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let config = RunConfig {
                reg: p.reg,
                output_dir: None,
                ..spec.base.clone()
            };
            match run(&config, &point_dir(out, i)) {
                Ok(o) => row_from_manifest(&p.label, &o.manifest),
                Err(_) => SweepRow {
                    label: p.label.clone(),
                    kappa: p.reg.kappa,
                    r0: p.reg.r0,
                    r1: p.reg.r1,
                    delta: p.reg.delta,
                    epsilon: p.reg.epsilon,
                    eta: p.reg.eta,
                    mu: p.reg.mu,
                    completed: false,
                    sup_e_k: f64::NAN,
                    sup_e_bd: f64::NAN,
                    sup_e_k_plus_e_bd: f64::NAN,
                    dissipation_integral: f64::NAN,
                    max_mass_drift: f64::NAN,
                    wall_time_s: 0.0,
                },
            }
        })
        .collect();
    let summary = summarize_rows(
        spec.preset,
        spec.base.model.gamma,
        spec.uniformity_factor,
        spec.asserts_uniformity(),
        rows,
    );
    write_sweep_outputs(out, &summary)?;
    Ok(summary)
}

/// Rebuilds the sweep summary from the per-point manifests alone.
pub fn aggregate_sweep(out: &Path) -> Result<SweepSummary> {
    let spec: SweepSpec = read_json(&out.join("sweep_spec.json"))?;
    let rows = spec
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let m = RunManifest::load(&point_dir(out, i))?;
            Ok(row_from_manifest(&p.label, &m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_rows(
        spec.preset,
        spec.base.model.gamma,
        spec.uniformity_factor,
        spec.asserts_uniformity(),
        rows,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyPreset {
    Quantum,
    RhoC,
    Rho2,
    Positivity,
    /// Refinement stability of every calibrated constant.
    Calibration,
}

impl std::str::FromStr for VerifyPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(VerifyPreset::Quantum),
            "rho-c" => Ok(VerifyPreset::RhoC),
            "rho2" => Ok(VerifyPreset::Rho2),
            "positivity" => Ok(VerifyPreset::Positivity),
            "calibration" => Ok(VerifyPreset::Calibration),
            other => Err(Error::config("preset", format!("unknown inequality preset `{other}`"))),
        }
    }
}

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_POSITIVITY_K: u32 = 2;

pub fn default_calibration_targets(gamma: f64) -> [CalibrationTarget; 3] {
    [
        CalibrationTarget::RhoC {
            gamma,
            sigma1: DEFAULT_SIGMA,
            sigma2: DEFAULT_SIGMA,
        },
        CalibrationTarget::Rho2 {
            gamma,
            sigma: DEFAULT_SIGMA,
        },
        CalibrationTarget::Positivity { k: DEFAULT_POSITIVITY_K },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub name: String,
    pub constant: f64,
    pub argmax: FieldSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub preset: VerifyPreset,
    pub count: usize,
    pub seed: u64,
    pub failed: usize,
    pub calibrations: Vec<CalibrationSummary>,
    pub stability: Vec<StabilityReport>,
    pub pass: bool,
    #[serde(skip)]
    pub verdicts: Vec<InequalityVerdict>,
}

/// Runs an inequality preset on `count` seeded fields. Calibration presets
/// use the `γ = 1.5` family in two dimensions on `N = 32`.
pub fn verify_inequalities(preset: VerifyPreset, count: usize, seed: u64) -> Result<VerificationOutcome> {
    if count == 0 {
        return Err(Error::config("count", "must be at least 1"));
    }
    let family = FamilySpec {
        count,
        base_seed: seed,
        ..FamilySpec::default()
    };
    let [rho_c, rho2, positivity] = default_calibration_targets(1.5);
    let mut calibrations = Vec::new();
    let mut stability = Vec::new();
    let mut verdicts = Vec::new();
    let mut one = |target: CalibrationTarget| -> Result<()> {
        let cal = calibrate(target, family)?;
        calibrations.push(CalibrationSummary {
            name: target.name().to_string(),
            constant: cal.constant,
            argmax: cal.argmax,
        });
        verdicts.extend(cal.verdicts);
        Ok(())
    };
    match preset {
        VerifyPreset::Quantum => verdicts = quantum_suite(count, seed)?,
        VerifyPreset::RhoC => one(rho_c)?,
        VerifyPreset::Rho2 => one(rho2)?,
        VerifyPreset::Positivity => one(positivity)?,
        VerifyPreset::Calibration => {
            for t in [rho_c, rho2, positivity] {
                stability.push(calibration_stability(t, family)?);
            }
        }
    }
    let failed = match preset {
        VerifyPreset::Quantum => verdicts.iter().filter(|v| !v.pass).count(),
        _ => 0,
    };
    let finite = calibrations.iter().all(|c| c.constant.is_finite());
    let pass = failed == 0 && finite && stability.iter().all(|s| s.pass);
    Ok(VerificationOutcome {
        preset,
        count,
        seed,
        failed,
        calibrations,
        stability,
        pass,
        verdicts,
    })
}

/// Writes `verdicts.jsonl` (when any) and `verification.json` under `out`.
pub fn write_verification(out: &Path, outcome: &VerificationOutcome) -> Result<()> {
    std::fs::create_dir_all(out)?;
    if !outcome.verdicts.is_empty() {
        write_verdicts_jsonl(&out.join("verdicts.jsonl"), &outcome.verdicts)?;
    }
    write_json(&out.join("verification.json"), outcome)
}
