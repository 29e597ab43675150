//! Property checks of functional inequalities on seeded random positive
//! fields.
//!
//! Inequalities whose constants are not known in closed form are handled in
//! calibration mode: the smallest constant that makes the inequality hold on a
//! seeded family is computed, and its stability under grid refinement and
//! family growth is the assertable property.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{random_positive_field, ScalarField};
use crate::functionals::{quantum_terms, C_K};
use crate::grid::TorusGrid;

/// Recipe of a seeded random positive field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub seed: u64,
    pub band: usize,
    pub roughness: f64,
}

impl FieldSpec {
    pub fn build(&self, grid: Arc<TorusGrid>) -> Result<ScalarField> {
        random_positive_field(grid, self.seed, self.band, self.roughness)
    }

    /// Same field rescaled to a prescribed mean.
    pub fn build_with_mean(&self, grid: Arc<TorusGrid>, mean: f64) -> Result<ScalarField> {
        let f = self.build(grid)?;
        let m = f.mean();
        Ok(f.scale(mean / m))
    }
}

/// Deterministic member `index` of a family; band cycles through `1..=4` and
/// roughness through `[0.25, 1.5]`.
pub fn family_member(base_seed: u64, index: usize) -> FieldSpec {
    FieldSpec {
        seed: base_seed.wrapping_mul(1_000_003).wrapping_add(index as u64),
        band: 1 + index % 4,
        roughness: 0.25 + 1.25 * ((index * 7) % 11) as f64 / 10.0,
    }
}

/// Outcome of one inequality evaluation.
///
/// `margin = rhs − lhs` for every check here; `pass ⇔ margin ≥ −slack`.
/// Calibration checks evaluate `rhs` without the unknown constant, so their
/// `−margin` is the constant this field requires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub slack: f64,
    pub params: BTreeMap<String, f64>,
    pub field: Option<FieldSpec>,
    pub dim: usize,
    pub n: usize,
    pub pass: bool,
}

impl InequalityVerdict {
    fn new(name: &str, lhs: f64, rhs: f64, slack: f64, grid: &TorusGrid) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            slack,
            params: BTreeMap::new(),
            field: None,
            dim: grid.dim(),
            n: grid.points_per_axis(),
            pass: margin.is_finite() && margin >= -slack,
        }
    }

    fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_field(mut self, spec: FieldSpec) -> Self {
        self.field = Some(spec);
        self
    }

    /// Constant needed by a calibration check for this field.
    pub fn required_constant(&self) -> f64 {
        -self.margin
    }
}

fn require_positive(f: &ScalarField, what: &str) -> Result<()> {
    if f.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("{what} must be strictly positive")));
    }
    Ok(())
}

fn require_nonnegative(f: &ScalarField, what: &str) -> Result<()> {
    if f.values().iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Domain(format!("{what} must be nonnegative")));
    }
    Ok(())
}

fn require_sigma(s: f64, name: &str) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive")))
    }
}

/// `∫ρ|∇²log ρ|² ≥ 2C_K(∫|Δ√ρ|² + ∫|∇ρ^{1/4}|⁴)`, slack `1e-8(1+|lhs|)`.
pub fn check_quantum_inequality(rho: &ScalarField) -> Result<InequalityVerdict> {
    require_positive(rho, "density")?;
    let q = quantum_terms(rho)?;
    // reversed orientation: the integral of the Hessian is the larger side
    let lhs = 2.0 * C_K * (q.lap_sqrt + q.grad_quarter4);
    let rhs = q.hessian_log;
    let slack = 1e-8 * (1.0 + rhs.abs());
    Ok(InequalityVerdict::new("quantum", lhs, rhs, slack, rho.grid()).with_param("c_k", C_K))
}

/// Branch of the `∫ρc` bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoCBranch {
    /// `σ₁∫ρ^γ`, valid for `γ > 8/5`.
    PowerGamma,
    /// `σ₁∫|∇√ρ|²`, valid for every `γ > 1`.
    GradSqrt,
}

impl RhoCBranch {
    pub fn for_gamma(gamma: f64) -> Self {
        if gamma > 1.6 {
            RhoCBranch::PowerGamma
        } else {
            RhoCBranch::GradSqrt
        }
    }
}

/// `∫ρc ≤ C + σ₁·term₁ + σ₂∫|∇c|²` evaluated with `C = 0`.
pub fn check_rho_c(
    rho: &ScalarField,
    c: &ScalarField,
    gamma: f64,
    sigma1: f64,
    sigma2: f64,
) -> Result<InequalityVerdict> {
    check_rho_c_branch(rho, c, gamma, sigma1, sigma2, RhoCBranch::for_gamma(gamma))
}

pub fn check_rho_c_branch(
    rho: &ScalarField,
    c: &ScalarField,
    gamma: f64,
    sigma1: f64,
    sigma2: f64,
    branch: RhoCBranch,
) -> Result<InequalityVerdict> {
    require_nonnegative(rho, "density")?;
    require_nonnegative(c, "signal")?;
    require_sigma(sigma1, "sigma1")?;
    require_sigma(sigma2, "sigma2")?;
    let lhs = rho.mul(c).integral();
    let term1 = match branch {
        RhoCBranch::PowerGamma => rho.map(|r| r.powf(gamma)).integral(),
        RhoCBranch::GradSqrt => rho.map(f64::sqrt).gradient().norm_sq().integral(),
    };
    let term2 = c.gradient().norm_sq().integral();
    let rhs = sigma1 * term1 + sigma2 * term2;
    let theta = match branch {
        RhoCBranch::PowerGamma => f64::NAN,
        RhoCBranch::GradSqrt => 0.6,
    };
    let v = InequalityVerdict::new("rho_c", lhs, rhs, f64::INFINITY, rho.grid())
        .with_param("gamma", gamma)
        .with_param("sigma1", sigma1)
        .with_param("sigma2", sigma2)
        .with_param("branch_power_gamma", (branch == RhoCBranch::PowerGamma) as u8 as f64);
    Ok(if theta.is_nan() { v } else { v.with_param("theta", theta) })
}

/// Branch of the `∫ρ²` bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho2Branch {
    /// `C + ∫ρ^γ`, `γ ≥ 2`, with `C` explicit.
    Direct,
    /// `C + σ∫|∇ρ^{γ/2}|²`, `4/3 < γ < 2`.
    GradPowerHalf,
    /// `C + σ∫|∇ρ^{1/4}|⁴`, any `γ > 1`.
    GradQuarter,
}

impl Rho2Branch {
    pub fn for_gamma(gamma: f64) -> Result<Self> {
        if gamma >= 2.0 {
            Ok(Rho2Branch::Direct)
        } else if gamma > 4.0 / 3.0 {
            Ok(Rho2Branch::GradPowerHalf)
        } else if gamma > 1.0 {
            Ok(Rho2Branch::GradQuarter)
        } else {
            Err(Error::Domain(format!("gamma = {gamma} must exceed 1")))
        }
    }

    fn theta(self, gamma: f64) -> f64 {
        match self {
            Rho2Branch::Direct => f64::NAN,
            Rho2Branch::GradPowerHalf => 3.0 * gamma / (6.0 * gamma - 2.0),
            Rho2Branch::GradQuarter => 3.0 / 8.0,
        }
    }
}

/// `max_{0 ≤ s ≤ s_max} (s² − s^γ)` for `γ ≥ 2`.
pub fn rho2_direct_constant(gamma: f64, s_max: f64) -> f64 {
    let f = |s: f64| s * s - s.powf(gamma);
    if gamma <= 2.0 {
        return 0.0;
    }
    let critical = (2.0 / gamma).powf(1.0 / (gamma - 2.0));
    f(critical.min(s_max)).max(0.0)
}

/// Per-time form `∫ρ² ≤ C + (branch term)`; the direct branch carries its
/// explicit constant in `rhs`, the other branches evaluate with `C = 0`.
pub fn check_rho2(rho: &ScalarField, gamma: f64, sigma: f64) -> Result<InequalityVerdict> {
    check_rho2_branch(rho, gamma, sigma, Rho2Branch::for_gamma(gamma)?)
}

pub fn check_rho2_branch(
    rho: &ScalarField,
    gamma: f64,
    sigma: f64,
    branch: Rho2Branch,
) -> Result<InequalityVerdict> {
    require_positive(rho, "density")?;
    require_sigma(sigma, "sigma")?;
    if branch == Rho2Branch::Direct && gamma < 2.0 {
        return Err(Error::Domain("direct branch requires gamma >= 2".into()));
    }
    let lhs = rho.mul(rho).integral();
    let (rhs, slack) = match branch {
        Rho2Branch::Direct => {
            let c = rho2_direct_constant(gamma, rho.max());
            let rhs = c * rho.grid().volume() + rho.map(|r| r.powf(gamma)).integral();
            (rhs, 1e-10 * (1.0 + lhs.abs()))
        }
        Rho2Branch::GradPowerHalf => {
            let t = rho.map(|r| r.powf(0.5 * gamma)).gradient().norm_sq().integral();
            (sigma * t, f64::INFINITY)
        }
        Rho2Branch::GradQuarter => {
            let t = rho
                .map(|r| r.powf(0.25))
                .gradient()
                .norm_sq()
                .map(|x| x * x)
                .integral();
            (sigma * t, f64::INFINITY)
        }
    };
    let mut v = InequalityVerdict::new("rho2", lhs, rhs, slack, rho.grid())
        .with_param("gamma", gamma)
        .with_param("sigma", sigma);
    let theta = branch.theta(gamma);
    if !theta.is_nan() {
        v = v.with_param("theta", theta);
    }
    Ok(v)
}

/// Time-integrated form over samples `(t, ρ(t))`, trapezoid in time; the
/// constant term is `C·t` with `C` as in [`check_rho2`].
pub fn check_rho2_trajectory(samples: &[(f64, ScalarField)], gamma: f64, sigma: f64) -> Result<InequalityVerdict> {
    if samples.len() < 2 {
        return Err(Error::IncompleteData("at least two time samples are required".into()));
    }
    let verdicts = samples
        .iter()
        .map(|(_, r)| check_rho2(r, gamma, sigma))
        .collect::<Result<Vec<_>>>()?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for w in 0..samples.len() - 1 {
        let dt = samples[w + 1].0 - samples[w].0;
        if !(dt > 0.0) {
            return Err(Error::Domain("sample times must increase".into()));
        }
        lhs += 0.5 * dt * (verdicts[w].lhs + verdicts[w + 1].lhs);
        rhs += 0.5 * dt * (verdicts[w].rhs + verdicts[w + 1].rhs);
    }
    let grid = samples[0].1.grid();
    let slack = if verdicts[0].slack.is_finite() {
        1e-8 * (1.0 + lhs.abs())
    } else {
        f64::INFINITY
    };
    let mut v = InequalityVerdict::new("rho2_time", lhs, rhs, slack, grid);
    v.params = verdicts[0].params.clone();
    Ok(v)
}

/// `‖ρ⁻¹‖_∞ ≤ C(1+‖ρ⁻¹‖_{L³})³(1+‖ρ‖_{H^k})²` evaluated as the ratio
/// `lhs/rhs`; the ratio is the constant this field requires.
pub fn check_hk_positivity_bound(rho: &ScalarField, k: u32) -> Result<InequalityVerdict> {
    require_positive(rho, "density")?;
    let grid = rho.grid();
    let inv_sup = 1.0 / rho.min();
    let inv_l3 = rho.map(|r| r.powi(-3)).integral().cbrt();
    let hk = grid.sobolev_norm_sq(rho.values(), k)?.sqrt();
    let denom = (1.0 + inv_l3).powi(3) * (1.0 + hk).powi(2);
    let ratio = inv_sup / denom;
    // margin = −ratio so that required_constant() is the ratio itself
    let mut v = InequalityVerdict::new("hk_positivity", ratio, 0.0, f64::INFINITY, grid).with_param("k", k as f64);
    v.params.insert("inv_sup".into(), inv_sup);
    v.params.insert("inv_l3".into(), inv_l3);
    v.params.insert("hk_norm".into(), hk);
    Ok(v)
}

/// Calibration target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibrationTarget {
    RhoC { gamma: f64, sigma1: f64, sigma2: f64 },
    Rho2 { gamma: f64, sigma: f64 },
    Positivity { k: u32 },
}

impl CalibrationTarget {
    pub fn name(&self) -> &'static str {
        match self {
            CalibrationTarget::RhoC { .. } => "rho_c",
            CalibrationTarget::Rho2 { .. } => "rho2",
            CalibrationTarget::Positivity { .. } => "hk_positivity",
        }
    }
}

/// Seeded family with `L¹` caps: every density has mean `mean_rho` and every
/// signal mean `mean_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub dim: usize,
    pub n: usize,
    pub count: usize,
    pub base_seed: u64,
    pub mean_rho: f64,
    pub mean_c: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 32,
            count: 100,
            base_seed: 2024,
            mean_rho: 1.0,
            mean_c: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target: CalibrationTarget,
    pub family: FamilySpec,
    /// Smallest constant valid on the whole family.
    pub constant: f64,
    pub argmax: FieldSpec,
    pub verdicts: Vec<InequalityVerdict>,
}

fn evaluate_member(target: &CalibrationTarget, grid: &Arc<TorusGrid>, family: &FamilySpec, index: usize) -> Result<InequalityVerdict> {
    let spec = family_member(family.base_seed, index);
    let rho = spec.build_with_mean(grid.clone(), family.mean_rho)?;
    let v = match *target {
        CalibrationTarget::RhoC { gamma, sigma1, sigma2 } => {
            let cspec = family_member(family.base_seed ^ 0x5eed, index);
            let c = cspec.build_with_mean(grid.clone(), family.mean_c)?;
            check_rho_c(&rho, &c, gamma, sigma1, sigma2)?
        }
        CalibrationTarget::Rho2 { gamma, sigma } => check_rho2(&rho, gamma, sigma)?,
        CalibrationTarget::Positivity { k } => check_hk_positivity_bound(&rho, k)?,
    };
    Ok(v.with_field(spec))
}

/// Computes `C* = max over the family of the required constant`.
pub fn calibrate(target: CalibrationTarget, family: FamilySpec) -> Result<Calibration> {
    if family.count == 0 {
        return Err(Error::config("family.count", "must be at least 1"));
    }
    let grid = Arc::new(TorusGrid::periodic(family.dim, family.n)?);
    let verdicts = (0..family.count)
        .into_par_iter()
        .map(|i| evaluate_member(&target, &grid, &family, i))
        .collect::<Result<Vec<_>>>()?;
    let (best, constant) = verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.required_constant()))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if !constant.is_finite() {
        return Err(Error::NonFinite("calibrated constant"));
    }
    Ok(Calibration {
        target,
        family,
        constant,
        argmax: verdicts[best].field.expect("family verdicts carry their field"),
        verdicts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub name: String,
    pub coarse: f64,
    pub fine: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Compares `C*` on `(N, count)` against `(2N, 2·count)`; passes when both
/// are positive and within a factor 2.
pub fn calibration_stability(target: CalibrationTarget, family: FamilySpec) -> Result<StabilityReport> {
    let coarse = calibrate(target, family)?.constant;
    let fine_family = FamilySpec {
        n: 2 * family.n,
        count: 2 * family.count,
        ..family
    };
    let fine = calibrate(target, fine_family)?.constant;
    let ratio = if coarse > 0.0 && fine > 0.0 {
        fine.max(coarse) / fine.min(coarse)
    } else {
        f64::INFINITY
    };
    Ok(StabilityReport {
        name: target.name().to_string(),
        coarse,
        fine,
        ratio,
        pass: ratio <= 2.0,
    })
}

/// Quantum-inequality verdicts on `count` seeded fields, cycling `d = 1, 2, 3`
/// with `N = 64, 48, 24`.
pub fn quantum_suite(count: usize, base_seed: u64) -> Result<Vec<InequalityVerdict>> {
    let grids = [
        Arc::new(TorusGrid::periodic(1, 64)?),
        Arc::new(TorusGrid::periodic(2, 48)?),
        Arc::new(TorusGrid::periodic(3, 24)?),
    ];
    (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = family_member(base_seed, i);
            let grid = &grids[i % 3];
            let rho = spec.build(grid.clone())?;
            Ok(check_quantum_inequality(&rho)?.with_field(spec))
        })
        .collect()
}

pub fn write_verdicts_jsonl(path: &Path, verdicts: &[InequalityVerdict]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in verdicts {
        serde_json::to_writer(&mut file, v)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_verdicts_jsonl(path: &Path) -> Result<Vec<InequalityVerdict>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
