//! A posteriori checks along computed trajectories: energy and entropy
//! inequalities, mass and maximum-principle bookkeeping, and weak-form
//! residuals.
//!
//! Every report except the weak residual is a function of the energy reports
//! alone, so it can be regenerated from the persisted energy CSV.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{velocity_of, ScalarField, State, VectorField};
use crate::functionals::{korteweg_stress, EnergyReport, C_K};
use crate::model::{higher_order_force, strain_rate, ModelParams, RegParams};

fn require_reports(reports: &[EnergyReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::IncompleteData("no energy reports".into()));
    }
    if reports.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(Error::IncompleteData("report times must increase strictly".into()));
    }
    Ok(())
}

/// Cumulative trapezoid of `f` over the report times.
fn cumulative<F: Fn(&EnergyReport) -> f64>(reports: &[EnergyReport], f: F) -> Vec<f64> {
    let mut out = Vec::with_capacity(reports.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in reports.windows(2) {
        acc += 0.5 * (w[1].time - w[0].time) * (f(&w[0]) + f(&w[1]));
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyInequalityRow {
    pub time: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    /// `E_K − ∫ρc + E_ho + ∫(D_K + D_ho)` minus its initial value.
    pub identity_defect: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyInequalityReport {
    pub rows: Vec<EnergyInequalityRow>,
    pub min_margin: f64,
    /// `max_t max(0, −margin)`.
    pub max_violation: f64,
    pub max_abs_identity_defect: f64,
    pub pass: bool,
}

/// `E_K(t) + E_ho(t) + ∫₀ᵗ(D_K + D_ho) ≤ (1+ε)E_K(0) + E_ho(0) + ∫ρc(t) + ε∫₀ᵗ∫ρ²`
/// at every report time, with tolerance `max(1e-6, 0.01|RHS|)`.
pub fn energy_inequality_report(reports: &[EnergyReport], reg: &RegParams) -> Result<EnergyInequalityReport> {
    require_reports(reports)?;
    let eps = reg.epsilon;
    let diss = cumulative(reports, |r| r.d_k + r.d_ho);
    let rho_sq = cumulative(reports, |r| r.rho_sq);
    let first = &reports[0];
    let base = first.e_k - first.rho_c + first.e_ho;
    let rows: Vec<EnergyInequalityRow> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let lhs = r.e_k + r.e_ho + diss[i];
            let rhs = (1.0 + eps) * first.e_k + first.e_ho + r.rho_c + eps * rho_sq[i];
            let margin = rhs - lhs;
            let tolerance = (0.01 * rhs.abs()).max(1e-6);
            EnergyInequalityRow {
                time: r.time,
                lhs,
                rhs,
                margin,
                tolerance,
                identity_defect: r.e_k - r.rho_c + r.e_ho + diss[i] - base,
                pass: margin >= -tolerance,
            }
        })
        .collect();
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let max_violation = rows.iter().map(|r| (-r.margin).max(0.0)).fold(0.0, f64::max);
    let max_abs_identity_defect = rows.iter().map(|r| r.identity_defect.abs()).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.pass);
    Ok(EnergyInequalityReport {
        rows,
        min_margin,
        max_violation,
        max_abs_identity_defect,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedEnergyReport {
    pub times: Vec<f64>,
    /// `Ẽ(t) + ∫₀ᵗ(D_K + D̃_ho) − 2E_K(0) − E_ho(0)`.
    pub gap: Vec<f64>,
    /// Smallest `C(κ,T)` valid over the run.
    pub calibrated_constant: f64,
    pub sup_e_tilde: f64,
    pub bounded: bool,
}

pub fn modified_energy_report(reports: &[EnergyReport]) -> Result<ModifiedEnergyReport> {
    require_reports(reports)?;
    let diss = cumulative(reports, |r| r.d_k + r.d_tilde_ho);
    let first = &reports[0];
    let bound = 2.0 * first.e_k + first.e_ho;
    let gap: Vec<f64> = reports
        .iter()
        .zip(&diss)
        .map(|(r, d)| r.e_tilde + d - bound)
        .collect();
    let calibrated_constant = gap.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sup_e_tilde = reports.iter().map(|r| r.e_tilde).fold(f64::NEG_INFINITY, f64::max);
    Ok(ModifiedEnergyReport {
        times: reports.iter().map(|r| r.time).collect(),
        gap,
        calibrated_constant,
        sup_e_tilde,
        bounded: sup_e_tilde.is_finite() && calibrated_constant.is_finite(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BdEntropyRow {
    pub time: f64,
    pub energy_block: f64,
    pub ho_block: f64,
    pub gradient_block: f64,
    pub log_block: f64,
    pub drag_dissipation: f64,
    pub viscous_dissipation: f64,
    pub quantum_dissipation: f64,
    pub ho_dissipation: f64,
    pub total: f64,
    pub e_bd_plus_e_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BdEntropyReport {
    pub m: f64,
    pub rows: Vec<BdEntropyRow>,
    /// `sup_t` of the left-hand side, i.e. the smallest admissible right-hand side.
    pub calibrated_rhs: f64,
    pub sup_e_bd_plus_e_k: f64,
    pub dissipation_nonnegative: bool,
    pub bounded: bool,
}

/// Left-hand side blocks of the BD entropy inequality with multiplier `m > 2`.
pub fn bd_entropy_report(
    reports: &[EnergyReport],
    model: &ModelParams,
    reg: &RegParams,
    m: f64,
) -> Result<BdEntropyReport> {
    require_reports(reports)?;
    if !(m > 2.0) {
        return Err(Error::config("diagnostics.bd_m", "M must exceed 2"));
    }
    let nu = model.nu;
    let drag = cumulative(reports, |r| {
        0.5 * m * (r.rho_v2 / model.zeta + reg.r0 * r.v2 + reg.r1 * r.rho_v4)
    });
    let visc = cumulative(reports, |r| (m - 1.0) * (nu * r.rho_strain + r.dtc_sq));
    let quantum = cumulative(reports, |r| {
        0.25 * nu * r.rho_vorticity
            + 4.0 * nu / model.gamma * r.grad_pgamma
            + C_K * nu * reg.kappa * (r.grad_quarter4 + r.lap_sqrt)
    });
    let ho = cumulative(reports, |r| {
        nu * reg.delta * r.lap3_rho
            + 4.0 * reg.eta * nu / 3.0 * r.grad_inv32
            + reg.mu * m * r.lap_v
            + reg.epsilon * nu * nu * r.lap_rho_sq_over_rho
    });
    let rows: Vec<BdEntropyRow> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let energy_block = 0.5 * (m - 2.0) * r.e_k;
            let ho_block = m * r.e_ho;
            let gradient_block = 0.5 * nu * nu * r.grad_sqrt_rho_sq;
            let log_block = nu * reg.r0 * r.log_rho_neg;
            let total =
                energy_block + ho_block + gradient_block + log_block + drag[i] + visc[i] + quantum[i] + ho[i];
            BdEntropyRow {
                time: r.time,
                energy_block,
                ho_block,
                gradient_block,
                log_block,
                drag_dissipation: drag[i],
                viscous_dissipation: visc[i],
                quantum_dissipation: quantum[i],
                ho_dissipation: ho[i],
                total,
                e_bd_plus_e_k: r.e_bd + r.e_k,
            }
        })
        .collect();
    let calibrated_rhs = rows.iter().map(|r| r.total).fold(f64::NEG_INFINITY, f64::max);
    let sup_e_bd_plus_e_k = rows.iter().map(|r| r.e_bd_plus_e_k).fold(f64::NEG_INFINITY, f64::max);
    let dissipation_nonnegative = rows.iter().all(|r| {
        r.drag_dissipation >= 0.0 && r.viscous_dissipation >= 0.0 && r.quantum_dissipation >= 0.0 && r.ho_dissipation >= 0.0
    });
    Ok(BdEntropyReport {
        m,
        rows,
        calibrated_rhs,
        sup_e_bd_plus_e_k,
        dissipation_nonnegative,
        bounded: calibrated_rhs.is_finite() && sup_e_bd_plus_e_k.is_finite(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassMaxPrincipleReport {
    pub max_relative_mass_drift: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub tolerance: f64,
    pub c_violation: f64,
    pub c_envelope_holds: bool,
    /// `ρ±⁰ exp(±∫₀ᵗ‖div v‖_∞)` envelope check; informative.
    pub rho_envelope_violation: f64,
    pub rho_envelope_holds: bool,
}

pub fn mass_and_maxprinciple_report(reports: &[EnergyReport]) -> Result<MassMaxPrincipleReport> {
    require_reports(reports)?;
    let first = &reports[0];
    let m0 = first.mass;
    let max_relative_mass_drift = reports
        .iter()
        .map(|r| (r.mass - m0).abs() / m0.abs())
        .fold(0.0, f64::max);
    let rho_lo = reports.iter().map(|r| r.rho_min).fold(f64::INFINITY, f64::min);
    let rho_hi = reports.iter().map(|r| r.rho_max).fold(f64::NEG_INFINITY, f64::max);
    let c_lower = first.c_min.min(rho_lo);
    let c_upper = first.c_max.max(rho_hi);
    let c_min = reports.iter().map(|r| r.c_min).fold(f64::INFINITY, f64::min);
    let c_max = reports.iter().map(|r| r.c_max).fold(f64::NEG_INFINITY, f64::max);
    let tolerance = 1e-6 * (first.c_max + rho_hi);
    let c_violation = (c_lower - c_min).max(c_max - c_upper).max(0.0);

    let div_int = cumulative(reports, |r| r.div_v_sup);
    let rho_envelope_violation = reports
        .iter()
        .zip(&div_int)
        .map(|(r, s)| {
            let lo = first.rho_min * (-s).exp();
            let hi = first.rho_max * s.exp();
            (lo - r.rho_min).max(r.rho_max - hi).max(0.0)
        })
        .fold(0.0, f64::max);
    let rho_tol = 1e-6 * rho_hi;
    Ok(MassMaxPrincipleReport {
        max_relative_mass_drift,
        c_lower,
        c_upper,
        c_min,
        c_max,
        tolerance,
        c_violation,
        c_envelope_holds: c_violation <= tolerance,
        rho_envelope_violation,
        rho_envelope_holds: rho_envelope_violation <= rho_tol,
    })
}

/// Spatial factor of a test function: `cos(k·x)` or `sin(k·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialMode {
    pub k: [i64; 3],
    pub sine: bool,
}

/// Space-time test function `b(t)·χ(x)` (scalar) or `b(t)·χ(x)e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub mode: SpatialMode,
    /// `None` for the mass form, `Some(axis)` for the momentum form.
    pub axis: Option<usize>,
}

impl TestFunction {
    pub fn name(&self) -> String {
        let trig = if self.mode.sine { "sin" } else { "cos" };
        let k = self.mode.k;
        match self.axis {
            None => format!("mass_{trig}_{}_{}_{}", k[0], k[1], k[2]),
            Some(a) => format!("mom{a}_{trig}_{}_{}_{}", k[0], k[1], k[2]),
        }
    }
}

/// Time bump `64(t(T−t))³/T⁶`, vanishing with two derivatives at both ends.
pub fn time_bump(t: f64, t_final: f64) -> (f64, f64) {
    let s = t * (t_final - t);
    let scale = 64.0 / t_final.powi(6);
    let value = scale * s.powi(3);
    let deriv = scale * 3.0 * s * s * (t_final - 2.0 * t);
    (value, deriv)
}

/// Four mass and eight momentum test functions built from low modes.
pub fn default_test_bank(dim: usize) -> Vec<TestFunction> {
    let last = dim - 1;
    let base = |a: i64, b: i64| {
        let mut k = [0i64; 3];
        k[0] += a;
        k[last] += b;
        k
    };
    let modes: Vec<SpatialMode> = [(1, 0), (0, 1), (1, 1), (2, 1)]
        .iter()
        .enumerate()
        .map(|(j, &(a, b))| SpatialMode {
            k: base(a, b),
            sine: j % 2 == 1,
        })
        .collect();
    let mut bank: Vec<TestFunction> = modes.iter().map(|&mode| TestFunction { mode, axis: None }).collect();
    for group in 0..2 {
        let axis = if group == 0 { 0 } else { last };
        let stretch = if dim == 1 && group == 1 { 4 } else { 1 };
        for m in &modes {
            let mut k = m.k;
            for v in &mut k {
                *v *= stretch;
            }
            bank.push(TestFunction {
                mode: SpatialMode { k, sine: m.sine },
                axis: Some(axis),
            });
        }
    }
    bank
}

fn spatial_field(state: &State, mode: SpatialMode) -> (ScalarField, VectorField) {
    let grid = state.grid().clone();
    let k = mode.k;
    let phase = move |x: [f64; 3]| k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
    let (f, df): (ScalarField, Vec<ScalarField>) = if mode.sine {
        (
            ScalarField::from_fn(grid.clone(), move |x| phase(x).sin()),
            (0..grid.dim())
                .map(|a| ScalarField::from_fn(grid.clone(), move |x| k[a] as f64 * phase(x).cos()))
                .collect(),
        )
    } else {
        (
            ScalarField::from_fn(grid.clone(), move |x| phase(x).cos()),
            (0..grid.dim())
                .map(|a| ScalarField::from_fn(grid.clone(), move |x| -(k[a] as f64) * phase(x).sin()))
                .collect(),
        )
    };
    (f, VectorField::from_components(df).expect("one component per axis"))
}

/// Spatial integrands at one instant: `(∂t-weight, b-weight)` so that the
/// space-time integrand is `b'(t)·first + b(t)·second`.
fn instant_terms(state: &State, tf: &TestFunction, model: &ModelParams, reg: &RegParams) -> Result<(f64, f64)> {
    let (chi, grad_chi) = spatial_field(state, tf.mode);
    let rho = &state.rho;
    match tf.axis {
        None => {
            let a = rho.mul(&chi).integral();
            let mut b = state.mom.dot(&grad_chi).integral();
            if reg.epsilon > 0.0 {
                b += reg.epsilon * rho.mul(&chi.laplacian()).integral();
            }
            Ok((a, b))
        }
        Some(axis) => {
            let d = state.grid().dim();
            let v = velocity_of(state, 0.0);
            let m_i = state.mom.component(axis);
            let a = m_i.mul(&chi).integral();
            // ∇ψ has only row `axis`: (∇ψ)_{axis, j} = ∂_j χ
            let mut lhs = 0.0;
            for j in 0..d {
                lhs += m_i.mul(v.component(j)).mul(grad_chi.component(j)).integral();
            }
            let pressure = rho.map(|r| r.powf(model.gamma));
            lhs += pressure.mul(grad_chi.component(axis)).integral();
            lhs += rho.mul(&state.chem.derivative(axis)).mul(&chi).integral();

            let strain = strain_rate(&v).times(rho).scale(model.nu);
            let kort = if reg.kappa > 0.0 {
                Some(korteweg_stress(rho, reg.kappa)?)
            } else {
                None
            };
            let mut rhs = 0.0;
            for j in 0..d {
                let mut s = strain.get(axis, j).clone();
                if let Some(k) = &kort {
                    s = s.add(k.get(axis, j));
                }
                rhs += s.mul(grad_chi.component(j)).integral();
            }
            let v_i = v.component(axis);
            let speed2 = v.norm_sq();
            let pointwise = rho
                .mul(v_i)
                .scale(1.0 / model.zeta)
                .add(&v_i.scale(reg.r0))
                .add(&rho.mul(&speed2).mul(v_i).scale(reg.r1));
            rhs += pointwise.mul(&chi).integral();
            if reg.has_higher_order() {
                let ho = higher_order_force(rho, &v, reg).value;
                lhs += ho.component(axis).mul(&chi).integral();
            }
            Ok((a, lhs - rhs))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakResidualRow {
    pub name: String,
    pub residual: f64,
    /// Trapezoid integral of the absolute integrand, for relative scaling.
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakResidualTable {
    pub rows: Vec<WeakResidualRow>,
    pub max_residual: f64,
    pub record_every: f64,
}

/// Weak-form residuals over `snapshots` spanning `[0, T]`, trapezoid in time.
pub fn weak_residual(
    snapshots: &[State],
    model: &ModelParams,
    reg: &RegParams,
    bank: &[TestFunction],
) -> Result<WeakResidualTable> {
    if snapshots.len() < 2 {
        return Err(Error::IncompleteData("at least two snapshots are required".into()));
    }
    let t0 = snapshots[0].time;
    let t_final = snapshots.last().map(|s| s.time).unwrap_or(0.0) - t0;
    if t0.abs() > 1e-14 || !(t_final > 0.0) {
        return Err(Error::config("snapshots", "must span [0, T] with T > 0"));
    }
    let dim = snapshots[0].grid().dim();
    for tf in bank {
        if let Some(a) = tf.axis {
            if a >= dim {
                return Err(Error::Axis { axis: a, dim });
            }
        }
    }
    use rayon::prelude::*;
    let rows = bank
        .par_iter()
        .map(|tf| {
            let mut values = Vec::with_capacity(snapshots.len());
            for s in snapshots {
                let (b, db) = time_bump(s.time, t_final);
                if b == 0.0 && db == 0.0 {
                    values.push(0.0);
                    continue;
                }
                let (a, c) = instant_terms(s, tf, model, reg)?;
                values.push(db * a + b * c);
            }
            let mut residual = 0.0;
            let mut scale = 0.0;
            for (w, s) in values.windows(2).zip(snapshots.windows(2)) {
                let dt = s[1].time - s[0].time;
                residual += 0.5 * dt * (w[0] + w[1]);
                scale += 0.5 * dt * (w[0].abs() + w[1].abs());
            }
            Ok(WeakResidualRow {
                name: tf.name(),
                residual,
                scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let record_every = snapshots[1].time - snapshots[0].time;
    Ok(WeakResidualTable {
        rows,
        max_residual,
        record_every,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub max_residuals: Vec<f64>,
    pub orders: Vec<f64>,
    pub pass: bool,
}

/// Empirical orders `log2(r_k / r_{k+1})` of the max residual between
/// successive halvings; passes when every order is at least `min_order`.
pub fn residual_convergence(tables: &[WeakResidualTable], min_order: f64) -> ConvergenceReport {
    let max_residuals: Vec<f64> = tables.iter().map(|t| t.max_residual).collect();
    let orders: Vec<f64> = max_residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = !orders.is_empty() && orders.iter().all(|&o| o >= min_order);
    ConvergenceReport {
        max_residuals,
        orders,
        pass,
    }
}

/// Every report that is a pure function of the energy CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsBundle {
    pub energy_inequality: EnergyInequalityReport,
    pub modified_energy: ModifiedEnergyReport,
    pub bd_entropy: BdEntropyReport,
    pub mass_maxprinciple: MassMaxPrincipleReport,
}

impl DiagnosticsBundle {
    pub fn compute(reports: &[EnergyReport], model: &ModelParams, reg: &RegParams, bd_m: f64) -> Result<Self> {
        Ok(Self {
            energy_inequality: energy_inequality_report(reports, reg)?,
            modified_energy: modified_energy_report(reports)?,
            bd_entropy: bd_entropy_report(reports, model, reg, bd_m)?,
            mass_maxprinciple: mass_and_maxprinciple_report(reports)?,
        })
    }

    /// Assertable outcome: energy inequality, mass drift `≤ 1e-10`, and the
    /// signal envelope.
    pub fn pass(&self) -> bool {
        self.energy_inequality.pass
            && self.mass_maxprinciple.max_relative_mass_drift <= 1e-10
            && self.mass_maxprinciple.c_envelope_holds
            && self.bd_entropy.dissipation_nonnegative
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_initial_data;
    use crate::grid::TorusGrid;
    use crate::integrator::{integrate, integrate_state, StepControls};
    use std::sync::Arc;

    fn grid(d: usize, n: usize) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::periodic(d, n).unwrap())
    }

    fn equilibrium_run() -> (Vec<State>, Vec<EnergyReport>) {
        let s = State::constant(grid(2, 16), 1.2, &[0.0, 0.0], 1.2);
        let t = integrate_state(
            s,
            &ModelParams::default(),
            &RegParams::default(),
            &StepControls::fixed(0.05),
            0.5,
            0.05,
        )
        .unwrap();
        (t.snapshots, t.reports)
    }

    #[test]
    fn equilibrium_energy_margin_is_rho_c() {
        let (_, reports) = equilibrium_run();
        let rep = energy_inequality_report(&reports, &RegParams::default()).unwrap();
        let rho_c = 1.44 * grid(2, 16).volume();
        for row in &rep.rows {
            assert!((row.margin - rho_c).abs() < 1e-9);
        }
        assert!(rep.pass && rep.max_violation == 0.0);
        assert!(rep.max_abs_identity_defect < 1e-9);
    }

    #[test]
    fn missing_reports_are_rejected() {
        assert!(matches!(
            energy_inequality_report(&[], &RegParams::default()),
            Err(Error::IncompleteData(_))
        ));
    }

    #[test]
    fn equilibrium_blocks() {
        let (_, reports) = equilibrium_run();
        let model = ModelParams::default();
        let bd = bd_entropy_report(&reports, &model, &RegParams::default(), 3.0).unwrap();
        assert!(bd.dissipation_nonnegative);
        for r in &bd.rows {
            assert!(r.drag_dissipation.abs() < 1e-20 && r.viscous_dissipation.abs() < 1e-18);
            // ρ ≥ 1 everywhere ⇒ no negative-log contribution
            assert_eq!(r.log_block, 0.0);
        }
        assert!(bd_entropy_report(&reports, &model, &RegParams::default(), 2.0).is_err());
        let me = modified_energy_report(&reports).unwrap();
        let g0 = me.gap[0];
        assert!(me.gap.iter().all(|g| (g - g0).abs() < 1e-9));
        let mm = mass_and_maxprinciple_report(&reports).unwrap();
        assert!(mm.max_relative_mass_drift < 1e-14 && mm.c_violation == 0.0);
    }

    #[test]
    fn bump_properties() {
        let (v0, d0) = time_bump(0.0, 2.0);
        let (v1, d1) = time_bump(2.0, 2.0);
        assert_eq!((v0, d0, v1, d1), (0.0, 0.0, 0.0, 0.0));
        assert!((time_bump(1.0, 2.0).0 - 1.0).abs() < 1e-15);
        let h = 1e-6;
        let fd = (time_bump(0.7 + h, 2.0).0 - time_bump(0.7 - h, 2.0).0) / (2.0 * h);
        assert!((fd - time_bump(0.7, 2.0).1).abs() < 1e-8);
    }

    #[test]
    fn bank_is_twelve_distinct() {
        for d in 1..=3 {
            let bank = default_test_bank(d);
            assert_eq!(bank.len(), 12);
            assert_eq!(bank.iter().filter(|t| t.axis.is_none()).count(), 4);
            let mut names: Vec<String> = bank.iter().map(|t| t.name()).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), 12, "d = {d}");
        }
    }

    #[test]
    fn equilibrium_residuals_vanish() {
        let (snaps, _) = equilibrium_run();
        let t = weak_residual(&snaps, &ModelParams::default(), &RegParams::default(), &default_test_bank(2)).unwrap();
        assert!(t.max_residual < 1e-12, "{}", t.max_residual);
        let t = weak_residual(&snaps, &ModelParams::default(), &RegParams::default(), &[]).unwrap();
        assert_eq!(t.max_residual, 0.0);
    }

    #[test]
    fn residual_decreases_with_refinement() {
        let init = make_initial_data(grid(1, 32), 2, 2, 0.3, 1.0, 1.0).unwrap();
        let model = ModelParams::default();
        let reg = RegParams::default();
        let bank = default_test_bank(1);
        let tables: Vec<WeakResidualTable> = [(0.02, 0.1), (0.01, 0.05), (0.005, 0.025)]
            .iter()
            .map(|&(dt, rec)| {
                let t = integrate(&init, &model, &reg, &StepControls::fixed(dt), 0.5, rec).unwrap();
                weak_residual(&t.snapshots, &model, &reg, &bank).unwrap()
            })
            .collect();
        let conv = residual_convergence(&tables, 1.0);
        assert!(conv.pass, "{:?}", conv);
    }

    #[test]
    fn short_run_satisfies_energy_inequality() {
        let init = make_initial_data(grid(2, 16), 4, 2, 0.4, 1.0, 1.0).unwrap();
        let model = ModelParams::default();
        let reg = RegParams::default();
        let t = integrate(&init, &model, &reg, &StepControls::default(), 0.2, 0.1).unwrap();
        let bundle = DiagnosticsBundle::compute(&t.reports, &model, &reg, 3.0).unwrap();
        assert!(bundle.pass(), "{:?}", bundle.energy_inequality.min_margin);
        assert!(bundle.energy_inequality.max_abs_identity_defect < 1e-4);
    }
}
