//! Energy, entropy and dissipation functionals, the weak-solution tensors and
//! the Bohm potential, evaluated on a [`State`].
//!
//! Matrix norms are Frobenius norms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{velocity_of, ScalarField, State, TensorField, VectorField};
use crate::model::{chemo_rhs, strain_rate, ModelParams, RegParams};

/// Constant of the lower bound
/// `∫ρ|∇²log ρ|² ≥ 2 C_K (∫|Δ√ρ|² + ∫|∇ρ^{1/4}|⁴)`.
pub const C_K: f64 = 1.0 / 16.0;

fn require_positive(rho: &ScalarField) -> Result<()> {
    if rho.values().iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Domain("functional requires a strictly positive density".into()));
    }
    Ok(())
}

/// Internal energy density `h(ρ) = ρ^γ/(γ−1)`.
pub fn internal_energy_density(rho: f64, gamma: f64) -> f64 {
    rho.powf(gamma) / (gamma - 1.0)
}

fn chem_energy(c: &ScalarField) -> f64 {
    0.5 * c.gradient().norm_sq().add(&c.mul(c)).integral()
}

fn kinetic_energy(state: &State, v: &VectorField) -> f64 {
    0.5 * state.rho.mul(&v.norm_sq()).integral()
}

fn internal_energy(rho: &ScalarField, gamma: f64) -> f64 {
    rho.map(|r| internal_energy_density(r, gamma)).integral()
}

fn grad_sqrt_rho_sq(rho: &ScalarField) -> f64 {
    rho.map(f64::sqrt).gradient().norm_sq().integral()
}

/// `E₀ = ∫(½ρ|v|² + h(ρ) + ½(|∇c|²+c²) − ρc)`.
pub fn free_energy(state: &State, gamma: f64) -> Result<f64> {
    require_positive(&state.rho)?;
    let v = velocity_of(state, 0.0);
    Ok(kinetic_energy(state, &v) + internal_energy(&state.rho, gamma) + chem_energy(&state.chem)
        - state.rho.mul(&state.chem).integral())
}

/// BD entropy `½∫ρ|v + ν∇log ρ|²`.
pub fn bd_entropy(state: &State, nu: f64) -> Result<f64> {
    require_positive(&state.rho)?;
    let v = velocity_of(state, 0.0);
    let eff = v.add(&state.rho.map(f64::ln).gradient().scale(nu));
    Ok(0.5 * state.rho.mul(&eff.norm_sq()).integral())
}

/// `E_K = ∫(½ρ|v|² + h(ρ) + κ|∇√ρ|² + ½(|∇c|²+c²))`.
pub fn energy_k(state: &State, gamma: f64, kappa: f64) -> Result<f64> {
    require_positive(&state.rho)?;
    let v = velocity_of(state, 0.0);
    Ok(kinetic_energy(state, &v)
        + internal_energy(&state.rho, gamma)
        + kappa * grad_sqrt_rho_sq(&state.rho)
        + chem_energy(&state.chem))
}

/// `E_ho = ∫(η/4·ρ⁻³ + δ/2·|∇Δ²ρ|²)`.
pub fn energy_ho(state: &State, eta: f64, delta: f64) -> Result<f64> {
    require_positive(&state.rho)?;
    let mut total = 0.0;
    if eta != 0.0 {
        total += 0.25 * eta * state.rho.map(|r| r.powi(-3)).integral();
    }
    if delta != 0.0 {
        total += 0.5 * delta * state.rho.laplacian_power(2).gradient().norm_sq().integral();
    }
    Ok(total)
}

/// Bohm potential `Δ√ρ/√ρ`.
pub fn bohm_potential(rho: &ScalarField) -> Result<ScalarField> {
    require_positive(rho)?;
    let s = rho.map(f64::sqrt);
    Ok(s.laplacian().zip_map(&s, |a, b| a / b))
}

/// The three integrals appearing in the quantum inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumTerms {
    /// `∫ρ|∇²log ρ|²`
    pub hessian_log: f64,
    /// `∫|Δ√ρ|²`
    pub lap_sqrt: f64,
    /// `∫|∇ρ^{1/4}|⁴`
    pub grad_quarter4: f64,
}

pub fn quantum_terms(rho: &ScalarField) -> Result<QuantumTerms> {
    require_positive(rho)?;
    let hess = rho.map(f64::ln).hessian();
    Ok(QuantumTerms {
        hessian_log: rho.mul(&hess.frobenius_sq()).integral(),
        lap_sqrt: rho.map(f64::sqrt).laplacian().map(|x| x * x).integral(),
        grad_quarter4: rho
            .map(|r| r.powf(0.25))
            .gradient()
            .norm_sq()
            .map(|x| x * x)
            .integral(),
    })
}

/// Every raw integral needed by the energy and entropy bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawIntegrals {
    pub kinetic: f64,
    pub internal: f64,
    pub chem: f64,
    pub rho_c: f64,
    pub rho_sq: f64,
    pub grad_sqrt_rho_sq: f64,
    pub log_rho_neg: f64,
    pub inv_cube: f64,
    pub grad_lap2_sq: f64,
    /// `∫ρ|v|²`
    pub rho_v2: f64,
    /// `∫|v|²`
    pub v2: f64,
    /// `∫ρ|v|⁴`
    pub rho_v4: f64,
    /// `∫ρ|D(v)|²`
    pub rho_strain: f64,
    /// `∫|∂t c|²` with `∂t c = Δc − c + ρ`
    pub dtc_sq: f64,
    /// `∫ρ|∇v − ∇vᵀ|²`
    pub rho_vorticity: f64,
    /// `∫|∇ρ^{γ/2}|²`
    pub grad_pgamma: f64,
    pub grad_quarter4: f64,
    pub lap_sqrt: f64,
    /// `∫|Δv|²`
    pub lap_v: f64,
    /// `∫|∇ρ^{−3/2}|²`
    pub grad_inv32: f64,
    /// `∫|Δ³ρ|²`
    pub lap3_rho: f64,
    /// `∫|Δρ|²/ρ`
    pub lap_rho_sq_over_rho: f64,
}

impl RawIntegrals {
    pub fn compute(state: &State, gamma: f64) -> Result<Self> {
        let rho = &state.rho;
        require_positive(rho)?;
        let c = &state.chem;
        let v = velocity_of(state, 0.0);
        let v2 = v.norm_sq();
        let jac = v.jacobian();
        let strain = jac.symmetric_part();
        let antisym = jac.sub(&jac.transpose());
        let dtc = chemo_rhs(state);
        let lap_rho = rho.laplacian();
        Ok(Self {
            kinetic: 0.5 * rho.mul(&v2).integral(),
            internal: internal_energy(rho, gamma),
            chem: chem_energy(c),
            rho_c: rho.mul(c).integral(),
            rho_sq: rho.mul(rho).integral(),
            grad_sqrt_rho_sq: grad_sqrt_rho_sq(rho),
            log_rho_neg: rho.map(|r| (-r.ln()).max(0.0)).integral(),
            inv_cube: rho.map(|r| r.powi(-3)).integral(),
            grad_lap2_sq: rho.laplacian_power(2).gradient().norm_sq().integral(),
            rho_v2: rho.mul(&v2).integral(),
            v2: v2.integral(),
            rho_v4: rho.mul(&v2.mul(&v2)).integral(),
            rho_strain: rho.mul(&strain.frobenius_sq()).integral(),
            dtc_sq: dtc.mul(&dtc).integral(),
            rho_vorticity: rho.mul(&antisym.frobenius_sq()).integral(),
            grad_pgamma: rho.map(|r| r.powf(0.5 * gamma)).gradient().norm_sq().integral(),
            grad_quarter4: rho
                .map(|r| r.powf(0.25))
                .gradient()
                .norm_sq()
                .map(|x| x * x)
                .integral(),
            lap_sqrt: rho.map(f64::sqrt).laplacian().map(|x| x * x).integral(),
            lap_v: v.laplacian_power(1).norm_sq().integral(),
            grad_inv32: rho.map(|r| r.powf(-1.5)).gradient().norm_sq().integral(),
            lap3_rho: rho.laplacian_power(3).map(|x| x * x).integral(),
            lap_rho_sq_over_rho: lap_rho.zip_map(rho, |l, r| l * l / r).integral(),
        })
    }

    pub fn energy_k(&self, kappa: f64) -> f64 {
        self.kinetic + self.internal + kappa * self.grad_sqrt_rho_sq + self.chem
    }

    pub fn energy_ho(&self, reg: &RegParams) -> f64 {
        0.25 * reg.eta * self.inv_cube + 0.5 * reg.delta * self.grad_lap2_sq
    }

    pub fn energy_tilde(&self, kappa: f64, reg: &RegParams) -> f64 {
        self.kinetic + self.internal + 0.5 * kappa * self.grad_sqrt_rho_sq + 0.5 * self.chem + self.energy_ho(reg)
    }

    pub fn dissipation_k(&self, model: &ModelParams, reg: &RegParams) -> f64 {
        self.rho_v2 / model.zeta
            + reg.r0 * self.v2
            + reg.r1 * self.rho_v4
            + model.nu * self.rho_strain
            + self.dtc_sq
    }

    fn dissipation_ho_with(&self, model: &ModelParams, reg: &RegParams, quantum_factor: f64) -> f64 {
        let eps = reg.epsilon;
        4.0 * eps / model.gamma * self.grad_pgamma
            + quantum_factor * eps * reg.kappa * (self.grad_quarter4 + self.lap_sqrt)
            + reg.mu * self.lap_v
            + 4.0 * eps * reg.eta / 3.0 * self.grad_inv32
            + eps * reg.delta * self.lap3_rho
    }

    pub fn dissipation_ho(&self, model: &ModelParams, reg: &RegParams) -> f64 {
        self.dissipation_ho_with(model, reg, C_K)
    }

    pub fn dissipation_tilde_ho(&self, model: &ModelParams, reg: &RegParams) -> f64 {
        self.dissipation_ho_with(model, reg, 0.5 * C_K)
    }
}

/// `D_K = ∫(ρ|v|²/ζ + r₀|v|² + r₁ρ|v|⁴ + νρ|D(v)|² + |∂t c|²)`.
pub fn dissipation_k(state: &State, model: &ModelParams, reg: &RegParams) -> Result<f64> {
    Ok(RawIntegrals::compute(state, model.gamma)?.dissipation_k(model, reg))
}

pub fn dissipation_ho(state: &State, model: &ModelParams, reg: &RegParams) -> Result<f64> {
    Ok(RawIntegrals::compute(state, model.gamma)?.dissipation_ho(model, reg))
}

/// `D_ho` with the quantum term weighted by `C_K/2`.
pub fn dissipation_tilde_ho(state: &State, model: &ModelParams, reg: &RegParams) -> Result<f64> {
    Ok(RawIntegrals::compute(state, model.gamma)?.dissipation_tilde_ho(model, reg))
}

/// All functional values at one time instant. The field order is the frozen
/// column order of the energy CSV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub time: f64,
    pub mass: f64,
    pub e0: f64,
    pub e_kin: f64,
    pub e_int: f64,
    pub e_chem: f64,
    pub e_chem_cross: f64,
    pub e_korteweg: f64,
    pub e_k: f64,
    pub e_ho: f64,
    pub e_bd: f64,
    pub e_tilde: f64,
    pub d_k: f64,
    pub d_ho: f64,
    pub d_tilde_ho: f64,
    pub rho_c: f64,
    pub rho_sq: f64,
    pub grad_sqrt_rho_sq: f64,
    pub log_rho_neg: f64,
    pub rho_v2: f64,
    pub v2: f64,
    pub rho_v4: f64,
    pub rho_strain: f64,
    pub dtc_sq: f64,
    pub rho_vorticity: f64,
    pub grad_pgamma: f64,
    pub grad_quarter4: f64,
    pub lap_sqrt: f64,
    pub lap_v: f64,
    pub grad_inv32: f64,
    pub lap3_rho: f64,
    pub lap_rho_sq_over_rho: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub max_speed: f64,
    pub div_v_sup: f64,
}

/// Frozen energy CSV header, identical to the field order of [`EnergyReport`].
pub const ENERGY_CSV_COLUMNS: [&str; 38] = [
    "time",
    "mass",
    "e0",
    "e_kin",
    "e_int",
    "e_chem",
    "e_chem_cross",
    "e_korteweg",
    "e_k",
    "e_ho",
    "e_bd",
    "e_tilde",
    "d_k",
    "d_ho",
    "d_tilde_ho",
    "rho_c",
    "rho_sq",
    "grad_sqrt_rho_sq",
    "log_rho_neg",
    "rho_v2",
    "v2",
    "rho_v4",
    "rho_strain",
    "dtc_sq",
    "rho_vorticity",
    "grad_pgamma",
    "grad_quarter4",
    "lap_sqrt",
    "lap_v",
    "grad_inv32",
    "lap3_rho",
    "lap_rho_sq_over_rho",
    "rho_min",
    "rho_max",
    "c_min",
    "c_max",
    "max_speed",
    "div_v_sup",
];

impl EnergyReport {
    pub fn evaluate(state: &State, model: &ModelParams, reg: &RegParams) -> Result<Self> {
        let raw = RawIntegrals::compute(state, model.gamma)?;
        let v = velocity_of(state, 0.0);
        let e_korteweg = reg.kappa * raw.grad_sqrt_rho_sq;
        let e_bd = raw.kinetic
            + model.nu * v.dot(&state.rho.gradient()).integral()
            + 2.0 * model.nu * model.nu * raw.grad_sqrt_rho_sq;
        Ok(Self {
            time: state.time,
            mass: state.mass(),
            e0: raw.kinetic + raw.internal + raw.chem - raw.rho_c,
            e_kin: raw.kinetic,
            e_int: raw.internal,
            e_chem: raw.chem,
            e_chem_cross: -raw.rho_c,
            e_korteweg,
            e_k: raw.energy_k(reg.kappa),
            e_ho: raw.energy_ho(reg),
            e_bd: e_bd.max(0.0),
            e_tilde: raw.energy_tilde(reg.kappa, reg),
            d_k: raw.dissipation_k(model, reg),
            d_ho: raw.dissipation_ho(model, reg),
            d_tilde_ho: raw.dissipation_tilde_ho(model, reg),
            rho_c: raw.rho_c,
            rho_sq: raw.rho_sq,
            grad_sqrt_rho_sq: raw.grad_sqrt_rho_sq,
            log_rho_neg: raw.log_rho_neg,
            rho_v2: raw.rho_v2,
            v2: raw.v2,
            rho_v4: raw.rho_v4,
            rho_strain: raw.rho_strain,
            dtc_sq: raw.dtc_sq,
            rho_vorticity: raw.rho_vorticity,
            grad_pgamma: raw.grad_pgamma,
            grad_quarter4: raw.grad_quarter4,
            lap_sqrt: raw.lap_sqrt,
            lap_v: raw.lap_v,
            grad_inv32: raw.grad_inv32,
            lap3_rho: raw.lap3_rho,
            lap_rho_sq_over_rho: raw.lap_rho_sq_over_rho,
            rho_min: state.rho.min(),
            rho_max: state.rho.max(),
            c_min: state.chem.min(),
            c_max: state.chem.max(),
            max_speed: v.sup_norm(),
            div_v_sup: v.divergence().sup_norm(),
        })
    }

    /// `E_K = e_kin + e_int + e_korteweg + e_chem`.
    pub fn e_k_recomposed(&self) -> f64 {
        self.e_kin + self.e_int + self.e_korteweg + self.e_chem
    }

    pub fn nonnegativity_holds(&self) -> bool {
        [
            self.e_kin,
            self.e_int,
            self.e_korteweg,
            self.e_bd,
            self.d_k,
            self.d_ho,
            self.d_tilde_ho,
        ]
        .iter()
        .all(|&x| x >= 0.0)
    }
}

/// Weak-solution tensors `S_κ`, `T_ν` and `S_ν = ½(T_ν + T_νᵀ)`.
#[derive(Clone, Debug)]
pub struct WeakTensors {
    pub s_kappa: TensorField,
    pub t_nu: TensorField,
    pub s_nu: TensorField,
}

/// `√(κρ) S_κ = κ√ρ(∇²√ρ − 4∇ρ^{1/4}⊗∇ρ^{1/4})`.
pub fn korteweg_stress(rho: &ScalarField, kappa: f64) -> Result<TensorField> {
    require_positive(rho)?;
    let sqrt_rho = rho.map(f64::sqrt);
    let quarter = rho.map(|r| r.powf(0.25)).gradient();
    Ok(sqrt_rho
        .hessian()
        .sub(&quarter.outer(&quarter).scale(4.0))
        .times(&sqrt_rho)
        .scale(kappa))
}

/// `√(νρ) T_ν = ν∇(ρv) − 2ν√ρ v⊗∇√ρ`.
pub fn viscous_flux(state: &State, nu: f64) -> Result<TensorField> {
    require_positive(&state.rho)?;
    let v = velocity_of(state, 0.0);
    let sqrt_rho = state.rho.map(f64::sqrt);
    let cross = v.outer(&sqrt_rho.gradient()).times(&sqrt_rho).scale(2.0);
    Ok(state.mom.jacobian().sub(&cross).scale(nu))
}

pub fn tensors(state: &State, nu: f64, kappa: f64) -> Result<WeakTensors> {
    let rho = &state.rho;
    let inv_sqrt = rho.map(|r| 1.0 / r.sqrt());
    let s_kappa = if kappa > 0.0 {
        korteweg_stress(rho, kappa)?.times(&inv_sqrt).scale(1.0 / kappa.sqrt())
    } else {
        TensorField::zeros(rho.grid().clone())
    };
    let t_nu = if nu > 0.0 {
        viscous_flux(state, nu)?.times(&inv_sqrt).scale(1.0 / nu.sqrt())
    } else {
        TensorField::zeros(rho.grid().clone())
    };
    let s_nu = t_nu.symmetric_part();
    Ok(WeakTensors { s_kappa, t_nu, s_nu })
}

/// `ρ|D(v)|²` density, exposed for diagnostics.
pub fn strain_energy_density(state: &State) -> ScalarField {
    let v = velocity_of(state, 0.0);
    state.rho.mul(&strain_rate(&v).frobenius_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_initial_data, random_positive_field};
    use crate::grid::TorusGrid;
    use std::sync::Arc;

    fn grid(d: usize, n: usize) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::periodic(d, n).unwrap())
    }

    fn random_state(g: &Arc<TorusGrid>, seed: u64) -> State {
        make_initial_data(g.clone(), seed, 3, 0.5, 1.0, 0.8).unwrap().to_state()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn free_energy_of_constants() {
        let g = grid(2, 16);
        let vol = g.volume();
        let s = State::constant(g.clone(), 1.0, &[0.0, 0.0], 1.0);
        assert!((free_energy(&s, 2.0).unwrap() - 0.5 * vol).abs() < 1e-12);
        let s = State::constant(g, 1.0, &[0.0, 0.0], 0.0);
        assert!((free_energy(&s, 1.5).unwrap() - vol / 0.5).abs() < 1e-12);
    }

    #[test]
    fn free_energy_resolution_independent() {
        let coarse = random_state(&grid(2, 32), 4);
        let fine = random_state(&grid(2, 64), 4);
        let a = free_energy(&coarse, 1.5).unwrap();
        let b = free_energy(&fine, 1.5).unwrap();
        assert!(rel(a, b) <= 1e-10, "{a} vs {b}");
        let a = energy_k(&coarse, 1.5, 0.1).unwrap();
        let b = energy_k(&fine, 1.5, 0.1).unwrap();
        assert!(rel(a, b) <= 1e-10);
    }

    #[test]
    fn bd_entropy_cases() {
        let g = grid(2, 32);
        let s = State::constant(g.clone(), 2.0, &[0.0, 0.0], 1.0);
        assert!(bd_entropy(&s, 0.3).unwrap().abs() < 1e-14);

        // v = −ν∇log ρ cancels the osmotic velocity
        let nu = 0.2;
        let rho = random_positive_field(g.clone(), 8, 3, 0.7).unwrap();
        let v = rho.map(f64::ln).gradient().scale(-nu);
        let s = State {
            mom: v.times(&rho),
            rho,
            chem: ScalarField::zeros(g.clone()),
            time: 0.0,
        };
        assert!(bd_entropy(&s, nu).unwrap().abs() < 1e-20 + 1e-12 * s.mass());
    }

    #[test]
    fn bd_entropy_expansion_identity() {
        let g = grid(2, 64);
        let nu = 0.15;
        for seed in 0..5 {
            let s = random_state(&g, seed);
            let v = velocity_of(&s, 0.0);
            let ekin = 0.5 * s.rho.mul(&v.norm_sq()).integral();
            let cross = nu * v.dot(&s.rho.gradient()).integral();
            let grad = 2.0 * nu * nu * s.rho.map(f64::sqrt).gradient().norm_sq().integral();
            let expect = ekin + cross + grad;
            assert!(rel(bd_entropy(&s, nu).unwrap(), expect) <= 1e-8);
        }
    }

    #[test]
    fn energy_k_and_ho_definitions() {
        let g = grid(2, 32);
        let s = random_state(&g, 2);
        let ek = energy_k(&s, 1.6, 0.0).unwrap();
        let e0 = free_energy(&s, 1.6).unwrap();
        assert!(rel(ek, e0 + s.rho.mul(&s.chem).integral()) < 1e-12);
        assert_eq!(energy_ho(&s, 0.0, 0.0).unwrap(), 0.0);
        let flat = State::constant(g.clone(), 1.5, &[0.0, 0.0], 0.0);
        let eho = energy_ho(&flat, 0.4, 1.0).unwrap();
        assert!(rel(eho, 0.4 * g.volume() / (4.0 * 1.5f64.powi(3))) < 1e-12);
    }

    #[test]
    fn dissipation_zero_cases() {
        let g = grid(2, 16);
        let model = ModelParams::default();
        let eq = State::constant(g.clone(), 1.2, &[0.0, 0.0], 1.2);
        assert!(dissipation_k(&eq, &model, &RegParams::default()).unwrap().abs() < 1e-20);
        let s = random_state(&g, 1);
        assert_eq!(dissipation_ho(&s, &model, &RegParams::none()).unwrap(), 0.0);
    }

    #[test]
    fn dissipations_resolution_independent() {
        let model = ModelParams::default();
        let reg = RegParams {
            epsilon: 0.1,
            mu: 0.01,
            eta: 0.01,
            delta: 1e-6,
            ..RegParams::default()
        };
        let coarse = random_state(&grid(2, 32), 9);
        let fine = random_state(&grid(2, 64), 9);
        for f in [dissipation_k, dissipation_ho, dissipation_tilde_ho] {
            let a = f(&coarse, &model, &reg).unwrap();
            let b = f(&fine, &model, &reg).unwrap();
            assert!(rel(a, b) <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn report_invariants() {
        let g = grid(2, 32);
        let s = random_state(&g, 6);
        let model = ModelParams::default();
        let reg = RegParams {
            epsilon: 0.1,
            mu: 0.01,
            eta: 0.01,
            delta: 1e-6,
            ..RegParams::default()
        };
        let r = EnergyReport::evaluate(&s, &model, &reg).unwrap();
        assert!(r.nonnegativity_holds());
        assert!(rel(r.e_k, r.e_k_recomposed()) < 1e-12);
        assert!(rel(r.e_bd, bd_entropy(&s, model.nu).unwrap()) < 1e-8);
        assert!(r.d_tilde_ho <= r.d_ho);
    }

    #[test]
    fn bohm_potential_cases() {
        let g = grid(1, 64);
        let flat = ScalarField::constant(g.clone(), 3.0);
        assert!(bohm_potential(&flat).unwrap().sup_norm() < 1e-13);

        // ρ = e^{sin x}: √ρ = e^{s/2}, Δ√ρ/√ρ = (cos²x)/4 − (sin x)/2
        let rho = ScalarField::from_fn(g.clone(), |x| x[0].sin().exp());
        let q = bohm_potential(&rho).unwrap();
        let oracle = ScalarField::from_fn(g.clone(), |x| 0.25 * x[0].cos().powi(2) - 0.5 * x[0].sin());
        assert!(q.sub(&oracle).sup_norm() <= 1e-8);

        let scaled = bohm_potential(&rho.scale(7.5)).unwrap();
        assert!(scaled.sub(&q).sup_norm() < 1e-12);
    }

    #[test]
    fn viscous_tensor_identity() {
        // T_ν = √(νρ)∇v for smooth positive ρ
        let g = grid(2, 64);
        let nu = 0.3;
        let s = random_state(&g, 12);
        let t = tensors(&s, nu, 0.0).unwrap();
        let v = velocity_of(&s, 0.0);
        let expect = v.jacobian().times(&s.rho.map(|r| (nu * r).sqrt()));
        let err = t.t_nu.sub(&expect).components().iter().map(|c| c.sup_norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        let z = State::constant(g, 1.0, &[0.0, 0.0], 0.0);
        let t = tensors(&z, nu, 0.1).unwrap();
        assert!(t.t_nu.components().iter().chain(t.s_nu.components()).all(|c| c.sup_norm() < 1e-14));
    }

    #[test]
    fn korteweg_stress_matches_hessian_form() {
        // √(κρ)S_κ = (κ/2) ρ ∇² log ρ
        let g = grid(2, 64);
        let rho = random_positive_field(g, 3, 3, 0.8).unwrap();
        let kappa = 0.2;
        let a = korteweg_stress(&rho, kappa).unwrap();
        let b = rho.map(f64::ln).hessian().times(&rho).scale(0.5 * kappa);
        let err = a.sub(&b).components().iter().map(|c| c.sup_norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
