//! Physical and regularization parameters, and every force term of the
//! regularized chemotaxis Navier–Stokes–Korteweg system
//!
//! ```text
//! ∂t ρ + div(ρv)                 = εΔρ
//! ∂t c                           = Δc − c + ρ
//! ∂t(ρv) + div(ρv⊗v) + ∇ρ^γ      = ν div(ρ D(v)) + ρ∇c − ρv/ζ + Q_K + Q_ho
//! Q_K  = κρ∇(Δ√ρ/√ρ) − r₀v − r₁ρ|v|²v
//! Q_ho = ε div(v⊗∇ρ) − μΔ²v + η∇ρ⁻³ + δρ∇Δ⁵ρ
//! ```
//!
//! Every pointwise nonlinear product is followed by 2/3-rule dealiasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{velocity_of, ScalarField, State, TensorField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Adiabatic exponent of `p(ρ) = ρ^γ`.
    pub gamma: f64,
    pub nu: f64,
    /// Relaxation time.
    pub zeta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 1.5,
            nu: 0.1,
            zeta: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::config("model.gamma", "must be > 1"));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::config("model.nu", "must be > 0"));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::config("model.zeta", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegParams {
    /// Capillarity.
    pub kappa: f64,
    pub r0: f64,
    pub r1: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub mu: f64,
    /// Momentum is projected onto modes with `max_i |m_i| <= galerkin_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub galerkin_n: Option<usize>,
    #[serde(default = "default_rho_floor")]
    pub rho_floor: f64,
}

fn default_rho_floor() -> f64 {
    1e-8
}

impl Default for RegParams {
    fn default() -> Self {
        Self {
            kappa: 1e-2,
            r0: 1e-3,
            r1: 1e-3,
            delta: 0.0,
            epsilon: 0.0,
            eta: 0.0,
            mu: 0.0,
            galerkin_n: None,
            rho_floor: default_rho_floor(),
        }
    }
}

impl RegParams {
    /// All regularization switched off.
    pub fn none() -> Self {
        Self {
            kappa: 0.0,
            r0: 0.0,
            r1: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("regularization.kappa", self.kappa),
            ("regularization.r0", self.r0),
            ("regularization.r1", self.r1),
            ("regularization.delta", self.delta),
            ("regularization.epsilon", self.epsilon),
            ("regularization.eta", self.eta),
            ("regularization.mu", self.mu),
        ];
        for (path, value) in named {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::config(path, format!("must be nonnegative (got {value})")));
            }
        }
        if self.epsilon > 1.0 {
            return Err(Error::config("regularization.epsilon", "must be <= 1"));
        }
        if !(self.rho_floor > 0.0) {
            return Err(Error::config("regularization.rho_floor", "must be positive"));
        }
        Ok(())
    }

    pub fn has_higher_order(&self) -> bool {
        self.delta > 0.0 || self.epsilon > 0.0 || self.eta > 0.0 || self.mu > 0.0
    }
}

/// A computed quantity together with the number of grid points where the
/// density had to be raised to the floor.
#[derive(Clone, Debug)]
pub struct Flagged<T> {
    pub value: T,
    pub floor_hits: usize,
}

/// Time derivative of every component of a [`State`].
#[derive(Clone, Debug)]
pub struct StateRate {
    pub rho: ScalarField,
    pub mom: VectorField,
    pub chem: ScalarField,
}

fn require_positive(rho: &ScalarField, what: &str) -> Result<()> {
    if rho.values().iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Domain(format!("{what} requires a strictly positive density")));
    }
    Ok(())
}

/// `∇(ρ^γ)` with the power dealiased before differentiation.
pub fn pressure_gradient(rho: &ScalarField, gamma: f64) -> Result<VectorField> {
    require_positive(rho, "pressure")?;
    Ok(rho.map(|r| r.powf(gamma)).dealiased().gradient())
}

/// Symmetric velocity gradient `D(v) = ½(∇v + ∇vᵀ)`.
pub fn strain_rate(v: &VectorField) -> TensorField {
    v.jacobian().symmetric_part()
}

/// `ν div(ρ D(v))`.
pub fn viscous_force(rho: &ScalarField, v: &VectorField, nu: f64) -> VectorField {
    strain_rate(v).times(rho).dealiased().divergence().scale(nu)
}

/// `ρ∇c`.
pub fn chemotaxis_force(rho: &ScalarField, c: &ScalarField) -> VectorField {
    c.gradient().times(rho).dealiased()
}

/// `−ρv/ζ`.
pub fn relaxation_force(rho: &ScalarField, v: &VectorField, zeta: f64) -> VectorField {
    v.times(rho).dealiased().scale(-1.0 / zeta)
}

/// Bohm potential `Δ√ρ/√ρ` with dealiasing of the root and of the quotient.
pub(crate) fn dealiased_bohm(rho: &ScalarField) -> ScalarField {
    let sqrt_rho = rho.map(f64::sqrt).dealiased();
    sqrt_rho.laplacian().zip_map(&sqrt_rho, |a, b| a / b).dealiased()
}

/// `κρ∇(Δ√ρ/√ρ)`; the density is floored first.
pub fn korteweg_force(rho: &ScalarField, kappa: f64, rho_floor: f64) -> Flagged<VectorField> {
    let (rho, floor_hits) = rho.floored(rho_floor);
    if kappa == 0.0 {
        return Flagged {
            value: VectorField::zeros(rho.grid().clone()),
            floor_hits,
        };
    }
    let value = dealiased_bohm(&rho)
        .gradient()
        .times(&rho)
        .dealiased()
        .scale(kappa);
    Flagged { value, floor_hits }
}

/// `½κ div(ρ∇²log ρ)`, analytically equal to [`korteweg_force`].
pub fn korteweg_stress_divergence(rho: &ScalarField, kappa: f64) -> VectorField {
    let hess = rho.map(f64::ln).dealiased().hessian();
    hess.times(rho).dealiased().divergence().scale(0.5 * kappa)
}

/// `−r₀v − r₁ρ|v|²v`.
pub fn drag_force(rho: &ScalarField, v: &VectorField, r0: f64, r1: f64) -> VectorField {
    let linear = v.scale(-r0);
    if r1 == 0.0 {
        return linear;
    }
    let weight = rho.mul(&v.norm_sq());
    linear.add(&v.times(&weight).dealiased().scale(-r1))
}

/// `ε div(v⊗∇ρ) − μΔ²v + η∇ρ⁻³ + δρ∇Δ⁵ρ`.
pub fn higher_order_force(rho: &ScalarField, v: &VectorField, reg: &RegParams) -> Flagged<VectorField> {
    let (rho_f, floor_hits) = rho.floored(reg.rho_floor);
    let mut total = VectorField::zeros(rho.grid().clone());
    if reg.epsilon > 0.0 {
        let flux = v.outer(&rho.gradient()).dealiased();
        total.add_scaled_in_place(reg.epsilon, &flux.divergence());
    }
    if reg.mu > 0.0 {
        total.add_scaled_in_place(-reg.mu, &v.laplacian_power(2));
    }
    if reg.eta > 0.0 {
        let inv3 = rho_f.map(|r| r.powi(-3)).dealiased();
        total.add_scaled_in_place(reg.eta, &inv3.gradient());
    }
    if reg.delta > 0.0 {
        let high = rho.laplacian_power(5).gradient().times(rho).dealiased();
        total.add_scaled_in_place(reg.delta, &high);
    }
    Flagged {
        value: total,
        floor_hits,
    }
}

/// `div(m⊗v)` with `(m⊗v)_{ij} = m_i v_j`.
pub fn convective_flux_divergence(mom: &VectorField, v: &VectorField) -> VectorField {
    mom.outer(v).dealiased().divergence()
}

/// `−div m + εΔρ`; the zero mode of the result vanishes.
pub fn mass_rhs(state: &State, reg: &RegParams) -> ScalarField {
    let mut out = state.mom.divergence().scale(-1.0);
    if reg.epsilon > 0.0 {
        out.add_scaled_in_place(reg.epsilon, &state.rho.laplacian());
    }
    out
}

/// `Δc − c + ρ`.
pub fn chemo_rhs(state: &State) -> ScalarField {
    let c = &state.chem;
    c.laplacian().sub(c).add(&state.rho)
}

/// Dealiased velocity used inside the right-hand side.
pub(crate) fn rhs_velocity(state: &State, rho_floor: f64) -> VectorField {
    velocity_of(state, rho_floor).dealiased()
}

/// Full momentum right-hand side, projected onto the Galerkin space when a
/// cutoff is configured.
pub fn momentum_rhs(state: &State, model: &ModelParams, reg: &RegParams) -> Result<Flagged<VectorField>> {
    let (rho_f, mut floor_hits) = state.rho.floored(reg.rho_floor);
    let v = rhs_velocity(state, reg.rho_floor);

    let mut total = convective_flux_divergence(&state.mom, &v).scale(-1.0);
    total.add_scaled_in_place(-1.0, &pressure_gradient(&rho_f, model.gamma)?);
    total.add_scaled_in_place(1.0, &viscous_force(&state.rho, &v, model.nu));
    total.add_scaled_in_place(1.0, &chemotaxis_force(&state.rho, &state.chem));
    total.add_scaled_in_place(1.0, &relaxation_force(&state.rho, &v, model.zeta));
    let kort = korteweg_force(&state.rho, reg.kappa, reg.rho_floor);
    total.add_scaled_in_place(1.0, &kort.value);
    total.add_scaled_in_place(1.0, &drag_force(&state.rho, &v, reg.r0, reg.r1));
    if reg.has_higher_order() {
        let ho = higher_order_force(&state.rho, &v, reg);
        total.add_scaled_in_place(1.0, &ho.value);
    }
    if let Some(n) = reg.galerkin_n {
        total = total.galerkin(n);
    }
    // count floor events once per evaluation
    floor_hits = floor_hits.max(kort.floor_hits);
    Ok(Flagged {
        value: total,
        floor_hits,
    })
}

/// Right-hand side of the whole system.
pub fn system_rhs(state: &State, model: &ModelParams, reg: &RegParams) -> Result<Flagged<StateRate>> {
    let mom = momentum_rhs(state, model, reg)?;
    Ok(Flagged {
        value: StateRate {
            rho: mass_rhs(state, reg),
            mom: mom.value,
            chem: chemo_rhs(state),
        },
        floor_hits: mom.floor_hits,
    })
}
