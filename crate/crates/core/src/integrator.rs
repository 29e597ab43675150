//! IMEX additive Runge–Kutta time stepping.
//!
//! The scheme is the four-stage ARK3(2)4L[2]SA pair of Kennedy and Carpenter:
//! an explicit tableau for the nonlinear remainder and an ESDIRK tableau for
//! the stiff constant-coefficient linear part, which is solved per Fourier
//! mode. The embedded second-order solution drives a PI step-size controller.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{InitialData, ScalarField, State};
use crate::functionals::EnergyReport;
use crate::grid::TorusGrid;
use crate::model::{system_rhs, ModelParams, RegParams};

/// Which linear terms are treated implicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImplicitTerms {
    /// `εΔρ` in the mass equation.
    pub eps_diffusion: bool,
    /// `−μΔ²(m/ρ̄)` in the momentum equation.
    pub mu_bilap: bool,
    /// `δρ̄∇Δ⁵ρ` together with the `−div m` coupling.
    pub delta_linearized: bool,
    /// `Δc − c` in the signal equation.
    pub chem_diffusion: bool,
    /// `ν div D(m)` in the momentum equation.
    pub viscous_linearized: bool,
}

impl Default for ImplicitTerms {
    fn default() -> Self {
        Self {
            eps_diffusion: true,
            mu_bilap: true,
            delta_linearized: true,
            chem_diffusion: true,
            viscous_linearized: true,
        }
    }
}

impl ImplicitTerms {
    pub fn none() -> Self {
        Self {
            eps_diffusion: false,
            mu_bilap: false,
            delta_linearized: false,
            chem_diffusion: false,
            viscous_linearized: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub implicit_terms: ImplicitTerms,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-10,
            dt_max: 1e-2,
            safety: 0.9,
            rtol: 1e-7,
            atol: 1e-9,
            max_steps: 1_000_000,
            implicit_terms: ImplicitTerms::default(),
        }
    }
}

impl StepControls {
    /// Constant step `dt`; every step is accepted.
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            ..Self::default()
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.dt_min == self.dt_max
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, path: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(path, "must be positive and finite"))
            }
        };
        positive(self.dt_init, "controls.dt_init")?;
        positive(self.dt_min, "controls.dt_min")?;
        positive(self.dt_max, "controls.dt_max")?;
        positive(self.rtol, "controls.rtol")?;
        positive(self.atol, "controls.atol")?;
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::config("controls.dt_init", "requires dt_min <= dt_init <= dt_max"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::config("controls.safety", "must lie in (0, 1]"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("controls.max_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Butcher coefficients of the IMEX pair.
#[derive(Clone, Debug)]
pub struct Tableau {
    pub explicit: [[f64; 4]; 4],
    pub implicit: [[f64; 4]; 4],
    pub b: [f64; 4],
    pub b_hat: [f64; 4],
    pub c: [f64; 4],
}

impl Tableau {
    pub fn ark3() -> Self {
        let g = 1767732205903.0 / 4055673282236.0;
        let explicit = [
            [0.0, 0.0, 0.0, 0.0],
            [1767732205903.0 / 2027836641118.0, 0.0, 0.0, 0.0],
            [5535828885825.0 / 10492691773637.0, 788022342437.0 / 10882634858940.0, 0.0, 0.0],
            [
                6485989280629.0 / 16251701735622.0,
                -4246266847089.0 / 9704473918619.0,
                10755448449292.0 / 10357097424841.0,
                0.0,
            ],
        ];
        let b = [
            1471266399579.0 / 7840856788654.0,
            -4482444167858.0 / 7529755066697.0,
            11266239266428.0 / 11593286722821.0,
            g,
        ];
        let implicit = [
            [0.0, 0.0, 0.0, 0.0],
            [g, g, 0.0, 0.0],
            [2746238789719.0 / 10658868560708.0, -640167445237.0 / 6845629431997.0, g, 0.0],
            b,
        ];
        let b_hat = [
            2756255671327.0 / 12835298489170.0,
            -10771552573575.0 / 22201958757719.0,
            9247589265047.0 / 10645013368117.0,
            2193209047091.0 / 5459859503100.0,
        ];
        let c = [0.0, 1767732205903.0 / 2027836641118.0, 0.6, 1.0];
        Self {
            explicit,
            implicit,
            b,
            b_hat,
            c,
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.implicit[1][1]
    }
}

type Comps = Vec<Vec<f64>>;
type SpecComps = Vec<Vec<Complex64>>;

/// Stiff linear operator, block-diagonal in Fourier space: a `(d+1)×(d+1)`
/// block on `(ρ̂, m̂)` and a scalar on `ĉ` for each mode.
#[derive(Clone, Debug)]
pub struct LinearPart {
    grid: Arc<TorusGrid>,
    size: usize,
    blocks: Vec<Complex64>,
    chem: Vec<f64>,
    trivial: bool,
}

impl LinearPart {
    pub fn new(
        grid: Arc<TorusGrid>,
        model: &ModelParams,
        reg: &RegParams,
        terms: &ImplicitTerms,
        mean_rho: f64,
    ) -> Self {
        let d = grid.dim();
        let size = d + 1;
        let mut blocks = vec![Complex64::default(); grid.len() * size * size];
        let mut chem = vec![0.0; grid.len()];
        let eps = if terms.eps_diffusion { reg.epsilon } else { 0.0 };
        let mu = if terms.mu_bilap { reg.mu / mean_rho } else { 0.0 };
        let delta = if terms.delta_linearized { reg.delta } else { 0.0 };
        let nu = if terms.viscous_linearized { model.nu } else { 0.0 };
        for flat in 0..grid.len() {
            let k2 = grid.k_squared(flat);
            let ik: Vec<Complex64> = (0..d).map(|a| grid.derivative_symbol(flat, a)).collect();
            let a = &mut blocks[flat * size * size..(flat + 1) * size * size];
            a[0] = Complex64::new(-eps * k2, 0.0);
            if delta > 0.0 {
                for j in 0..d {
                    a[1 + j] = -ik[j];
                }
            }
            let momentum_active = reg.galerkin_n.is_none_or(|n| grid.mode_sup(flat) <= n as u64);
            if momentum_active {
                for i in 0..d {
                    let row = (1 + i) * size;
                    // ∇Δ⁵ symbol: ik (−k²)⁵
                    a[row] = ik[i] * (-delta * mean_rho * k2.powi(5));
                    for j in 0..d {
                        // ½Δm + ½∇div m
                        let mut entry = 0.5 * nu * ik[i] * ik[j];
                        if i == j {
                            entry -= Complex64::new(0.5 * nu * k2 + mu * k2 * k2, 0.0);
                        }
                        a[row + 1 + j] = entry;
                    }
                }
            }
            if terms.chem_diffusion {
                chem[flat] = -k2 - 1.0;
            }
        }
        let trivial = blocks.iter().all(|z| z.norm() == 0.0) && chem.iter().all(|&c| c == 0.0);
        Self {
            grid,
            size,
            blocks,
            chem,
            trivial,
        }
    }

    fn block(&self, flat: usize) -> &[Complex64] {
        &self.blocks[flat * self.size * self.size..(flat + 1) * self.size * self.size]
    }

    fn forward(&self, u: &Comps) -> SpecComps {
        u.iter().map(|c| self.grid.forward_raw(c)).collect()
    }

    fn backward(&self, s: &SpecComps) -> Comps {
        s.iter().map(|c| self.grid.backward_raw(c)).collect()
    }

    fn apply_spec(&self, s: &SpecComps) -> SpecComps {
        let n = self.size;
        let mut out = vec![vec![Complex64::default(); self.grid.len()]; n + 1];
        for flat in 0..self.grid.len() {
            let a = self.block(flat);
            for i in 0..n {
                let mut acc = Complex64::default();
                for j in 0..n {
                    acc += a[i * n + j] * s[j][flat];
                }
                out[i][flat] = acc;
            }
            out[n][flat] = self.chem[flat] * s[n][flat];
        }
        out
    }

    /// `L u` in physical space.
    pub(crate) fn apply(&self, u: &Comps) -> Comps {
        if self.trivial {
            return u.iter().map(|c| vec![0.0; c.len()]).collect();
        }
        self.backward(&self.apply_spec(&self.forward(u)))
    }

    /// Solves `(I − s L) Y = R`, returning `(Y, L Y)` in physical space.
    pub(crate) fn solve(&self, rhs: &Comps, s: f64) -> (Comps, Comps) {
        if self.trivial || s == 0.0 {
            let ly = self.apply(rhs);
            return (rhs.clone(), ly);
        }
        let n = self.size;
        let mut spec = self.forward(rhs);
        let mut mat = vec![Complex64::default(); n * n];
        let mut vec_ = vec![Complex64::default(); n];
        for flat in 0..self.grid.len() {
            let a = self.block(flat);
            for i in 0..n {
                for j in 0..n {
                    mat[i * n + j] = -s * a[i * n + j];
                }
                mat[i * n + i] += 1.0;
                vec_[i] = spec[i][flat];
            }
            solve_dense(&mut mat, &mut vec_, n);
            for i in 0..n {
                spec[i][flat] = vec_[i];
            }
            spec[n][flat] /= 1.0 - s * self.chem[flat];
        }
        let ly = self.backward(&self.apply_spec(&spec));
        (self.backward(&spec), ly)
    }
}

/// Gaussian elimination with partial pivoting; the solution overwrites `b`.
fn solve_dense(a: &mut [Complex64], b: &mut [Complex64], n: usize) {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p * n + col].norm().total_cmp(&a[q * n + col].norm()))
            .unwrap_or(col);
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / diag;
            if f.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = a[col * n + j];
                a[row * n + j] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a[row * n + j] * b[j];
        }
        b[row] = acc / a[row * n + row];
    }
}

fn to_comps(state: &State) -> Comps {
    state.components().into_iter().map(|c| c.values().to_vec()).collect()
}

fn from_comps(grid: &Arc<TorusGrid>, comps: Comps, time: f64) -> State {
    let fields = comps
        .into_iter()
        .map(|v| ScalarField::from_raw(grid.clone(), v))
        .collect();
    State::from_components(fields, time).expect("component count preserved by the stepper")
}

fn axpy(y: &mut Comps, a: f64, x: &Comps) {
    if a == 0.0 {
        return;
    }
    for (yc, xc) in y.iter_mut().zip(x) {
        for (yi, xi) in yc.iter_mut().zip(xc) {
            *yi += a * xi;
        }
    }
}

fn all_finite(u: &Comps) -> bool {
    u.iter().all(|c| c.iter().all(|v| v.is_finite()))
}

/// Outcome of a single attempted step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub state: State,
    /// Weighted RMS norm of the embedded error estimate.
    pub error_norm: f64,
    pub floor_hits: usize,
}

/// Reusable stepping context for one parameter set.
#[derive(Clone, Debug)]
pub struct Stepper {
    model: ModelParams,
    reg: RegParams,
    controls: StepControls,
    linear: LinearPart,
    tableau: Tableau,
}

impl Stepper {
    pub fn new(
        grid: Arc<TorusGrid>,
        model: ModelParams,
        reg: RegParams,
        controls: StepControls,
        mean_rho: f64,
    ) -> Result<Self> {
        model.validate()?;
        reg.validate()?;
        controls.validate()?;
        if !(mean_rho > 0.0) {
            return Err(Error::Domain("mean density must be positive".into()));
        }
        let linear = LinearPart::new(grid, &model, &reg, &controls.implicit_terms, mean_rho);
        Ok(Self {
            model,
            reg,
            controls,
            linear,
            tableau: Tableau::ark3(),
        })
    }

    pub fn for_state(state: &State, model: ModelParams, reg: RegParams, controls: StepControls) -> Result<Self> {
        let mean = state.rho.mean();
        Self::new(state.grid().clone(), model, reg, controls, mean)
    }

    pub fn controls(&self) -> &StepControls {
        &self.controls
    }

    fn explicit_part(&self, y: &Comps, li: &Comps, time: f64, hits: &mut usize) -> Result<Comps> {
        let grid = self.linear.grid.clone();
        let state = from_comps(&grid, y.clone(), time);
        let rate = system_rhs(&state, &self.model, &self.reg)?;
        *hits += rate.floor_hits;
        let r = rate.value;
        let mut out: Comps = std::iter::once(r.rho.into_values())
            .chain(r.mom.into_components().into_iter().map(ScalarField::into_values))
            .chain(std::iter::once(r.chem.into_values()))
            .collect();
        axpy(&mut out, -1.0, li);
        Ok(out)
    }

    /// One IMEX step of size `dt`.
    pub fn step(&self, state: &State, dt: f64) -> Result<StepResult> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("step size must be positive, got {dt}")));
        }
        let tab = &self.tableau;
        let u0 = to_comps(state);
        let mut hits = 0;
        let mut fe: Vec<Comps> = Vec::with_capacity(4);
        let mut fi: Vec<Comps> = Vec::with_capacity(4);
        let g = tab.diagonal();
        for i in 0..4 {
            let mut r = u0.clone();
            for j in 0..i {
                axpy(&mut r, dt * tab.explicit[i][j], &fe[j]);
                axpy(&mut r, dt * tab.implicit[i][j], &fi[j]);
            }
            let (y, ly) = if tab.implicit[i][i] == 0.0 {
                let ly = self.linear.apply(&r);
                (r, ly)
            } else {
                self.linear.solve(&r, dt * g)
            };
            if !all_finite(&y) {
                return Err(Error::NonFinite("stage value"));
            }
            let time = state.time + tab.c[i] * dt;
            fe.push(self.explicit_part(&y, &ly, time, &mut hits)?);
            fi.push(ly);
        }
        let mut next = u0.clone();
        let mut err: Comps = u0.iter().map(|c| vec![0.0; c.len()]).collect();
        for j in 0..4 {
            axpy(&mut next, dt * tab.b[j], &fe[j]);
            axpy(&mut next, dt * tab.b[j], &fi[j]);
            let w = dt * (tab.b[j] - tab.b_hat[j]);
            axpy(&mut err, w, &fe[j]);
            axpy(&mut err, w, &fi[j]);
        }
        if !all_finite(&next) || !all_finite(&err) {
            return Err(Error::NonFinite("step result"));
        }
        let (rtol, atol) = (self.controls.rtol, self.controls.atol);
        let mut sum = 0.0;
        let mut count = 0usize;
        for ((e, a), b) in err.iter().zip(&u0).zip(&next) {
            for ((ei, ai), bi) in e.iter().zip(a).zip(b) {
                let scale = atol + rtol * ai.abs().max(bi.abs());
                sum += (ei / scale).powi(2);
                count += 1;
            }
        }
        let error_norm = (sum / count as f64).sqrt();
        let grid = self.linear.grid.clone();
        Ok(StepResult {
            state: from_comps(&grid, next, state.time + dt),
            error_norm,
            floor_hits: hits,
        })
    }
}

/// Convenience wrapper around [`Stepper::step`].
pub fn step(state: &State, model: &ModelParams, reg: &RegParams, controls: &StepControls, dt: f64) -> Result<State> {
    Ok(Stepper::for_state(state, *model, *reg, *controls)?.step(state, dt)?.state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    MaxStepsExceeded,
    StepFailure { time: f64, dt: f64, reason: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub nan_rejections: usize,
    pub floor_hits: usize,
    pub smallest_dt: f64,
    pub largest_dt: f64,
    pub min_rho: f64,
    pub max_speed: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Full states at `t = 0`, every multiple of `record_every`, and `t_final`.
    pub snapshots: Vec<State>,
    /// One report per accepted step, starting with the initial state.
    pub reports: Vec<EnergyReport>,
    /// Index into `reports` for each snapshot.
    pub snapshot_reports: Vec<usize>,
    pub stats: StepStats,
    pub status: RunStatus,
    pub t_final: f64,
    pub record_every: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.reports[0].mass;
        self.reports
            .iter()
            .map(|r| (r.mass - m0).abs() / m0.abs())
            .fold(0.0, f64::max)
    }
}

fn record_times(t_final: f64, record_every: f64) -> Vec<f64> {
    let count = (t_final / record_every * (1.0 + 1e-12)).floor() as usize;
    let mut times: Vec<f64> = (1..=count).map(|k| k as f64 * record_every).collect();
    times.retain(|&t| t < t_final * (1.0 - 1e-12));
    times.push(t_final);
    times
}

/// Integrates from `initial` to `t_final`, recording snapshots every
/// `record_every` and a report after every accepted step.
pub fn integrate(
    initial: &InitialData,
    model: &ModelParams,
    reg: &RegParams,
    controls: &StepControls,
    t_final: f64,
    record_every: f64,
) -> Result<Trajectory> {
    integrate_state(initial.to_state(), model, reg, controls, t_final, record_every)
}

pub fn integrate_state(
    start: State,
    model: &ModelParams,
    reg: &RegParams,
    controls: &StepControls,
    t_final: f64,
    record_every: f64,
) -> Result<Trajectory> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::config("t_final", "must be positive and finite"));
    }
    if !(record_every > 0.0 && record_every.is_finite()) {
        return Err(Error::config("record_every", "must be positive and finite"));
    }
    if !start.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let stepper = Stepper::for_state(&start, *model, *reg, *controls)?;
    let first = EnergyReport::evaluate(&start, model, reg)?;
    let mut stats = StepStats {
        smallest_dt: f64::INFINITY,
        largest_dt: 0.0,
        min_rho: first.rho_min,
        max_speed: first.max_speed,
        ..StepStats::default()
    };
    let mut traj = Trajectory {
        snapshots: vec![start.clone()],
        reports: vec![first],
        snapshot_reports: vec![0],
        stats: StepStats::default(),
        status: RunStatus::Completed,
        t_final,
        record_every,
    };

    let targets = record_times(t_final, record_every);
    let fixed = controls.is_fixed();
    let mut state = start;
    let mut dt = controls.dt_init;
    let mut prev_err = 1.0f64;
    let mut target_idx = 0;
    let mut status = RunStatus::Completed;
    let mut attempts = 0usize;

    'outer: while target_idx < targets.len() {
        let target = targets[target_idx];
        let remaining = target - state.time;
        let land = dt >= remaining * (1.0 - 1e-10);
        let h = if land { remaining } else { dt };
        attempts += 1;
        if stats.accepted >= controls.max_steps || attempts > controls.max_steps.saturating_mul(4) {
            status = RunStatus::MaxStepsExceeded;
            break;
        }
        let outcome = stepper.step(&state, h);
        let result = match outcome {
            Ok(r) => r,
            Err(e) => {
                stats.nan_rejections += 1;
                stats.rejected += 1;
                dt = 0.5 * h;
                if dt < controls.dt_min && !fixed {
                    status = RunStatus::StepFailure {
                        time: state.time,
                        dt,
                        reason: e.to_string(),
                    };
                    break 'outer;
                }
                if fixed {
                    status = RunStatus::StepFailure {
                        time: state.time,
                        dt: h,
                        reason: e.to_string(),
                    };
                    break 'outer;
                }
                continue;
            }
        };
        let err = result.error_norm.max(1e-12);
        if !fixed && err > 1.0 {
            stats.rejected += 1;
            let factor = (controls.safety * err.powf(-1.0 / 3.0)).clamp(0.2, 1.0);
            dt = h * factor;
            if dt < controls.dt_min {
                status = RunStatus::StepFailure {
                    time: state.time,
                    dt,
                    reason: format!("step size fell below dt_min (error norm {err:.3e})"),
                };
                break;
            }
            continue;
        }
        stats.accepted += 1;
        stats.floor_hits += result.floor_hits;
        stats.smallest_dt = stats.smallest_dt.min(h);
        stats.largest_dt = stats.largest_dt.max(h);
        if !fixed {
            let factor = controls.safety * err.powf(-0.7 / 3.0) * prev_err.powf(0.4 / 3.0);
            let proposal = dt.max(h) * factor.clamp(0.2, 5.0);
            dt = proposal.clamp(controls.dt_min, controls.dt_max);
            prev_err = err;
        }
        state = result.state;
        if land {
            state.time = target;
        }
        let report = match EnergyReport::evaluate(&state, model, reg) {
            Ok(r) => r,
            Err(e) => {
                status = RunStatus::StepFailure {
                    time: state.time,
                    dt: h,
                    reason: e.to_string(),
                };
                break;
            }
        };
        stats.min_rho = stats.min_rho.min(report.rho_min);
        stats.max_speed = stats.max_speed.max(report.max_speed);
        traj.reports.push(report);
        if land {
            traj.snapshots.push(state.clone());
            traj.snapshot_reports.push(traj.reports.len() - 1);
            target_idx += 1;
        }
    }
    if stats.accepted == 0 {
        stats.smallest_dt = 0.0;
    }
    traj.stats = stats;
    traj.status = status;
    Ok(traj)
}
