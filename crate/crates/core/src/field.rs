//! Scalar, vector and tensor fields on a [`TorusGrid`], the simulation
//! [`State`] and seeded smooth initial data.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, values })
    }

    /// Wraps values already known to match the grid.
    pub(crate) fn from_raw(grid: Arc<TorusGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<TorusGrid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<TorusGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn<F: Fn([f64; 3]) -> f64>(grid: Arc<TorusGrid>, f: F) -> Self {
        let values = grid.sample(f);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_raw(self.grid.clone(), values)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| factor * v)
    }

    pub fn add_scaled_in_place(&mut self, factor: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate_raw(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn derivative(&self, axis: usize) -> Self {
        Self::from_raw(self.grid.clone(), self.grid.derivative_raw(&self.values, axis))
    }

    pub fn gradient(&self) -> VectorField {
        let comps = self
            .grid
            .gradient_raw(&self.values)
            .into_iter()
            .map(|v| Self::from_raw(self.grid.clone(), v))
            .collect();
        VectorField { comps }
    }

    /// Spectral Hessian `∂_i∂_j f` as a symmetric tensor.
    pub fn hessian(&self) -> TensorField {
        let d = self.grid.dim();
        let spec = self.grid.forward_raw(&self.values);
        let mut comps = vec![ScalarField::zeros(self.grid.clone()); d * d];
        for i in 0..d {
            for j in i..d {
                let shifted: Vec<Complex64> = spec
                    .iter()
                    .enumerate()
                    .map(|(flat, c)| {
                        c * self.grid.derivative_symbol(flat, i) * self.grid.derivative_symbol(flat, j)
                    })
                    .collect();
                let comp = Self::from_raw(self.grid.clone(), self.grid.backward_raw(&shifted));
                comps[j * d + i] = comp.clone();
                comps[i * d + j] = comp;
            }
        }
        TensorField { dim: d, comps }
    }

    pub fn laplacian(&self) -> Self {
        self.laplacian_power(1)
    }

    pub fn laplacian_power(&self, p: u32) -> Self {
        Self::from_raw(self.grid.clone(), self.grid.laplacian_power_raw(&self.values, p))
    }

    /// 2/3-rule truncation.
    pub fn dealiased(&self) -> Self {
        Self::from_raw(self.grid.clone(), self.grid.dealias_raw(&self.values))
    }

    pub fn galerkin(&self, cutoff: usize) -> Self {
        Self::from_raw(self.grid.clone(), self.grid.galerkin_raw(&self.values, cutoff))
    }

    /// Pointwise `max(f, floor)` and the number of points that were raised.
    pub fn floored(&self, floor: f64) -> (Self, usize) {
        let hits = self.values.iter().filter(|&&v| v < floor).count();
        (self.map(|v| v.max(floor)), hits)
    }
}

#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn from_components(comps: Vec<ScalarField>) -> Result<Self> {
        let first = comps.first().ok_or(Error::Shape {
            expected: 1,
            found: 0,
        })?;
        let dim = first.grid().dim();
        if comps.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                found: comps.len(),
            });
        }
        if comps.iter().any(|c| c.grid() != first.grid()) {
            return Err(Error::Domain("vector components live on different grids".into()));
        }
        Ok(Self { comps })
    }

    pub(crate) fn from_raw(comps: Vec<ScalarField>) -> Self {
        Self { comps }
    }

    pub fn zeros(grid: Arc<TorusGrid>) -> Self {
        let d = grid.dim();
        Self {
            comps: vec![ScalarField::zeros(grid); d],
        }
    }

    pub fn constant(grid: Arc<TorusGrid>, value: &[f64]) -> Self {
        let comps = (0..grid.dim())
            .map(|i| ScalarField::constant(grid.clone(), value.get(i).copied().unwrap_or(0.0)))
            .collect();
        Self { comps }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.comps
    }

    pub fn map_components<F: Fn(&ScalarField) -> ScalarField>(&self, f: F) -> Self {
        Self {
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip_components<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(&ScalarField, &ScalarField) -> ScalarField,
    {
        Self {
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_components(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_components(other, ScalarField::sub)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map_components(|c| c.scale(factor))
    }

    pub fn add_scaled_in_place(&mut self, factor: f64, other: &Self) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.add_scaled_in_place(factor, b);
        }
    }

    /// Pointwise product with a scalar field.
    pub fn times(&self, s: &ScalarField) -> Self {
        self.map_components(|c| c.mul(s))
    }

    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut acc = self.comps[0].mul(&other.comps[0]);
        for (a, b) in self.comps.iter().zip(&other.comps).skip(1) {
            acc = acc.add(&a.mul(b));
        }
        acc
    }

    pub fn norm_sq(&self) -> ScalarField {
        self.dot(self)
    }

    pub fn divergence(&self) -> ScalarField {
        let mut acc = self.comps[0].derivative(0);
        for (axis, c) in self.comps.iter().enumerate().skip(1) {
            acc = acc.add(&c.derivative(axis));
        }
        acc
    }

    /// `(∇v)_{ij} = ∂_j v_i`.
    pub fn jacobian(&self) -> TensorField {
        let d = self.dim();
        let mut comps = Vec::with_capacity(d * d);
        for c in &self.comps {
            comps.extend(c.gradient().into_components());
        }
        TensorField { dim: d, comps }
    }

    /// `(a ⊗ b)_{ij} = a_i b_j`.
    pub fn outer(&self, other: &Self) -> TensorField {
        let d = self.dim();
        let mut comps = Vec::with_capacity(d * d);
        for a in &self.comps {
            for b in &other.comps {
                comps.push(a.mul(b));
            }
        }
        TensorField { dim: d, comps }
    }

    pub fn dealiased(&self) -> Self {
        self.map_components(ScalarField::dealiased)
    }

    pub fn galerkin(&self, cutoff: usize) -> Self {
        self.map_components(|c| c.galerkin(cutoff))
    }

    pub fn laplacian_power(&self, p: u32) -> Self {
        self.map_components(|c| c.laplacian_power(p))
    }

    pub fn sup_norm(&self) -> f64 {
        self.norm_sq().max().max(0.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }
}

/// Row-major `d × d` tensor field.
#[derive(Clone, Debug)]
pub struct TensorField {
    dim: usize,
    comps: Vec<ScalarField>,
}

impl TensorField {
    pub fn zeros(grid: Arc<TorusGrid>) -> Self {
        let d = grid.dim();
        Self {
            dim: d,
            comps: vec![ScalarField::zeros(grid); d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i * self.dim + j]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn map_components<F: Fn(&ScalarField) -> ScalarField>(&self, f: F) -> Self {
        Self {
            dim: self.dim,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip_components<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(&ScalarField, &ScalarField) -> ScalarField,
    {
        Self {
            dim: self.dim,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_components(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_components(other, ScalarField::sub)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map_components(|c| c.scale(factor))
    }

    pub fn times(&self, s: &ScalarField) -> Self {
        self.map_components(|c| c.mul(s))
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let comps = (0..d * d).map(|k| self.comps[(k % d) * d + k / d].clone()).collect();
        Self { dim: d, comps }
    }

    pub fn symmetric_part(&self) -> Self {
        self.add(&self.transpose()).scale(0.5)
    }

    /// `(div T)_i = Σ_j ∂_j T_ij`.
    pub fn divergence(&self) -> VectorField {
        let d = self.dim;
        let comps = (0..d)
            .map(|i| {
                let mut acc = self.get(i, 0).derivative(0);
                for j in 1..d {
                    acc = acc.add(&self.get(i, j).derivative(j));
                }
                acc
            })
            .collect();
        VectorField { comps }
    }

    /// Pointwise `A : B = Σ_ij A_ij B_ij`.
    pub fn contract(&self, other: &Self) -> ScalarField {
        let mut acc = self.comps[0].mul(&other.comps[0]);
        for (a, b) in self.comps.iter().zip(&other.comps).skip(1) {
            acc = acc.add(&a.mul(b));
        }
        acc
    }

    /// Pointwise squared Frobenius norm.
    pub fn frobenius_sq(&self) -> ScalarField {
        self.contract(self)
    }

    pub fn dealiased(&self) -> Self {
        self.map_components(ScalarField::dealiased)
    }
}

/// Conservative unknowns `(ρ, m = ρv, c)` at one time instant.
#[derive(Clone, Debug)]
pub struct State {
    pub rho: ScalarField,
    pub mom: VectorField,
    pub chem: ScalarField,
    pub time: f64,
}

impl State {
    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.rho.grid()
    }

    /// Spatially constant state `(ρ̄, ρ̄ w, c̄)`.
    pub fn constant(grid: Arc<TorusGrid>, rho: f64, velocity: &[f64], chem: f64) -> Self {
        let mom: Vec<f64> = velocity.iter().map(|v| rho * v).collect();
        Self {
            rho: ScalarField::constant(grid.clone(), rho),
            mom: VectorField::constant(grid.clone(), &mom),
            chem: ScalarField::constant(grid, chem),
            time: 0.0,
        }
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.mom.is_finite() && self.chem.is_finite() && self.time.is_finite()
    }

    /// Number of field components `1 + d + 1`.
    pub fn component_count(&self) -> usize {
        self.mom.dim() + 2
    }

    pub fn components(&self) -> Vec<&ScalarField> {
        let mut out = vec![&self.rho];
        out.extend(self.mom.components());
        out.push(&self.chem);
        out
    }

    pub fn from_components(mut comps: Vec<ScalarField>, time: f64) -> Result<Self> {
        if comps.len() < 3 {
            return Err(Error::Shape {
                expected: 3,
                found: comps.len(),
            });
        }
        let chem = comps.pop().expect("length checked");
        let rho = comps.remove(0);
        let mom = VectorField::from_components(comps)?;
        Ok(Self {
            rho,
            mom,
            chem,
            time,
        })
    }

    /// Velocity `m / max(ρ, floor)`.
    pub fn velocity(&self, rho_floor: f64) -> VectorField {
        velocity_of(self, rho_floor)
    }
}

/// Recovers `v = m / max(ρ, rho_floor)` componentwise.
pub fn velocity_of(state: &State, rho_floor: f64) -> VectorField {
    let inv = state.rho.map(|r| 1.0 / r.max(rho_floor));
    state.mom.times(&inv)
}

#[derive(Clone, Debug)]
pub struct InitialData {
    pub rho0: ScalarField,
    pub v0: VectorField,
    pub chem0: ScalarField,
}

impl InitialData {
    pub fn to_state(&self) -> State {
        State {
            rho: self.rho0.clone(),
            mom: self.v0.times(&self.rho0),
            chem: self.chem0.clone(),
            time: 0.0,
        }
    }

    /// `(min, max)` of the initial density.
    pub fn rho_bounds(&self) -> (f64, f64) {
        (self.rho0.min(), self.rho0.max())
    }

    /// `(min, max)` of the initial concentration.
    pub fn chem_bounds(&self) -> (f64, f64) {
        (self.chem0.min(), self.chem0.max())
    }

    /// Grid `H¹` seminorm squared of `√ρ⁰`, i.e. `∫|∇√ρ⁰|²`.
    pub fn sqrt_rho_h1_seminorm_sq(&self) -> f64 {
        self.rho0.map(f64::sqrt).gradient().norm_sq().integral()
    }
}

/// Deterministic seeded zero-mean field whose spectrum is supported on
/// `max_i |m_i| <= band`, before any scaling. Mode coefficients are drawn in an
/// order that does not depend on the resolution, so the same seed gives
/// samples of the same trigonometric polynomial on every grid.
/// Zero-mean real field on modes `|m_i| <= band`, scaled so that the
/// coefficient l1 norm equals `bound`; hence `sup|f| <= bound` on any grid.
pub(crate) fn seeded_band_limited(
    grid: &TorusGrid,
    rng: &mut ChaCha8Rng,
    band: usize,
    bound: f64,
) -> Vec<f64> {
    let d = grid.dim();
    let b = band as i64;
    let mut spec = vec![Complex64::default(); grid.len()];
    let span = 2 * b + 1;
    let total = span.pow(d as u32);
    for lin in 0..total {
        let mut mode = [0i64; 3];
        let mut rem = lin;
        for axis in (0..d).rev() {
            mode[axis] = rem % span - b;
            rem /= span;
        }
        // half space: first nonzero index positive
        match mode.iter().take(d).find(|&&m| m != 0) {
            Some(&m) if m > 0 => {}
            _ => continue,
        }
        let m2: i64 = mode.iter().map(|m| m * m).sum();
        let weight = 1.0 / (1.0 + m2 as f64);
        let a: f64 = StandardNormal.sample(rng);
        let bcoef: f64 = StandardNormal.sample(rng);
        let c = Complex64::new(a, -bcoef) * (0.5 * weight);
        let pos = grid.flat_index_of_mode(&mode[..d]);
        let neg: Vec<i64> = mode[..d].iter().map(|m| -m).collect();
        let neg = grid.flat_index_of_mode(&neg);
        spec[pos] += c;
        spec[neg] += c.conj();
    }
    let l1: f64 = spec.iter().map(|z| z.norm()).sum();
    let factor = if l1 > 0.0 { bound / l1 } else { 0.0 };
    for z in &mut spec {
        *z *= factor;
    }
    grid.backward_raw(&spec)
}

fn check_band(grid: &TorusGrid, band: usize) -> Result<()> {
    if band >= grid.nyquist() {
        return Err(Error::config(
            "initial.band",
            format!("band {band} must be below the Nyquist index {}", grid.nyquist()),
        ));
    }
    Ok(())
}

/// `exp(f)` with `f` a seeded band-limited field with `sup|f| <= roughness`; strictly positive with `min >= exp(-roughness)`.
pub fn random_positive_field(
    grid: Arc<TorusGrid>,
    seed: u64,
    band: usize,
    roughness: f64,
) -> Result<ScalarField> {
    check_band(&grid, band)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = seeded_band_limited(&grid, &mut rng, band, roughness);
    let values = f.into_iter().map(f64::exp).collect();
    Ok(ScalarField::from_raw(grid, values))
}

/// Smooth strictly positive initial data.
///
/// `ρ⁰ = ρ̄ exp(f)/⟨exp(f)⟩` and `c⁰ = c̄ exp(g)/⟨exp(g)⟩` with `f`, `g`
/// seeded band-limited zero-mean fields with `sup|f| <= amplitude`; each velocity
/// component is band-limited with the same bound.
pub fn make_initial_data(
    grid: Arc<TorusGrid>,
    seed: u64,
    band: usize,
    amplitude: f64,
    mean_rho: f64,
    mean_c: f64,
) -> Result<InitialData> {
    if !(mean_rho > 0.0) {
        return Err(Error::config("initial.mean_rho", "must be positive"));
    }
    if !(mean_c >= 0.0) {
        return Err(Error::config("initial.mean_c", "must be nonnegative"));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::config("initial.amplitude", "must be nonnegative and finite"));
    }
    check_band(&grid, band)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positive = |mean: f64| {
        let f = seeded_band_limited(&grid, &mut rng, band, amplitude);
        let e: Vec<f64> = f.into_iter().map(f64::exp).collect();
        let avg = e.iter().sum::<f64>() / e.len() as f64;
        e.into_iter().map(|v| mean * v / avg).collect::<Vec<f64>>()
    };
    let rho0 = ScalarField::from_raw(grid.clone(), positive(mean_rho));
    let chem0 = ScalarField::from_raw(grid.clone(), positive(mean_c));
    let comps = (0..grid.dim())
        .map(|_| {
            let f = seeded_band_limited(&grid, &mut rng, band, amplitude);
            ScalarField::from_raw(grid.clone(), f)
        })
        .collect();
    Ok(InitialData {
        rho0,
        v0: VectorField::from_raw(comps),
        chem0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(d: usize, n: usize) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::periodic(d, n).unwrap())
    }

    #[test]
    fn zero_momentum_gives_zero_velocity() {
        let s = State::constant(grid(2, 8), 1.3, &[0.0, 0.0], 0.4);
        let v = velocity_of(&s, 1e-8);
        assert!(v.components().iter().all(|c| c.sup_norm() == 0.0));
    }

    #[test]
    fn constant_velocity_recovered() {
        let s = State::constant(grid(3, 8), 2.0, &[1.0, 0.0, 0.0], 0.0);
        let v = velocity_of(&s, 1e-8);
        assert!(v.component(0).values().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!(v.component(1).sup_norm() == 0.0 && v.component(2).sup_norm() == 0.0);
    }

    #[test]
    fn construct_then_invert_velocity() {
        let g = grid(2, 16);
        let rho = random_positive_field(g.clone(), 3, 4, 1.5).unwrap();
        let w = VectorField::from_components(vec![
            ScalarField::from_fn(g.clone(), |x| x[0].sin() + 0.3),
            ScalarField::from_fn(g.clone(), |x| (2.0 * x[1]).cos() * x[0].cos()),
        ])
        .unwrap();
        let state = State {
            rho: rho.clone(),
            mom: w.times(&rho),
            chem: ScalarField::zeros(g),
            time: 0.0,
        };
        let v = velocity_of(&state, 1e-8);
        for (a, b) in v.components().iter().zip(w.components()) {
            let err = a.sub(b).sup_norm();
            assert!(err <= 1e-12, "{err}");
        }
    }

    #[test]
    fn zero_amplitude_gives_constant_state() {
        let g = grid(2, 16);
        let data = make_initial_data(g, 42, 3, 0.0, 1.5, 0.7).unwrap();
        assert!(data.rho0.values().iter().all(|&r| (r - 1.5).abs() < 1e-14));
        assert!(data.chem0.values().iter().all(|&c| (c - 0.7).abs() < 1e-14));
        assert!(data.v0.components().iter().all(|c| c.sup_norm() == 0.0));
    }

    #[test]
    fn initial_data_is_deterministic() {
        let g = grid(2, 16);
        let a = make_initial_data(g.clone(), 7, 4, 0.4, 1.0, 1.0).unwrap();
        let b = make_initial_data(g, 7, 4, 0.4, 1.0, 1.0).unwrap();
        assert_eq!(a.rho0.values(), b.rho0.values());
        assert_eq!(a.chem0.values(), b.chem0.values());
        for (x, y) in a.v0.components().iter().zip(b.v0.components()) {
            assert_eq!(x.values(), y.values());
        }
    }

    #[test]
    fn initial_mass_and_positivity() {
        for d in 1..=3 {
            let g = grid(d, 16);
            let amp = 0.8;
            let data = make_initial_data(g.clone(), 11, 3, amp, 1.7, 0.5).unwrap();
            let mass = data.rho0.integral();
            assert!((mass - 1.7 * g.volume()).abs() <= 1e-12 * mass);
            assert!(data.rho0.min() >= 1.7 * (-2.0 * amp).exp());
            assert!(data.chem0.min() >= 0.0);
            for c in data.v0.components() {
                assert!(c.sup_norm() <= amp * (1.0 + 1e-12));
                let p = c.galerkin(3);
                assert!(p.sub(c).sup_norm() < 1e-12);
            }
            assert!(data.sqrt_rho_h1_seminorm_sq().is_finite());
        }
    }

    #[test]
    fn band_at_nyquist_is_rejected() {
        let g = grid(1, 16);
        assert!(matches!(
            make_initial_data(g.clone(), 1, 8, 0.1, 1.0, 1.0),
            Err(Error::Config { .. })
        ));
        assert!(random_positive_field(g, 1, 9, 0.1).is_err());
    }

    #[test]
    fn random_positive_field_bounds() {
        let g = grid(2, 16);
        let f = random_positive_field(g.clone(), 5, 4, 0.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
        let f = random_positive_field(g.clone(), 5, 4, 1.3).unwrap();
        assert!(f.min() >= (-1.3f64).exp() * (1.0 - 1e-14));
        let h = random_positive_field(g, 5, 4, 1.3).unwrap();
        assert_eq!(f.values(), h.values());
    }

    #[test]
    fn seeded_fields_agree_across_resolutions() {
        let coarse = random_positive_field(grid(1, 16), 8, 3, 1.0).unwrap();
        let fine = random_positive_field(grid(1, 32), 8, 3, 1.0).unwrap();
        // every other fine point coincides with a coarse point; the sup-norm
        // rescaling differs only by the grid maximum
        let ratio = coarse.values()[5].ln() / fine.values()[10].ln();
        assert!((ratio - 1.0).abs() < 0.05);
    }

    #[test]
    fn tensor_helpers() {
        let g = grid(2, 16);
        let v = VectorField::from_components(vec![
            ScalarField::from_fn(g.clone(), |x| x[1].sin()),
            ScalarField::from_fn(g.clone(), |x| x[0].cos()),
        ])
        .unwrap();
        let j = v.jacobian();
        // ∂_1 v_0 = cos y
        let expect = ScalarField::from_fn(g.clone(), |x| x[1].cos());
        assert!(j.get(0, 1).sub(&expect).sup_norm() < 1e-12);
        assert!(j.get(0, 0).sup_norm() < 1e-12);
        let t = j.transpose();
        assert!(t.get(1, 0).sub(&expect).sup_norm() < 1e-12);
        let s = j.symmetric_part();
        assert!(s.get(0, 1).sub(s.get(1, 0)).sup_norm() < 1e-15);
    }

    #[test]
    fn state_component_round_trip() {
        let g = grid(2, 8);
        let s = State::constant(g, 1.0, &[0.5, -0.5], 2.0);
        let comps: Vec<ScalarField> = s.components().into_iter().cloned().collect();
        let back = State::from_components(comps, 0.25).unwrap();
        assert_eq!(back.mom.dim(), 2);
        assert_eq!(back.chem.values()[0], 2.0);
        assert_eq!(back.time, 0.25);
    }
}
