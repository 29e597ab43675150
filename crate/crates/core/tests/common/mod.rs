//! Second-order finite-difference oracles on the periodic grid, built from
//! centered stencils only and independent of the spectral machinery.

#![allow(dead_code)]

use std::sync::Arc;

use chemonsk::field::{ScalarField, VectorField};
use chemonsk::model::{
    chemotaxis_force, drag_force, higher_order_force, korteweg_force, korteweg_stress_divergence, pressure_gradient,
    relaxation_force, viscous_force,
};
use chemonsk::{RegParams, TorusGrid};

pub struct Fd {
    n: usize,
    dim: usize,
    h: f64,
    len: usize,
}

type Vf = Vec<Vec<f64>>;

impl Fd {
    pub fn of(grid: &TorusGrid) -> Self {
        Self {
            n: grid.points_per_axis(),
            dim: grid.dim(),
            h: grid.spacing(),
            len: grid.len(),
        }
    }

    fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    fn neighbour(&self, i: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let j = (i / s) % self.n;
        let j2 = if forward { (j + 1) % self.n } else { (j + self.n - 1) % self.n };
        i - j * s + j2 * s
    }

    pub fn d(&self, f: &[f64], axis: usize) -> Vec<f64> {
        (0..self.len)
            .map(|i| (f[self.neighbour(i, axis, true)] - f[self.neighbour(i, axis, false)]) / (2.0 * self.h))
            .collect()
    }

    pub fn d2(&self, f: &[f64], axis: usize) -> Vec<f64> {
        (0..self.len)
            .map(|i| {
                (f[self.neighbour(i, axis, true)] - 2.0 * f[i] + f[self.neighbour(i, axis, false)]) / (self.h * self.h)
            })
            .collect()
    }

    pub fn lap(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for a in 0..self.dim {
            add(&mut out, &self.d2(f, a), 1.0);
        }
        out
    }

    pub fn grad(&self, f: &[f64]) -> Vf {
        (0..self.dim).map(|a| self.d(f, a)).collect()
    }

    pub fn div(&self, v: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (a, comp) in v.iter().enumerate() {
            add(&mut out, &self.d(comp, a), 1.0);
        }
        out
    }

    /// Second derivative `∂_a∂_b`.
    pub fn dd(&self, f: &[f64], a: usize, b: usize) -> Vec<f64> {
        if a == b {
            self.d2(f, a)
        } else {
            self.d(&self.d(f, a), b)
        }
    }
}

pub fn add(out: &mut [f64], x: &[f64], s: f64) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += s * v;
    }
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn map(a: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    a.iter().map(|&x| f(x)).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    map(a, |x| s * x)
}

pub fn vec_values(v: &VectorField) -> Vf {
    v.components().iter().map(|c| c.values().to_vec()).collect()
}

/// `max|a − b| / max|a|` over all components.
pub fn rel_error(reference: &[Vec<f64>], other: &[Vec<f64>]) -> f64 {
    let mut diff: f64 = 0.0;
    let mut size: f64 = 0.0;
    for (a, b) in reference.iter().zip(other) {
        for (x, y) in a.iter().zip(b) {
            diff = diff.max((x - y).abs());
            size = size.max(x.abs());
        }
    }
    diff / size
}

pub struct Sample {
    pub rho: ScalarField,
    pub chem: ScalarField,
    pub v: VectorField,
}

/// Smooth two-dimensional test state with trigonometric content up to
/// wavenumber 2.
pub fn sample(n: usize) -> Sample {
    let g = Arc::new(TorusGrid::periodic(2, n).unwrap());
    let rho = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.3 * x[0].sin() * x[1].cos() + 0.2 * (2.0 * x[1]).cos());
    let chem = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.3 * (x[0] + x[1]).cos() + 0.2 * (2.0 * x[0]).sin());
    let v0 = ScalarField::from_fn(g.clone(), |x| 0.4 * x[1].sin() + 0.2 * x[0].cos());
    let v1 = ScalarField::from_fn(g.clone(), |x| 0.3 * x[0].cos() * x[1].sin() - 0.1 * (2.0 * x[0]).sin());
    let v = VectorField::from_components(vec![v0, v1]).unwrap();
    Sample { rho, chem, v }
}

pub const GAMMA: f64 = 1.5;
pub const NU: f64 = 0.1;
pub const ZETA: f64 = 1.0;
pub const KAPPA: f64 = 1e-2;

/// Force terms as `(name, spectral, finite-difference)` on `sample(n)`.
pub fn force_pairs(n: usize) -> Vec<(&'static str, Vf, Vf)> {
    let s = sample(n);
    let fd = Fd::of(s.rho.grid());
    let rho = s.rho.values().to_vec();
    let c = s.chem.values().to_vec();
    let v = vec_values(&s.v);
    let d = v.len();
    let mut out = Vec::new();

    let p = map(&rho, |r| r.powf(GAMMA));
    out.push(("pressure_gradient", vec_values(&pressure_gradient(&s.rho, GAMMA).unwrap()), fd.grad(&p)));

    let visc: Vf = (0..d)
        .map(|i| {
            let flux: Vf = (0..d)
                .map(|j| {
                    let dij: Vec<f64> = fd.d(&v[i], j).iter().zip(fd.d(&v[j], i)).map(|(a, b)| 0.5 * (a + b)).collect();
                    mul(&rho, &dij)
                })
                .collect();
            scale(&fd.div(&flux), NU)
        })
        .collect();
    out.push(("viscous_force", vec_values(&viscous_force(&s.rho, &s.v, NU)), visc));

    let chemo: Vf = fd.grad(&c).iter().map(|g| mul(&rho, g)).collect();
    out.push(("chemotaxis_force", vec_values(&chemotaxis_force(&s.rho, &s.chem)), chemo));

    let relax: Vf = v.iter().map(|vi| scale(&mul(&rho, vi), -1.0 / ZETA)).collect();
    out.push(("relaxation_force", vec_values(&relaxation_force(&s.rho, &s.v, ZETA)), relax));

    let sq = map(&rho, f64::sqrt);
    let bohm: Vec<f64> = fd.lap(&sq).iter().zip(&sq).map(|(a, b)| a / b).collect();
    let kort: Vf = fd.grad(&bohm).iter().map(|g| scale(&mul(&rho, g), KAPPA)).collect();
    out.push((
        "korteweg_force",
        vec_values(&korteweg_force(&s.rho, KAPPA, 1e-8).value),
        kort,
    ));

    let logr = map(&rho, f64::ln);
    let stress: Vf = (0..d)
        .map(|i| {
            let row: Vf = (0..d).map(|j| mul(&rho, &fd.dd(&logr, i, j))).collect();
            scale(&fd.div(&row), 0.5 * KAPPA)
        })
        .collect();
    out.push((
        "korteweg_stress_divergence",
        vec_values(&korteweg_stress_divergence(&s.rho, KAPPA)),
        stress,
    ));

    let (r0, r1) = (1e-3, 1e-3);
    let speed2: Vec<f64> = (0..rho.len()).map(|k| v.iter().map(|vi| vi[k] * vi[k]).sum()).collect();
    let w = mul(&rho, &speed2);
    let drag: Vf = v
        .iter()
        .map(|vi| vi.iter().zip(&w).map(|(a, b)| -r0 * a - r1 * b * a).collect())
        .collect();
    out.push(("drag_force", vec_values(&drag_force(&s.rho, &s.v, r0, r1)), drag));

    let only = |reg: RegParams| vec_values(&higher_order_force(&s.rho, &s.v, &reg).value);
    let none = RegParams {
        epsilon: 0.0,
        mu: 0.0,
        eta: 0.0,
        delta: 0.0,
        ..RegParams::default()
    };

    let eps = 1e-2;
    let grad_rho = fd.grad(&rho);
    let eps_fd: Vf = (0..d)
        .map(|i| {
            let flux: Vf = (0..d).map(|j| mul(&v[i], &grad_rho[j])).collect();
            scale(&fd.div(&flux), eps)
        })
        .collect();
    out.push(("ho_epsilon_flux", only(RegParams { epsilon: eps, ..none }), eps_fd));

    let mu = 1e-3;
    let mu_fd: Vf = v.iter().map(|vi| scale(&fd.lap(&fd.lap(vi)), -mu)).collect();
    out.push(("ho_mu_bilaplacian", only(RegParams { mu, ..none }), mu_fd));

    let eta = 1e-4;
    let inv3 = map(&rho, |r| r.powi(-3));
    out.push((
        "ho_eta_cold_pressure",
        only(RegParams { eta, ..none }),
        fd.grad(&inv3).iter().map(|g| scale(g, eta)).collect(),
    ));

    let delta = 1e-10;
    let mut l5 = rho.clone();
    for _ in 0..5 {
        l5 = fd.lap(&l5);
    }
    let delta_fd: Vf = fd.grad(&l5).iter().map(|g| scale(&mul(&rho, g), delta)).collect();
    out.push(("ho_delta_capillarity", only(RegParams { delta, ..none }), delta_fd));

    out
}

/// Relative spectral-vs-finite-difference error of every force term on
/// `N = 32` and `N = 64`, with the observed order.
pub fn oracle_orders() -> Vec<(&'static str, f64, f64, f64)> {
    let coarse = force_pairs(32);
    let fine = force_pairs(64);
    coarse
        .iter()
        .zip(&fine)
        .map(|((name, s1, f1), (_, s2, f2))| {
            let e1 = rel_error(s1, f1);
            let e2 = rel_error(s2, f2);
            (*name, e1, e2, (e1 / e2).log2())
        })
        .collect()
}

/// Pointwise terms agree to round-off; differential terms must show
/// second-order convergence.
pub fn oracle_pass(e_coarse: f64, order: f64) -> bool {
    e_coarse <= 1e-12 || order >= 1.8
}

/// `korteweg_force` against its stress form at `N = 16, 32, 64`.
pub fn korteweg_form_gap() -> Vec<(usize, f64)> {
    [16, 32, 64]
        .into_iter()
        .map(|n| {
            let g = Arc::new(TorusGrid::periodic(2, n).unwrap());
            let rho = ScalarField::from_fn(g, |x| 1.0 + 0.5 * x[0].sin() * x[1].cos() + 0.3 * (2.0 * x[1]).cos());
            let a = vec_values(&korteweg_force(&rho, KAPPA, 1e-8).value);
            let b = vec_values(&korteweg_stress_divergence(&rho, KAPPA));
            (n, rel_error(&a, &b))
        })
        .collect()
}
