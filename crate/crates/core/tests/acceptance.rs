//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use chemonsk::harness::{
    default_calibration_targets, energy_refinement_study, run, sweep, weak_residual_study, RunConfig, SweepSpec,
};
use chemonsk::inequality::{calibration_stability, quantum_suite, FamilySpec};
use chemonsk::integrator::{integrate_state, StepControls, Stepper};
use chemonsk::model::ModelParams;
use chemonsk::{RegParams, State, TorusGrid};

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn report(&mut self, id: u32, name: &str, pass: bool, elapsed: Duration, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} [{id}] {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn list(xs: &[f64], digits: usize) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.digits$e}")).collect();
    format!("[{}]", items.join(", "))
}

fn non_increasing(xs: &[f64], floor: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor)
}

fn main() {
    let mut out = Outcome { failures: 0 };
    let scratch = tempfile::tempdir().expect("scratch directory");
    let mut drifts: Vec<(String, f64)> = Vec::new();

    // 1
    let t = Instant::now();
    let verdicts = quantum_suite(200, 11).expect("quantum suite");
    let elapsed = t.elapsed();
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    let worst = verdicts
        .iter()
        .map(|v| v.margin / (1.0 + v.rhs.abs()))
        .fold(f64::INFINITY, f64::min);
    let dims: Vec<usize> = (1..=3).map(|d| verdicts.iter().filter(|v| v.dim == d).count()).collect();
    out.report(
        1,
        "quantum inequality",
        failed == 0 && verdicts.len() == 200 && elapsed < Duration::from_secs(60),
        elapsed,
        format!("{} fields (d=1,2,3: {dims:?}), {failed} failures, worst relative margin {worst:.3e}", verdicts.len()),
    );

    // 2
    let t = Instant::now();
    let orders = common::oracle_orders();
    let gaps = common::korteweg_form_gap();
    let mut pass = orders.iter().all(|(_, e, _, p)| common::oracle_pass(*e, *p));
    pass &= gaps.windows(2).all(|w| w[1].1 < w[0].1 || w[1].1 < 1e-12);
    let summary: Vec<String> = orders
        .iter()
        .map(|(n, e, _, p)| if *e <= 1e-12 { format!("{n} exact") } else { format!("{n} p={p:.2}") })
        .collect();
    out.report(
        2,
        "operator oracles",
        pass,
        t.elapsed(),
        format!(
            "{}; korteweg form gap {:?}",
            summary.join(", "),
            gaps.iter().map(|(n, g)| format!("N={n}:{g:.1e}")).collect::<Vec<_>>()
        ),
    );

    // 3
    let t = Instant::now();
    let g = Arc::new(TorusGrid::periodic(2, 32).unwrap());
    let model = ModelParams::default();
    let reg = RegParams::default();
    let s0 = State::constant(g.clone(), 1.3, &[0.0, 0.0], 1.3);
    let stepper = Stepper::for_state(&s0, model, reg, StepControls::fixed(1e-3)).unwrap();
    let mut s = s0.clone();
    for _ in 0..1000 {
        s = stepper.step(&s, 1e-3).unwrap().state;
    }
    let drift = s0
        .components()
        .iter()
        .zip(s.components())
        .flat_map(|(a, b)| a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    out.report(
        3,
        "constant-state fixed point",
        drift <= 1e-12,
        t.elapsed(),
        format!("max drift {drift:.2e} over 1000 steps"),
    );

    // 4
    let t = Instant::now();
    let (rho_bar, c0) = (0.8, 2.5);
    let s0 = State::constant(g.clone(), rho_bar, &[0.0, 0.0], c0);
    let traj = integrate_state(s0, &model, &reg, &StepControls::default(), 1.0, 0.25).unwrap();
    let exact = rho_bar + (c0 - rho_bar) * (-1.0f64).exp();
    let err = traj
        .final_state()
        .chem
        .values()
        .iter()
        .map(|c| (c - exact).abs())
        .fold(0.0, f64::max);
    drifts.push(("chem decay".into(), traj.max_mass_drift()));
    out.report(
        4,
        "chemical decay",
        traj.status.is_completed() && err <= 1e-6,
        t.elapsed(),
        format!("terminal error {err:.2e}, {} steps", traj.stats.accepted),
    );

    // 6
    let cfg = RunConfig::default();
    let t = Instant::now();
    let default_run = run(&cfg, &scratch.path().join("default")).expect("default run");
    let run_time = t.elapsed();
    let bundle = default_run.diagnostics.clone().expect("diagnostics");
    drifts.push(("default run".into(), default_run.trajectory.max_mass_drift()));
    let t = Instant::now();
    let levels = energy_refinement_study(&cfg, 1e-2, 3).expect("energy refinement");
    let violations: Vec<f64> = levels.iter().map(|l| l.max_violation).collect();
    let defects: Vec<f64> = levels.iter().map(|l| l.max_abs_identity_defect).collect();
    for l in &levels {
        drifts.push((format!("energy dt={}", l.dt), l.max_mass_drift));
    }
    let shrink = non_increasing(&violations, 0.0)
        && non_increasing(&defects, 1e-10)
        && (defects[2] <= 0.5 * defects[0] || defects[2] <= 1e-10)
        && levels.iter().all(|l| l.completed);
    let ei = &bundle.energy_inequality;
    out.report(
        6,
        "energy inequality",
        default_run.trajectory.status.is_completed()
            && ei.pass
            && shrink
            && run_time < Duration::from_secs(600),
        run_time + t.elapsed(),
        format!(
            "default run {:.1}s, {} rows, min margin {:.3e}, max violation {:.1e}; dt halving violations {}, identity defects {}",
            run_time.as_secs_f64(),
            ei.rows.len(),
            ei.min_margin,
            ei.max_violation,
            list(&violations, 1),
            list(&defects, 2)
        ),
    );

    // 7
    let t = Instant::now();
    let study = weak_residual_study(&cfg, 1e-2, 0.1, 3).expect("weak residual study");
    for (dt, d) in study.dts.iter().zip(&study.max_mass_drift) {
        drifts.push((format!("weak dt={dt}"), *d));
    }
    out.report(
        7,
        "weak residual convergence",
        study.convergence.pass,
        t.elapsed(),
        format!(
            "max residuals {}, orders {:.2?}",
            list(&study.convergence.max_residuals, 2),
            study.convergence.orders
        ),
    );

    // 8
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for target in default_calibration_targets(1.5) {
        let r = calibration_stability(target, FamilySpec::default()).expect("calibration");
        pass &= r.pass;
        detail.push(format!("{} {:.3e}->{:.3e} (x{:.2})", r.name, r.coarse, r.fine, r.ratio));
    }
    out.report(8, "calibration stability", pass, t.elapsed(), detail.join(", "));

    // 9
    let t = Instant::now();
    let with_gamma = |gamma: f64| RunConfig {
        model: ModelParams { gamma, ..cfg.model },
        diagnostics: chemonsk::harness::DiagnosticsSpec {
            weak_residual: false,
            ..cfg.diagnostics
        },
        ..cfg.clone()
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for (gamma, dir) in [(1.6, "sweep16"), (1.2, "sweep12")] {
        let spec = SweepSpec::kr_limit(with_gamma(gamma), &SweepSpec::default_kappas()).unwrap();
        let s = sweep(&spec, &scratch.path().join(dir)).expect("sweep");
        for r in &s.rows {
            drifts.push((format!("sweep gamma={gamma} {}", r.label), r.max_mass_drift));
        }
        if s.asserted {
            pass &= s.pass;
        } else {
            pass &= s.all_completed;
        }
        detail.push(format!(
            "gamma={gamma}: sup(E_K+E_BD) {}, ratio {:.3}{}",
            list(&s.rows.iter().map(|r| r.sup_e_k_plus_e_bd).collect::<Vec<_>>(), 4),
            s.uniformity_ratio,
            if s.asserted { "" } else { " (reported only)" }
        ));
    }
    let elapsed = t.elapsed();
    out.report(
        9,
        "uniformity sweep",
        pass && elapsed < Duration::from_secs(2400),
        elapsed,
        detail.join("; "),
    );

    // 5
    let t = Instant::now();
    let mm = &bundle.mass_maxprinciple;
    let worst = drifts.iter().cloned().fold(("none".to_string(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let all_mass = drifts.iter().all(|(_, d)| *d <= 1e-10);
    out.report(
        5,
        "mass and max principle",
        all_mass && mm.c_envelope_holds,
        t.elapsed(),
        format!(
            "{} trajectories, worst mass drift {:.2e} ({}); c in [{:.4}, {:.4}] vs envelope [{:.4}, {:.4}], violation {:.1e}",
            drifts.len(),
            worst.1,
            worst.0,
            mm.c_min,
            mm.c_max,
            mm.c_lower,
            mm.c_upper,
            mm.c_violation
        ),
    );

    println!(
        "acceptance: {} failure{}",
        out.failures,
        if out.failures == 1 { "" } else { "s" }
    );
    if out.failures > 0 {
        std::process::exit(1);
    }
}
