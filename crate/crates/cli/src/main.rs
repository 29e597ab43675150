use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chemonsk::harness::{
    aggregate_sweep, report, run, sweep, verify_inequalities, weak_residual_study, write_verification, RunConfig,
    SweepPreset, SweepSpec, VerifyPreset,
};
use chemonsk::io::write_json;
use chemonsk::Error;

/// Simulator and verification suite for the chemotaxis Navier–Stokes–Korteweg
/// system on the periodic torus.
#[derive(Parser)]
#[command(name = "chemonsk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and persist fields, energies and diagnostics.
    Simulate {
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `initial.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a parameter sweep over vanishing regularizations.
    Sweep {
        /// `kr-limit` or `ho-limit`.
        #[arg(long)]
        preset: String,
        /// Base configuration for every point.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the adiabatic exponent of the base configuration.
        #[arg(long)]
        gamma: Option<f64>,
        /// Rebuild the summary from existing point manifests without running.
        #[arg(long)]
        aggregate: bool,
    },
    /// Check functional inequalities on seeded field families.
    VerifyInequalities {
        /// `quantum`, `rho-c`, `rho2`, `positivity` or `calibration`.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weak-form residuals under joint halving of the step and record interval.
    WeakResidual {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Coarsest fixed step.
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        /// Coarsest record interval.
        #[arg(long, default_value_t = 0.1)]
        record_every: f64,
    },
    /// Regenerate diagnostics of a persisted run from its files.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> chemonsk::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.initial.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: Cli) -> chemonsk::Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let dir = cfg.resolve_output(out.as_deref());
            let outcome = run(&cfg, &dir)?;
            let m = &outcome.manifest;
            println!(
                "{}: {:?}, {} accepted steps, {:.1}s -> {}",
                if m.pass { "pass" } else { "fail" },
                m.status,
                m.stats.accepted,
                m.wall_time_s,
                dir.display()
            );
            Ok(verdict(m.pass))
        }
        Command::Sweep {
            preset,
            config,
            out,
            seed,
            gamma,
            aggregate,
        } => {
            let summary = if aggregate {
                aggregate_sweep(&out)?
            } else {
                let preset: SweepPreset = preset.parse()?;
                let mut base = load_config(config.as_deref(), seed)?;
                if let Some(g) = gamma {
                    base.model.gamma = g;
                }
                let spec = SweepSpec::preset(preset, base)?;
                sweep(&spec, &out)?
            };
            for r in &summary.rows {
                println!(
                    "{}: completed={} sup(E_K+E_BD)={:.6e}",
                    r.label, r.completed, r.sup_e_k_plus_e_bd
                );
            }
            println!(
                "uniformity ratio {:.4} (factor {}, {})",
                summary.uniformity_ratio,
                summary.uniformity_factor,
                if summary.asserted { "asserted" } else { "reported only" }
            );
            Ok(verdict(summary.pass))
        }
        Command::VerifyInequalities {
            preset,
            count,
            seed,
            out,
        } => {
            let preset: VerifyPreset = preset.parse()?;
            let outcome = verify_inequalities(preset, count, seed)?;
            if let Some(dir) = out {
                write_verification(&dir, &outcome)?;
            }
            if !outcome.verdicts.is_empty() {
                println!(
                    "{} verdicts, {} failed",
                    outcome.verdicts.len(),
                    outcome.failed
                );
            }
            for c in &outcome.calibrations {
                println!("{}: C* = {:.6e}", c.name, c.constant);
            }
            for s in &outcome.stability {
                println!(
                    "{}: {:.6e} -> {:.6e} (ratio {:.3}) {}",
                    s.name,
                    s.coarse,
                    s.fine,
                    s.ratio,
                    if s.pass { "stable" } else { "unstable" }
                );
            }
            Ok(verdict(outcome.pass))
        }
        Command::WeakResidual {
            config,
            out,
            seed,
            levels,
            dt,
            record_every,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let study = weak_residual_study(&cfg, dt, record_every, levels)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_json(&dir.join("weak_residual_study.json"), &study)?;
            }
            for (i, r) in study.convergence.max_residuals.iter().enumerate() {
                println!("dt={:.3e}: max residual {:.6e}", study.dts[i], r);
            }
            println!("orders {:?}", study.convergence.orders);
            Ok(verdict(study.convergence.pass))
        }
        Command::Report { run: dir } => {
            let r = report(&dir)?;
            println!(
                "diagnostics {}; regenerated files {}",
                if r.pass { "pass" } else { "fail" },
                if r.identical { "identical" } else { "differ" }
            );
            Ok(verdict(r.pass && r.identical))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Format(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
