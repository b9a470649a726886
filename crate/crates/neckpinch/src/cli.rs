//! Batch command implementations: simulate, decompose, spectrum,
//! propagator-test, check-assumptions, report.

use crate::config::RunConfig;
use crate::decomp::{self, DecomposedState};
use crate::diagnostics::{self, OptimalSample, ParamSample};
use crate::error::{Error, Result};
use crate::field::GraphField;
use crate::profile::BetaClock;
use crate::report::{self, DiagnosticsReport};
use crate::solver::{self, RunResult};
use crate::spectral::{self, OscillatorSpec};
use crate::surface::Frame;
use std::path::{Path, PathBuf};

/// Parsed command line.
#[derive(Debug, Clone)]
pub struct CliArgs {
    pub command: String,
    pub config: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub snapshot: Option<PathBuf>,
    pub alpha: Option<f64>,
}

pub const USAGE: &str = "\
neckpinch <command> [flags]

commands:
  simulate           advance the rescaled flow, writing trajectory and reports
  decompose          fit the 7-mode decomposition of a stored snapshot
  spectrum           print the linearization spectrum table
  propagator-test    run the seeded propagator decay experiments
  check-assumptions  evaluate the initial-data assumption margins
  report             rebuild the diagnostics report from a run directory

flags:
  --config PATH      run configuration file
  --output-dir PATH  output directory (overrides config; or NECKPINCH_OUT)
  --seed N           random seed (overrides config)
  --snapshot PATH    binary graph snapshot (decompose)
  --a VALUE          rescaling rate for the spectrum table (default 0.5)
";

pub fn parse_args(argv: &[String]) -> Result<CliArgs> {
    if argv.is_empty() {
        return Err(Error::InvalidConfig("missing command".into()));
    }
    let mut args = CliArgs {
        command: argv[0].clone(),
        config: None,
        output_dir: None,
        seed: None,
        snapshot: None,
        alpha: None,
    };
    let mut i = 1;
    while i < argv.len() {
        let flag = argv[i].as_str();
        let value = argv.get(i + 1).ok_or_else(|| {
            Error::InvalidConfig(format!("flag {flag} expects a value"))
        })?;
        match flag {
            "--config" => args.config = Some(PathBuf::from(value)),
            "--output-dir" => args.output_dir = Some(PathBuf::from(value)),
            "--seed" => {
                args.seed = Some(value.parse().map_err(|_| {
                    Error::InvalidConfig(format!("bad seed {value:?}"))
                })?)
            }
            "--snapshot" => args.snapshot = Some(PathBuf::from(value)),
            "--a" => {
                args.alpha = Some(value.parse().map_err(|_| {
                    Error::InvalidConfig(format!("bad rate {value:?}"))
                })?)
            }
            other => {
                return Err(Error::InvalidConfig(format!("unknown flag {other}")));
            }
        }
        i += 2;
    }
    Ok(args)
}

fn effective_config(args: &CliArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    } else if let Ok(dir) = std::env::var("NECKPINCH_OUT") {
        if !dir.is_empty() {
            cfg.output_dir = PathBuf::from(dir);
        }
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Assemble the end-of-run diagnostics from the in-memory trajectory.
pub fn build_report(run: &RunResult, cfg: &RunConfig) -> Result<DiagnosticsReport> {
    let clock = BetaClock::from_b0(cfg.perturbation.b0)?;
    let consts = cfg.golden_constants()?;
    let final_v = &run.final_state.v;

    let lyapunov = diagnostics::lyapunov_table(final_v).ok();
    let conditions = diagnostics::condition_check(
        final_v,
        run.final_state.a,
        run.final_state.tau,
        &clock,
        &consts,
    )
    .ok();

    let params: Vec<ParamSample> = run
        .decomps
        .iter()
        .map(|d| ParamSample {
            tau: d.tau,
            a: d.decomp.params.a,
            b: d.decomp.params.b,
            beta0: d.decomp.params.beta[0],
        })
        .collect();
    let ode_residuals = diagnostics::ode_residuals(&params, &clock).unwrap_or_default();
    let gamma2_slope = if ode_residuals.len() >= 4 {
        let betas: Vec<f64> = ode_residuals.iter().map(|r| r.beta).collect();
        let g2: Vec<f64> = ode_residuals.iter().map(|r| r.gamma2).collect();
        Some(diagnostics::log_log_slope(&betas, &g2))
    } else {
        None
    };

    let majorants = diagnostics::majorants(
        run.decomps.iter().map(|d| diagnostics::MajorantSample {
            tau: d.tau,
            a: d.decomp.params.a,
            b: d.decomp.params.b,
            phi: &d.decomp.phi,
        }),
        &clock,
    )
    .ok();

    let t_hat = solver::estimate_t(&run.final_state).unwrap_or(f64::NAN);
    let fit = if run.optimals.len() >= 3 && t_hat.is_finite() {
        let samples: Vec<OptimalSample> = run
            .optimals
            .iter()
            .map(|o| OptimalSample {
                t: o.t,
                lambda_opt: o.lambda_opt,
                b_opt: o.b_opt,
            })
            .collect();
        diagnostics::asymptotic_fit(&samples, t_hat).ok()
    } else {
        None
    };

    let nonaxi = |m: &solver::ModeRow| -> f64 { m.energies.iter().skip(1).sum() };
    Ok(DiagnosticsReport {
        stop: run.stop,
        tau_end: run.final_state.tau,
        t_end: run.final_state.t,
        lambda_end: run.final_state.lambda,
        t_hat,
        lyapunov,
        conditions,
        ode_residuals,
        gamma2_slope,
        majorants,
        fit,
        mode_energy_initial: run.modes.first().map(&nonaxi).unwrap_or(0.0),
        mode_energy_final: run.modes.last().map(&nonaxi).unwrap_or(0.0),
    })
}

fn write_run_outputs(run: &RunResult, cfg: &RunConfig, dir: &Path) -> Result<()> {
    report::write_text(&dir.join("trajectory.csv"), &report::trajectory_csv(run))?;
    report::write_text(&dir.join("modes.csv"), &report::modes_csv(run))?;
    let mut records = String::new();
    for d in &run.decomps {
        records.push_str(&report::decomposition_record(
            d.tau, d.t, d.lambda, &d.decomp, None,
        ));
        records.push('\n');
    }
    report::write_text(&dir.join("decompositions.txt"), &records)?;
    let mut opt_records = String::new();
    for o in &run.optimals {
        opt_records.push_str(&report::decomposition_record(
            o.tau,
            o.t,
            o.lambda_opt,
            &o.decomp,
            Some(&o.motion),
        ));
        opt_records.push('\n');
    }
    report::write_text(&dir.join("optimal_decompositions.txt"), &opt_records)?;
    report::write_text(
        &dir.join("optimal.csv"),
        &report::optimal_events_csv(&run.optimals),
    )?;
    for (i, s) in run.snapshots.iter().enumerate() {
        s.field
            .save(&dir.join(format!("snapshot_{:04}.nkpf", i)))?;
    }
    let rep = build_report(run, cfg)?;
    report::write_text(&dir.join("report.json"), &rep.to_json())?;
    Ok(())
}

pub fn cmd_simulate(args: &CliArgs) -> Result<()> {
    let cfg = effective_config(args)?;
    ensure_dir(&cfg.output_dir)?;
    let u0 = crate::initial::build_initial(
        &cfg.perturbation,
        cfg.solver.y_max,
        cfg.solver.n_y,
        cfg.solver.n_theta,
    )?;
    let consts = cfg.golden_constants()?;
    let assumptions = crate::initial::assumption_check(&u0, &cfg.perturbation, &consts)?;
    report::write_text(
        &cfg.output_dir.join("assumptions.csv"),
        &report::conditions_csv(&assumptions),
    )?;
    if cfg.enforce_assumptions && !assumptions.all_hold() {
        return Err(Error::InvalidConfig(format!(
            "initial data violates the assumption suite (worst margin {:.3})",
            assumptions.worst()
        )));
    }
    let run = solver::run(
        u0,
        Frame::standard(),
        &cfg.solver,
        cfg.perturbation.a0,
        cfg.perturbation.b0,
    )?;
    write_run_outputs(&run, &cfg, &cfg.output_dir)?;
    println!(
        "simulate: stop={:?} tau={} lambda={} rows={} decomps={} optimal_refits={}",
        run.stop,
        run.final_state.tau,
        run.final_state.lambda,
        run.rows.len(),
        run.decomps.len(),
        run.optimals.len()
    );
    Ok(())
}

pub fn cmd_decompose(args: &CliArgs) -> Result<()> {
    let cfg = effective_config(args)?;
    ensure_dir(&cfg.output_dir)?;
    let path = args.snapshot.as_ref().ok_or_else(|| {
        Error::InvalidConfig("decompose needs --snapshot PATH".into())
    })?;
    let v = GraphField::load(path)?;
    let d = decomp::fit_interior(&v, cfg.perturbation.a0, cfg.perturbation.b0)?;
    let record = report::decomposition_record(0.0, 0.0, 1.0, &d, None);
    print!("{record}");
    report::write_text(&cfg.output_dir.join("decomposition.txt"), &record)?;
    report::write_text(&cfg.output_dir.join("snapshot.csv"), &v.to_csv())?;
    Ok(())
}

pub fn cmd_spectrum(args: &CliArgs) -> Result<()> {
    let a = args.alpha.unwrap_or(0.5);
    println!("spectrum of L = H - a*Laplacian at a = {a}");
    println!("eigenvalue  multiplicity  eigenfunctions         meaning");
    println!(
        "{:>10}  {:>12}  {:<22} {}",
        format!("{}", -2.0 * a),
        1,
        "1",
        "rescale cylinder"
    );
    println!(
        "{:>10}  {:>12}  {:<22} {}",
        format!("{}", -a),
        3,
        "y, cos(th), sin(th)",
        "translate center of neck"
    );
    println!(
        "{:>10}  {:>12}  {:<22} {}",
        "0",
        3,
        "y^2-1/a, y cos, y sin",
        "shape neck; tilt cylinder"
    );
    let analytic = spectral::spectrum_l_flat(a, 8, 3, 10);
    println!("lowest analytic eigenvalues: {analytic:?}");
    let discrete = spectral::discretized_spectrum(a, 24, 2)?;
    let worst = analytic
        .iter()
        .take(7)
        .zip(discrete.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    println!("discretized truncation agrees to {worst:.2e} on the lowest 7 modes");
    Ok(())
}

pub fn cmd_propagator_test(args: &CliArgs) -> Result<()> {
    let cfg = effective_config(args)?;
    ensure_dir(&cfg.output_dir)?;
    let spec = OscillatorSpec::new(cfg.propagator_alpha, spectral::DEFAULT_N_HERMITE)?;
    let full = spectral::propagator_decay_experiment(&spec, 5.0, cfg.propagator_trials, cfg.seed)?;
    let weak =
        spectral::propagator_decay_experiment_weak(&spec, cfg.propagator_trials, cfg.seed + 1)?;
    let mut csv = report::decay_csv(&full);
    csv.push_str(&report::decay_csv(&weak)[report::decay_csv(&weak).find('\n').unwrap() + 1..]);
    report::write_text(&cfg.output_dir.join("propagator.csv"), &csv)?;
    let threshold_full = 0.9 * spec.alpha;
    let threshold_weak = 0.9 * spec.alpha / 10.0;
    let pass_full = full.worst_rate >= threshold_full;
    let pass_weak = weak.worst_rate >= threshold_weak;
    println!(
        "propagator ell=5:     worst rate {} (threshold {}) {}",
        full.worst_rate,
        threshold_full,
        if pass_full { "PASS" } else { "FAIL" }
    );
    println!(
        "propagator ell=11/10: worst rate {} (threshold {}) {}",
        weak.worst_rate,
        threshold_weak,
        if pass_weak { "PASS" } else { "FAIL" }
    );
    if !(pass_full && pass_weak) {
        return Err(Error::NoConvergence {
            what: "propagator decay experiment",
            iters: cfg.propagator_trials,
            residual: full.worst_rate.min(weak.worst_rate),
        });
    }
    Ok(())
}

pub fn cmd_check_assumptions(args: &CliArgs) -> Result<()> {
    let cfg = effective_config(args)?;
    ensure_dir(&cfg.output_dir)?;
    let u0 = crate::initial::build_initial(
        &cfg.perturbation,
        cfg.solver.y_max,
        cfg.solver.n_y,
        cfg.solver.n_theta,
    )?;
    let consts = cfg.golden_constants()?;
    let rep = crate::initial::assumption_check(&u0, &cfg.perturbation, &consts)?;
    println!("{:<16} {:>14} {:>14} {:>10}", "assumption", "measured", "bound", "margin");
    for m in &rep.margins {
        println!(
            "{:<16} {:>14.6e} {:>14.6e} {:>10.4} {}",
            m.name,
            m.measured,
            m.bound,
            m.margin,
            if m.margin <= 1.0 { "ok" } else { "VIOLATED" }
        );
    }
    report::write_text(
        &cfg.output_dir.join("assumptions.csv"),
        &report::conditions_csv(&rep),
    )?;
    println!("worst margin: {}", rep.worst());
    Ok(())
}

/// Rebuild diagnostics from a completed run directory (trajectory and
/// snapshots on disk).
pub fn cmd_report(args: &CliArgs) -> Result<()> {
    let cfg = effective_config(args)?;
    let dir = cfg.output_dir.clone();
    let clock = BetaClock::from_b0(cfg.perturbation.b0)?;

    // parameter history from trajectory.csv
    let text = std::fs::read_to_string(dir.join("trajectory.csv"))?;
    let mut params = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != report::TRAJECTORY_HEADER {
                return Err(Error::Format {
                    what: "trajectory.csv",
                    detail: "unexpected header".into(),
                });
            }
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.parse().unwrap_or(f64::NAN))
            .collect();
        if cols.len() != 12 {
            return Err(Error::Format {
                what: "trajectory.csv",
                detail: format!("row {} has {} columns", i, cols.len()),
            });
        }
        params.push(ParamSample {
            tau: cols[1],
            a: cols[3],
            b: cols[4],
            beta0: cols[5],
        });
    }
    let ode = diagnostics::ode_residuals(&params, &clock).unwrap_or_default();
    println!("report: {} trajectory samples, {} ODE residual rows", params.len(), ode.len());

    // ξ-equation consistency from stored snapshots when enough are present
    let mut snaps = Vec::new();
    let mut idx = 0;
    loop {
        let p = dir.join(format!("snapshot_{:04}.nkpf", idx));
        if !p.exists() {
            break;
        }
        snaps.push(GraphField::load(&p)?);
        idx += 1;
    }
    if snaps.len() >= 3 {
        let cadence = if cfg.solver.snapshot_interval > 0.0 {
            cfg.solver.snapshot_interval
        } else {
            1.0
        };
        let states: Result<Vec<DecomposedState>> = snaps
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = decomp::fit_interior(v, 0.5, cfg.perturbation.b0)?;
                Ok(DecomposedState {
                    tau: i as f64 * cadence,
                    v: v.clone(),
                    params: d.params,
                })
            })
            .collect();
        match states.and_then(|s| decomp::xi_evolution_residual(&s)) {
            Ok(reports) => {
                for r in &reports {
                    println!(
                        "xi residual at snapshot {}: weighted sup {}",
                        r.tau, r.weighted_sup
                    );
                }
            }
            Err(e) => println!("xi residual skipped: {e}"),
        }
    } else {
        println!("xi residual skipped: fewer than 3 snapshots on disk");
    }
    Ok(())
}

/// Entry point shared by the binary; returns the process exit code.
pub fn dispatch(argv: &[String]) -> i32 {
    let args = match parse_args(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{USAGE}");
            return 2;
        }
    };
    let result = match args.command.as_str() {
        "simulate" => cmd_simulate(&args),
        "decompose" => cmd_decompose(&args),
        "spectrum" => cmd_spectrum(&args),
        "propagator-test" => cmd_propagator_test(&args),
        "check-assumptions" => cmd_check_assumptions(&args),
        "report" => cmd_report(&args),
        other => {
            eprintln!("error: unknown command {other:?}");
            eprintln!("{USAGE}");
            return 2;
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            // machine-readable error record beside the human message
            let record = format!("{{\"error\": \"{}\"}}\n", e.to_string().replace('"', "'"));
            let dir = args
                .output_dir
                .clone()
                .or_else(|| std::env::var("NECKPINCH_OUT").ok().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let _ = std::fs::create_dir_all(&dir);
            let _ = std::fs::write(dir.join("error.json"), record);
            eprintln!("error: {e}");
            1
        }
    }
}
