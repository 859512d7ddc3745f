use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use mkdv_lab::dynamics::{solve_with, EquationSpec, SolveError, SolveOptions, Trajectory};
use mkdv_lab::experiments::{run_experiment, ExperimentError, ExperimentReport, Series};
use mkdv_lab::gauges::{apply_gauge, invert_gauge, GaugeKind, GaugeSpec};
use mkdv_lab::io::{self, IoError, TRAJECTORY_MANIFEST};
use mkdv_lab::norms::{fl_norm, mass, momentum, NormSpec};
use mkdv_lab::spectral::FourierState;
use serde_json::json;
use thiserror::Error;

use crate::config::{Command, ConfigError, GaugeRunConfig, InitialData, NormsConfig, RunConfig, SolveConfig};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Input(String),
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn default_out(cfg: &RunConfig) -> PathBuf {
    let mut dir = PathBuf::from("mkdv-lab-out").join(cfg.command.name());
    if let Some(name) = cfg.experiment_name() {
        dir.push(name);
    }
    dir
}

/// Writes `manifest.json` and `config.txt` describing a finished run.
fn write_manifest(dir: &Path, cfg: &RunConfig, started: f64, clock: Instant, status: &str) -> Result<(), RunError> {
    let manifest = json!({
        "tool": "mkdv-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.command.name(),
        "experiment": cfg.experiment_name(),
        "config": cfg.entries(),
        "status": status,
        "started_unix": started,
        "finished_unix": unix_now(),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
    });
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    std::fs::write(dir.join("config.txt"), cfg.to_config_text()).map_err(|source| IoError::Io {
        path: dir.join("config.txt"),
        source,
    })?;
    Ok(())
}

/// Runs a resolved configuration and returns the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32, RunError> {
    let started = unix_now();
    let clock = Instant::now();
    match &cfg.command {
        Command::Solve(c) => run_solve(cfg, c, started, clock),
        Command::Gauge(c) => run_gauge(cfg, c, started, clock),
        Command::Norms(c) => run_norms(cfg, c, started, clock),
        Command::Experiment(kind) => {
            let out = cfg.out.clone().unwrap_or_else(|| default_out(cfg));
            let (report, code, status) = match run_experiment(kind) {
                Ok(report) => {
                    let code = if report.all_passed() { EXIT_OK } else { EXIT_VERDICT };
                    (report, code, if code == EXIT_OK { "passed" } else { "verdict failure" })
                }
                Err(ExperimentError::Aborted { message, partial }) => {
                    log::error!("{message}");
                    (*partial, EXIT_NUMERICAL, "numerical abort")
                }
                Err(e) => return Err(RunError::Input(e.to_string())),
            };
            io::write_report(&out, &report)?;
            write_manifest(&out, cfg, started, clock, status)?;
            print_verdicts(cfg, &report, &out);
            Ok(code)
        }
    }
}

fn print_verdicts(cfg: &RunConfig, report: &ExperimentReport, out: &Path) {
    let summary = json!({
        "experiment": report.name,
        "all_passed": report.all_passed(),
        "verdicts": report.verdicts,
        "output": out.display().to_string(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summaries serialize"));
    if cfg.table {
        println!("{:<34} {:>6} {:>14} {:>3} {:>12}", "verdict", "result", "value", "", "threshold");
        for v in &report.verdicts {
            println!(
                "{:<34} {:>6} {:>14.6e} {:>3} {:>12.4e}",
                v.name,
                if v.passed { "PASS" } else { "FAIL" },
                v.value,
                v.comparison.to_string(),
                v.threshold
            );
        }
    }
}

fn initial_state(c: &SolveConfig) -> Result<FourierState, RunError> {
    match &c.ic {
        InitialData::Preset(p) => p.build(c.modes).map_err(|e| RunError::Input(e.to_string())),
        InitialData::File(path) => {
            let state = io::read_state(path)?;
            if state.mode_cap() > c.modes {
                return Err(RunError::Input(format!(
                    "{} has modes up to {}, above modes = {}",
                    path.display(),
                    state.mode_cap(),
                    c.modes
                )));
            }
            Ok(state.with_mode_cap(c.modes).with_time(0.0))
        }
    }
}

fn trajectory_report(name: &str, cfg: &RunConfig, traj: &Trajectory) -> ExperimentReport {
    let mut report = ExperimentReport::new(name, cfg.entries(), None);
    let series = |label: &str, f: fn(&FourierState) -> f64| {
        Series::new(label, "t", label, traj.states().iter().map(|s| (s.time(), f(s))).collect())
    };
    let m = series("mass", mass);
    let p = series("momentum", momentum);
    let m0 = m.points[0].1;
    let p0 = p.points[0].1;
    let mass_drift = m.ys().iter().map(|v| (v - m0).abs()).fold(0.0, f64::max) / m0.max(f64::MIN_POSITIVE);
    let momentum_drift = p.ys().iter().map(|v| (v - p0).abs()).fold(0.0, f64::max);
    report.scalar("relative_mass_drift", mass_drift);
    report.scalar("momentum_drift", momentum_drift);
    report.push_series(m);
    report.push_series(p);
    report.push_series(Series::new(
        "fl_half_2",
        "t",
        "FL^{1/2,2} norm",
        traj.states().iter().map(|s| (s.time(), fl_norm(s, NormSpec::H_HALF))).collect(),
    ));
    report
}

fn run_solve(cfg: &RunConfig, c: &SolveConfig, started: f64, clock: Instant) -> Result<i32, RunError> {
    let ic = initial_state(c)?;
    let options = SolveOptions {
        sample_every: c.sample_every,
        ..SolveOptions::default()
    };
    let out = cfg.out.clone().unwrap_or_else(|| default_out(cfg));
    let (traj, code, status) = match solve_with(&ic, EquationSpec::new(c.variant, c.sign), c.t_end, c.dt, &options) {
        Ok(traj) => (traj, EXIT_OK, "completed"),
        Err(SolveError::InvalidInput(msg)) => return Err(RunError::Input(msg)),
        Err(e) => {
            log::error!("{e}");
            let partial = e.partial().expect("aborts carry a partial trajectory").clone();
            (partial, EXIT_NUMERICAL, "numerical abort")
        }
    };
    io::write_trajectory(&out.join("states"), &traj)?;
    let report = trajectory_report("solve", cfg, &traj);
    io::write_report(&out, &report)?;
    write_manifest(&out, cfg, started, clock, status)?;
    println!("{}", serde_json::to_string_pretty(&json!({
        "status": status,
        "slices": traj.len(),
        "final_time": traj.last().time(),
        "scalars": report.scalars,
        "output": out.display().to_string(),
    })).expect("summaries serialize"));
    Ok(code)
}

/// Accepts either a directory holding `trajectory.json` or a run directory with `states/`.
fn trajectory_dir(input: &Path) -> PathBuf {
    if input.join(TRAJECTORY_MANIFEST).exists() {
        input.to_owned()
    } else {
        input.join("states")
    }
}

fn run_gauge(cfg: &RunConfig, c: &GaugeRunConfig, started: f64, clock: Instant) -> Result<i32, RunError> {
    let traj = io::read_trajectory(&trajectory_dir(&c.input))?;
    let sign = c.sign.unwrap_or(traj.equation().sign);
    let scalar = c.scalar.unwrap_or_else(|| match c.gauge {
        GaugeKind::G1 => mass(traj.initial()),
        GaugeKind::G2 => momentum(traj.initial()),
    });
    let spec = GaugeSpec::new(c.gauge, sign, scalar).map_err(|e| RunError::Input(e.to_string()))?;
    let gauged = if c.inverse {
        invert_gauge(&traj, spec).map_err(|e| RunError::Input(e.to_string()))?
    } else {
        apply_gauge(&traj, spec)
    };
    let out = cfg.out.clone().unwrap_or_else(|| default_out(cfg));
    io::write_trajectory(&out.join("states"), &gauged)?;
    let mut report = trajectory_report("gauge", cfg, &gauged);
    report.scalar("gauge_scalar", scalar);
    io::write_report(&out, &report)?;
    write_manifest(&out, cfg, started, clock, "completed")?;
    println!("{}", serde_json::to_string_pretty(&json!({
        "gauge": spec,
        "inverse": c.inverse,
        "equation": gauged.equation().variant.to_string(),
        "output": out.display().to_string(),
    })).expect("summaries serialize"));
    Ok(EXIT_OK)
}

fn run_norms(cfg: &RunConfig, c: &NormsConfig, started: f64, clock: Instant) -> Result<i32, RunError> {
    let state = io::read_state(&c.state)?;
    let mut rows = Vec::new();
    for &s in &c.s {
        for &p in &c.p {
            let spec = NormSpec::new(s, p).map_err(|e| RunError::Input(e.to_string()))?;
            rows.push((s, p, fl_norm(&state, spec)));
        }
    }
    let doc = json!({
        "state": c.state.display().to_string(),
        "mode_cap": state.mode_cap(),
        "mass": mass(&state),
        "momentum": momentum(&state),
        "fl_norms": rows.iter().map(|(s, p, v)| json!({"s": s, "p": p, "value": v})).collect::<Vec<_>>(),
    });
    if cfg.table {
        println!("{:>8} {:>8} {:>24}", "s", "p", "FL^{s,p}");
        for (s, p, v) in &rows {
            println!("{s:>8} {p:>8} {v:>24.16e}");
        }
    } else {
        println!("{}", serde_json::to_string_pretty(&doc).expect("norm tables serialize"));
    }
    if let Some(out) = &cfg.out {
        io::write_json(&out.join("norms.json"), &doc)?;
        write_manifest(out, cfg, started, clock, "completed")?;
    }
    Ok(EXIT_OK)
}
