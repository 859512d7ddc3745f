//! `mkdv-lab`: solve, gauge, measure and run experiments from the command line.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical abort,
//! 3 at least one verdict failed.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_config, read_config_file, ConfigError, Layer};
use run::{run, RunError, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "mkdv-lab", version, about = "Pseudo-spectral laboratory for the complex mKdV family on the torus")]
#[command(allow_negative_numbers = true)]
struct Cli {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also print human-readable tables.
    #[arg(long, global = true)]
    table: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Integrate one equation and write the trajectory.
    Solve(SolveArgs),
    /// Apply or invert a gauge on a stored trajectory.
    Gauge(GaugeArgs),
    /// FL^{s,p} norms of a stored state.
    Norms(NormsArgs),
    /// Run a named experiment; extra `key=value` arguments set its parameters.
    Experiment {
        name: String,
        #[arg(value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct SolveArgs {
    /// mkdv, mkdv1 or mkdv2
    #[arg(long)]
    eq: Option<String>,
    /// +1 or -1
    #[arg(long)]
    sign: Option<String>,
    /// Mode cap M
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "T")]
    t_end: Option<String>,
    /// Preset such as `plane_wave:5,1,0.5`
    #[arg(long)]
    ic: Option<String>,
    /// Initial state stored as CSV or JSON
    #[arg(long = "ic-file")]
    ic_file: Option<String>,
    #[arg(long = "sample-every")]
    sample_every: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct GaugeArgs {
    /// Trajectory directory
    #[arg(long)]
    input: Option<String>,
    /// G1 or G2
    #[arg(long)]
    gauge: Option<String>,
    #[arg(long)]
    inverse: bool,
    /// Frozen mass (G1) or momentum (G2); defaults to the value at the first slice
    #[arg(long)]
    scalar: Option<String>,
    #[arg(long)]
    sign: Option<String>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct NormsArgs {
    /// State stored as CSV or JSON
    #[arg(long)]
    state: Option<String>,
    /// Comma-separated regularities
    #[arg(long)]
    s: Option<String>,
    /// Comma-separated exponents
    #[arg(long)]
    p: Option<String>,
}

fn flag_layer(cli: &Cli) -> Result<(&'static str, Option<&str>, Layer), ConfigError> {
    let mut layer = Layer::default();
    let mut put = |key: &str, value: &Option<String>| {
        if let Some(v) = value {
            layer.push(key, v.clone());
        }
    };
    let (sub, name) = match &cli.command {
        Sub::Solve(a) => {
            put("eq", &a.eq);
            put("sign", &a.sign);
            put("modes", &a.modes);
            put("dt", &a.dt);
            put("T", &a.t_end);
            put("ic", &a.ic);
            put("ic_file", &a.ic_file);
            put("sample_every", &a.sample_every);
            ("solve", None)
        }
        Sub::Gauge(a) => {
            put("input", &a.input);
            put("gauge", &a.gauge);
            put("scalar", &a.scalar);
            put("sign", &a.sign);
            if a.inverse {
                layer.push("inverse", "true");
            }
            ("gauge", None)
        }
        Sub::Norms(a) => {
            put("state", &a.state);
            put("s", &a.s);
            put("p", &a.p);
            ("norms", None)
        }
        Sub::Experiment { name, params } => {
            for p in params {
                let (k, v) = p.split_once('=').ok_or_else(|| ConfigError::Malformed {
                    key: p.clone(),
                    value: String::new(),
                    expected: "a `key=value` argument".into(),
                })?;
                layer.push(k.trim(), v.trim());
            }
            ("experiment", Some(name.as_str()))
        }
    };
    if let Some(out) = &cli.out {
        layer.push("out", out.display().to_string());
    }
    if cli.table {
        layer.push("table", "true");
    }
    Ok((sub, name, layer))
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("MKDV_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| ConfigError::Malformed {
        key: "MKDV_LAB_THREADS".into(),
        value: raw.clone(),
        expected: "a positive integer".into(),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))
}

fn main_inner(cli: &Cli) -> Result<i32, RunError> {
    configure_threads()?;
    let file = cli.config.as_deref().map(read_config_file).transpose()?;
    let (sub, name, flags) = flag_layer(cli)?;
    let cfg = parse_config(sub, name, file.as_ref(), &flags)?;
    log::info!("resolved configuration:\n{}", cfg.to_config_text());
    run(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap reports usage errors with code 2, which is reserved for numerical aborts
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let code = match main_inner(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_CONFIG as u8))
}
