//! Resolved run configuration.
//!
//! Every setting is a flat `key = value` pair. A config file supplies a base
//! layer, command-line flags override it, and the result is parsed into a
//! typed [`RunConfig`]. [`RunConfig::to_config_text`] renders the resolved
//! settings back in the file format.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mkdv_lab::dynamics::{Sign, Variant};
use mkdv_lab::experiments::{ExperimentKind, IcPreset, ParamError, ParamValue};
use mkdv_lab::gauges::GaugeKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{key}` for {context}")]
    UnknownKey { key: String, context: String },
    #[error("malformed value `{value}` for `{key}`: expected {expected}")]
    Malformed {
        key: String,
        value: String,
        expected: String,
    },
    #[error("missing required field `{key}` for {context}")]
    Missing { key: String, context: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown experiment `{0}` (expected one of: {list})", list = ExperimentKind::NAMES.join(", "))]
    UnknownExperiment(String),
}

impl From<ParamError> for ConfigError {
    fn from(e: ParamError) -> Self {
        match e {
            ParamError::UnknownKey { key, context } => ConfigError::UnknownKey { key, context },
            ParamError::Malformed { key, value, expected } => ConfigError::Malformed { key, value, expected },
            ParamError::UnknownExperiment(name) => ConfigError::UnknownExperiment(name),
        }
    }
}

/// Ordered `key = value` entries, later entries win.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layer(pub Vec<(String, String)>);

impl Layer {
    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.0.push((key.to_owned(), value.into()));
    }
}

/// Parses the flat file format: `key = value` lines, `#` starts a comment.
pub fn parse_config_text(text: &str, path: &Path) -> Result<Layer, ConfigError> {
    let mut layer = Layer::default();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(head, _)| head).trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| ConfigError::Syntax {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(syntax(format!("bad key `{key}`")));
        }
        if let Some(first) = seen.insert(key.to_owned(), i + 1) {
            return Err(syntax(format!("`{key}` already set on line {first}")));
        }
        layer.push(key, value);
    }
    Ok(layer)
}

pub fn read_config_file(path: &Path) -> Result<Layer, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_config_text(&text, path)
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Preset(IcPreset),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub variant: Variant,
    pub sign: Sign,
    pub modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub ic: InitialData,
    pub sample_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugeRunConfig {
    pub input: PathBuf,
    pub gauge: GaugeKind,
    pub inverse: bool,
    /// Frozen mass or momentum; taken from the initial slice when absent.
    pub scalar: Option<f64>,
    /// Overrides the sign recorded with the trajectory.
    pub sign: Option<Sign>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormsConfig {
    pub state: PathBuf,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Solve(SolveConfig),
    Gauge(GaugeRunConfig),
    Norms(NormsConfig),
    Experiment(ExperimentKind),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Gauge(_) => "gauge",
            Command::Norms(_) => "norms",
            Command::Experiment(_) => "experiment",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub out: Option<PathBuf>,
    /// Print human-readable tables in addition to the machine output.
    pub table: bool,
}

const COMMON_KEYS: &[&str] = &["out", "table"];
const SOLVE_KEYS: &[&str] = &["eq", "sign", "modes", "dt", "T", "ic", "ic_file", "sample_every"];
const GAUGE_KEYS: &[&str] = &["input", "gauge", "inverse", "scalar", "sign"];
const NORMS_KEYS: &[&str] = &["state", "s", "p"];

/// Settings still to be consumed while building a [`RunConfig`].
struct Pending {
    values: BTreeMap<String, String>,
    context: String,
}

impl Pending {
    fn new(layers: &[&Layer], allowed: &[&str], context: String) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for layer in layers {
            for (k, v) in &layer.0 {
                if !allowed.contains(&k.as_str()) && !COMMON_KEYS.contains(&k.as_str()) {
                    return Err(ConfigError::UnknownKey {
                        key: k.clone(),
                        context,
                    });
                }
                values.insert(k.clone(), v.clone());
            }
        }
        Ok(Self { values, context })
    }

    fn optional<T: ParamValue>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(value) => T::parse_param(&value).map(Some).map_err(|expected| ConfigError::Malformed {
                key: key.into(),
                value,
                expected,
            }),
        }
    }

    fn required<T: ParamValue>(&mut self, key: &str) -> Result<T, ConfigError> {
        self.optional(key)?.ok_or_else(|| ConfigError::Missing {
            key: key.into(),
            context: self.context.clone(),
        })
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.values.remove(key).map(PathBuf::from)
    }
}

fn positive(key: &str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ConfigError::Invalid(format!("`{key}` must be positive, got {value}")))
    }
}

/// Builds the run configuration for `subcommand` from a file layer and a flag layer.
///
/// `experiment` names the experiment when `subcommand` is `experiment`.
pub fn parse_config(
    subcommand: &str,
    experiment: Option<&str>,
    file: Option<&Layer>,
    flags: &Layer,
) -> Result<RunConfig, ConfigError> {
    let empty = Layer::default();
    let layers = [file.unwrap_or(&empty), flags];
    let (command, mut rest) = match subcommand {
        "solve" => {
            let mut p = Pending::new(&layers, SOLVE_KEYS, "solve".into())?;
            let ic = match (p.optional::<IcPreset>("ic")?, p.path("ic_file")) {
                (Some(_), Some(_)) => return Err(ConfigError::Invalid("set either `ic` or `ic_file`, not both".into())),
                (Some(preset), None) => InitialData::Preset(preset),
                (None, Some(path)) => InitialData::File(path),
                (None, None) => {
                    return Err(ConfigError::Missing {
                        key: "ic".into(),
                        context: "solve".into(),
                    })
                }
            };
            let cfg = SolveConfig {
                variant: p.required("eq")?,
                sign: p.optional("sign")?.unwrap_or(Sign::Plus),
                modes: p.required("modes")?,
                dt: positive("dt", p.required("dt")?)?,
                t_end: positive("T", p.required("T")?)?,
                ic,
                sample_every: p.optional("sample_every")?.unwrap_or(1),
            };
            if cfg.sample_every == 0 {
                return Err(ConfigError::Invalid("`sample_every` must be at least 1".into()));
            }
            (Command::Solve(cfg), p)
        }
        "gauge" => {
            let mut p = Pending::new(&layers, GAUGE_KEYS, "gauge".into())?;
            let input = p.path("input").ok_or_else(|| ConfigError::Missing {
                key: "input".into(),
                context: "gauge".into(),
            })?;
            let cfg = GaugeRunConfig {
                input,
                gauge: p.required("gauge")?,
                inverse: p.optional("inverse")?.unwrap_or(false),
                scalar: p.optional("scalar")?,
                sign: p.optional("sign")?,
            };
            (Command::Gauge(cfg), p)
        }
        "norms" => {
            let mut p = Pending::new(&layers, NORMS_KEYS, "norms".into())?;
            let state = p.path("state").ok_or_else(|| ConfigError::Missing {
                key: "state".into(),
                context: "norms".into(),
            })?;
            let cfg = NormsConfig {
                state,
                s: p.optional("s")?.unwrap_or_else(|| vec![0.5]),
                p: p.optional("p")?.unwrap_or_else(|| vec![2.0]),
            };
            if cfg.s.is_empty() || cfg.p.is_empty() {
                return Err(ConfigError::Invalid("`s` and `p` need at least one value".into()));
            }
            if let Some(bad) = cfg.p.iter().find(|&&p| p < 1.0) {
                return Err(ConfigError::Invalid(format!("`p` must be at least 1, got {bad}")));
            }
            (Command::Norms(cfg), p)
        }
        "experiment" => {
            let name = experiment.ok_or_else(|| ConfigError::Missing {
                key: "name".into(),
                context: "experiment".into(),
            })?;
            let mut kind = ExperimentKind::from_name(name)?;
            let context = format!("experiment {name}");
            let p = Pending::new(&layers, kind.keys(), context)?;
            let mut rest = Pending {
                values: BTreeMap::new(),
                context: p.context.clone(),
            };
            for (k, v) in p.values {
                if COMMON_KEYS.contains(&k.as_str()) {
                    rest.values.insert(k, v);
                } else {
                    kind.set(&k, &v)?;
                }
            }
            kind.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            (Command::Experiment(kind), rest)
        }
        other => return Err(ConfigError::Invalid(format!("unknown subcommand `{other}`"))),
    };
    let out = rest.path("out");
    let table = rest.optional("table")?.unwrap_or(false);
    debug_assert!(rest.values.is_empty(), "unconsumed keys {:?}", rest.values);
    Ok(RunConfig { command, out, table })
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| v.render()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Fully resolved settings, including defaults.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match &self.command {
            Command::Solve(c) => {
                m.insert("eq".into(), c.variant.render());
                m.insert("sign".into(), c.sign.render());
                m.insert("modes".into(), c.modes.render());
                m.insert("dt".into(), c.dt.render());
                m.insert("T".into(), c.t_end.render());
                match &c.ic {
                    InitialData::Preset(p) => m.insert("ic".into(), p.render()),
                    InitialData::File(path) => m.insert("ic_file".into(), path.display().to_string()),
                };
                m.insert("sample_every".into(), c.sample_every.render());
            }
            Command::Gauge(c) => {
                m.insert("input".into(), c.input.display().to_string());
                m.insert("gauge".into(), c.gauge.render());
                m.insert("inverse".into(), c.inverse.render());
                if let Some(v) = c.scalar {
                    m.insert("scalar".into(), v.render());
                }
                if let Some(s) = c.sign {
                    m.insert("sign".into(), s.render());
                }
            }
            Command::Norms(c) => {
                m.insert("state".into(), c.state.display().to_string());
                m.insert("s".into(), list(&c.s));
                m.insert("p".into(), list(&c.p));
            }
            Command::Experiment(kind) => m.extend(kind.params().finish()),
        }
        if let Some(out) = &self.out {
            m.insert("out".into(), out.display().to_string());
        }
        m.insert("table".into(), self.table.render());
        m
    }

    pub fn experiment_name(&self) -> Option<&'static str> {
        match &self.command {
            Command::Experiment(kind) => Some(kind.name()),
            _ => None,
        }
    }

    /// The resolved settings in the config-file format.
    pub fn to_config_text(&self) -> String {
        let mut text = format!("# mkdv-lab {}", self.command.name());
        if let Some(name) = self.experiment_name() {
            text.push(' ');
            text.push_str(name);
        }
        text.push('\n');
        for (k, v) in self.entries() {
            text.push_str(&format!("{k} = {v}\n"));
        }
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Layer {
        Layer(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    fn solve_flags() -> Layer {
        flags(&[("eq", "mkdv2"), ("sign", "+1"), ("modes", "64"), ("dt", "1e-4"), ("T", "0.5"), ("ic", "plane_wave:5,1,0.5")])
    }

    #[test]
    fn solve_example_resolves() {
        let cfg = parse_config("solve", None, None, &solve_flags()).unwrap();
        let Command::Solve(s) = &cfg.command else { panic!() };
        assert_eq!(s.variant, Variant::Mkdv2);
        assert_eq!(s.modes, 64);
        assert_eq!(s.dt, 1e-4);
        assert_eq!(
            s.ic,
            InitialData::Preset(IcPreset::PlaneWave {
                mode: 5,
                amplitude: 1.0,
                s: 0.5
            })
        );
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config_text("# base\ndt = 1e-3  # coarse\nmodes=64\n", Path::new("f")).unwrap();
        let mut f = solve_flags();
        f.0.retain(|(k, _)| k != "modes");
        let cfg = parse_config("solve", None, Some(&file), &f).unwrap();
        let Command::Solve(s) = cfg.command else { panic!() };
        assert_eq!(s.dt, 1e-4);
        assert_eq!(s.modes, 64);
    }

    #[test]
    fn distinct_errors() {
        let mut f = solve_flags();
        f.push("modes", "-3");
        assert!(matches!(parse_config("solve", None, None, &f), Err(ConfigError::Malformed { .. })));
        let mut f = solve_flags();
        f.push("bogus", "1");
        assert!(matches!(parse_config("solve", None, None, &f), Err(ConfigError::UnknownKey { .. })));
        let mut f = solve_flags();
        f.0.retain(|(k, _)| k != "dt");
        assert!(matches!(parse_config("solve", None, None, &f), Err(ConfigError::Missing { .. })));
        let mut f = solve_flags();
        f.push("dt", "-1e-3");
        assert!(matches!(parse_config("solve", None, None, &f), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            parse_config("experiment", Some("nope"), None, &Layer::default()),
            Err(ConfigError::UnknownExperiment(_))
        ));
        assert!(matches!(
            parse_config("experiment", Some("gauge"), None, &flags(&[("modes", "x")])),
            Err(ConfigError::Malformed { .. })
        ));
    }

    #[test]
    fn file_syntax_errors() {
        assert!(matches!(parse_config_text("dt 1e-3\n", Path::new("f")), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_config_text("dt = 1\n\ndt = 2\n", Path::new("f")),
            Err(ConfigError::Syntax { line: 3, .. })
        ));
    }

    #[test]
    fn config_text_round_trips() {
        let mut f = solve_flags();
        f.push("out", "runs/a");
        let configs = [
            parse_config("solve", None, None, &f).unwrap(),
            parse_config("norms", None, None, &flags(&[("state", "s.csv"), ("s", "0,0.5"), ("p", "2,3.5")])).unwrap(),
            parse_config("gauge", None, None, &flags(&[("input", "d"), ("gauge", "g2"), ("scalar", "0.1")])).unwrap(),
        ];
        for cfg in configs {
            let text = cfg.to_config_text();
            let layer = parse_config_text(&text, Path::new("echo")).unwrap();
            assert_eq!(parse_config(cfg.command.name(), None, Some(&layer), &Layer::default()).unwrap(), cfg);
        }
        for name in ExperimentKind::NAMES {
            let cfg = parse_config("experiment", Some(name), None, &Layer::default()).unwrap();
            let layer = parse_config_text(&cfg.to_config_text(), Path::new("echo")).unwrap();
            assert_eq!(parse_config("experiment", Some(name), Some(&layer), &Layer::default()).unwrap(), cfg);
        }
    }
}
