use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::presets::IcPreset;
use super::report::Params;
use super::ExperimentError;
use crate::dynamics::{Sign, Variant};
use crate::gauges::GaugeKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("unknown key `{key}` for {context}")]
    UnknownKey { key: String, context: String },
    #[error("malformed value `{value}` for `{key}`: expected {expected}")]
    Malformed {
        key: String,
        value: String,
        expected: String,
    },
    #[error("unknown experiment `{0}` (expected one of: {list})", list = ExperimentKind::NAMES.join(", "))]
    UnknownExperiment(String),
}

/// Text form of a configuration value.
pub trait ParamValue: Sized {
    fn parse_param(text: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! numeric_param {
    ($($t:ty => $what:literal),*) => {$(
        impl ParamValue for $t {
            fn parse_param(text: &str) -> Result<Self, String> {
                text.trim().parse::<$t>().map_err(|_| $what.to_string())
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

numeric_param!(usize => "a non-negative integer", u64 => "a non-negative integer", u32 => "a non-negative integer", i64 => "an integer");

impl ParamValue for f64 {
    fn parse_param(text: &str) -> Result<Self, String> {
        text.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| "a finite number".to_string())
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

impl ParamValue for bool {
    fn parse_param(text: &str) -> Result<Self, String> {
        match text.trim() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err("true or false".into()),
        }
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

macro_rules! textual_param {
    ($($t:ty),*) => {$(
        impl ParamValue for $t {
            fn parse_param(text: &str) -> Result<Self, String> {
                text.parse::<$t>().map_err(|e| e.to_string())
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

textual_param!(Sign, Variant, NRule, GaugeKind);

impl ParamValue for IcPreset {
    fn parse_param(text: &str) -> Result<Self, String> {
        text.parse::<IcPreset>().map_err(|e| e.to_string())
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

impl<T: ParamValue> ParamValue for Vec<T> {
    fn parse_param(text: &str) -> Result<Self, String> {
        if text.trim().is_empty() {
            return Ok(Vec::new());
        }
        text.split(',')
            .map(T::parse_param)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("a comma-separated list of {e}"))
    }

    fn render(&self) -> String {
        self.iter().map(T::render).collect::<Vec<_>>().join(",")
    }
}

/// Rule for picking the plane-wave frequency `N_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NRule {
    /// Smallest `N` with `t_n ≤ 1/n`.
    Min,
    Fixed(u64),
}

impl fmt::Display for NRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NRule::Min => f.write_str("min"),
            NRule::Fixed(n) => write!(f, "fixed:{n}"),
        }
    }
}

impl FromStr for NRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "min" => Ok(NRule::Min),
            other => other
                .strip_prefix("fixed:")
                .and_then(|n| n.parse::<u64>().ok())
                .filter(|n| *n >= 1)
                .map(NRule::Fixed)
                .ok_or_else(|| "min or fixed:<N>".to_string()),
        }
    }
}

/// Flat key/value access shared by every experiment configuration.
pub trait ExperimentConfig {
    const NAME: &'static str;
    const KEYS: &'static [&'static str];
    fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError>;
    fn params(&self) -> Params;
}

macro_rules! experiment_config {
    (
        $(#[$meta:meta])*
        $name:ident = $label:literal {
            $($(#[$fmeta:meta])* $field:ident : $ty:ty = $default:expr => $key:literal,)*
        }
    ) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            $($(#[$fmeta])* pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        impl ExperimentConfig for $name {
            const NAME: &'static str = $label;
            const KEYS: &'static [&'static str] = &[$($key),*];

            fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
                match key {
                    $($key => {
                        self.$field = <$ty as ParamValue>::parse_param(value).map_err(|expected| {
                            ParamError::Malformed { key: key.into(), value: value.into(), expected }
                        })?;
                    })*
                    _ => {
                        return Err(ParamError::UnknownKey {
                            key: key.into(),
                            context: format!("experiment {}", $label),
                        })
                    }
                }
                Ok(())
            }

            fn params(&self) -> Params {
                Params::new()$(.set($key, self.$field.render()))*
            }
        }
    };
}

fn preset(text: &str) -> IcPreset {
    text.parse().expect("default presets parse")
}

experiment_config! {
    ConservationConfig = "conservation" {
        variant: Variant = Variant::Mkdv2 => "eq",
        sign: Sign = Sign::Plus => "sign",
        ic: IcPreset = preset("random_smooth:0.5,1") => "ic",
        t_end: f64 = 1.0 => "T",
        dt: f64 = 5e-4 => "dt",
        modes: usize = 32 => "modes",
        sample_every: usize = 10 => "sample_every",
        thr_mass_drift: f64 = 1e-8 => "thr_mass_drift",
        thr_momentum_drift: f64 = 1e-8 => "thr_momentum_drift",
    }
}

experiment_config! {
    GaugeConfig = "gauge" {
        ic: IcPreset = preset("random_smooth:0.5,1") => "ic",
        sign: Sign = Sign::Plus => "sign",
        t_end: f64 = 0.5 => "T",
        dt: f64 = 5e-4 => "dt",
        modes: usize = 32 => "modes",
        sample_every: usize = 10 => "sample_every",
        thr_gauge: f64 = 1e-6 => "thr_gauge",
    }
}

experiment_config! {
    NonexistenceConfig = "nonexistence" {
        s: f64 = 0.5 => "s",
        p: f64 = 3.0 => "p",
        alpha: f64 = 0.9 => "alpha",
        schedule: Vec<usize> = vec![32, 64, 128, 256] => "schedule",
        t_end: f64 = 1.0 => "T",
        dt: f64 = 2e-5 => "dt",
        modes: usize = 512 => "modes",
        sign: Sign = Sign::Plus => "sign",
        sample_every: usize = 50 => "sample_every",
        /// Spatial mode of the test function `w(t) e^{i k x}`.
        test_mode: i64 = 1 => "test_mode",
        /// Run only the real-data control.
        symmetric: bool = false => "symmetric",
        thr_shrink: f64 = 4.0 => "thr_shrink",
        thr_u_floor: f64 = 0.1 => "thr_u_floor",
        thr_pairing: f64 = 0.5 => "thr_pairing",
        thr_control: f64 = 1e-12 => "thr_control",
        thr_momentum_flag: f64 = 1.0 => "thr_momentum_flag",
    }
}

experiment_config! {
    IllposednessConfig = "illposedness" {
        s: f64 = 0.25 => "s",
        p: f64 = 2.0 => "p",
        n_list: Vec<u32> = vec![2, 4, 8, 16] => "n_list",
        n_rule: NRule = NRule::Min => "n_rule",
        sign: Sign = Sign::Plus => "sign",
        /// Target nonlinear phase advance per step.
        phase_step: f64 = 0.01 => "phase_step",
        exact_max_mode: u64 = 1000 => "exact_max_mode",
        thr_distance: f64 = 1.9 => "thr_distance",
        thr_agree: f64 = 1e-6 => "thr_agree",
        thr_exact: f64 = 1e-8 => "thr_exact",
        thr_inverse_n: f64 = 0.05 => "thr_inverse_n",
        thr_tn: f64 = 1.0 => "thr_tn",
        thr_stray_modes: f64 = 0.0 => "thr_stray_modes",
    }
}

experiment_config! {
    RandomMomentumConfig = "random_momentum" {
        samples: usize = 10_000 => "samples",
        modes: usize = 1000 => "modes",
        seed: u64 = 1 => "seed",
        real_only: bool = false => "real_only",
        thr_standard_errors: f64 = 4.0 => "thr_standard_errors",
        thr_real_zero: f64 = 0.0 => "thr_real_zero",
    }
}

experiment_config! {
    EnergyDriftConfig = "energy_drift" {
        ic: IcPreset = preset("gaussian_bump:0.3,0.5") => "ic",
        schedule: Vec<usize> = vec![8, 16, 32, 64] => "schedule",
        t_end: f64 = 1.0 => "T",
        dt: f64 = 1e-3 => "dt",
        modes: usize = 128 => "modes",
        sign: Sign = Sign::Plus => "sign",
        sample_every: usize = 10 => "sample_every",
        noise_floor: f64 = 1e-13 => "noise_floor",
        thr_slope: f64 = -0.1 => "thr_slope",
    }
}

experiment_config! {
    AprioriConfig = "apriori" {
        s: f64 = 0.6 => "s",
        p: f64 = 3.0 => "p",
        ic: IcPreset = preset("random_smooth:0.5,3") => "ic",
        amplitudes: Vec<f64> = vec![0.25, 0.5, 1.0, 2.0] => "amplitudes",
        variant: Variant = Variant::Mkdv2 => "eq",
        sign: Sign = Sign::Plus => "sign",
        t_end: f64 = 0.5 => "T",
        dt: f64 = 1e-3 => "dt",
        modes: usize = 64 => "modes",
        sample_every: usize = 10 => "sample_every",
        thr_growth: f64 = 2.0 => "thr_growth",
        thr_member_failures: f64 = 0.0 => "thr_member_failures",
    }
}

experiment_config! {
    MultiplierConfig = "multiplier" {
        s_list: Vec<f64> = vec![0.5, 0.75] => "s_list",
        p_list: Vec<f64> = vec![2.0, 8.0] => "p_list",
        n_list: Vec<i64> = vec![0, 32, -32, 256, -256] => "n_list",
        k_list: Vec<u64> = vec![64, 128, 256, 512] => "k_list",
        /// Number of trailing `K` doublings that must change by less than `thr_stab`.
        stab_doublings: usize = 2 => "stab_doublings",
        thr_stab: f64 = 0.05 => "thr_stab",
    }
}

fn positive(name: &str, v: f64) -> Result<(), ExperimentError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ExperimentError::Invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<(), ExperimentError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(ExperimentError::Invalid(format!("{name} must be at least 1")))
    }
}

fn schedule_ok(schedule: &[usize], modes: usize, min_len: usize) -> Result<(), ExperimentError> {
    if schedule.len() < min_len || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Invalid(format!(
            "schedule must be strictly increasing with at least {min_len} entries, got {schedule:?}"
        )));
    }
    match schedule.iter().find(|&&n| n > modes) {
        Some(n) => Err(ExperimentError::Invalid(format!("schedule entry {n} exceeds the mode cap {modes}"))),
        None => Ok(()),
    }
}

fn solve_ok(t_end: f64, dt: f64, modes: usize, sample_every: usize) -> Result<(), ExperimentError> {
    positive("T", t_end)?;
    positive("dt", dt)?;
    at_least_one("modes", modes)?;
    at_least_one("sample_every", sample_every)
}

impl ConservationConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        solve_ok(self.t_end, self.dt, self.modes, self.sample_every)
    }
}

impl GaugeConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        solve_ok(self.t_end, self.dt, self.modes, self.sample_every)
    }
}

impl NonexistenceConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        solve_ok(self.t_end, self.dt, self.modes, self.sample_every)?;
        schedule_ok(&self.schedule, self.modes, 4)?;
        if self.schedule[0] == 0 {
            return Err(ExperimentError::Invalid("schedule entries must be positive".into()));
        }
        positive("p", self.p)
    }
}

impl IllposednessConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.s < 0.5) {
            return Err(ExperimentError::Invalid(format!("needs s < 1/2, got {}", self.s)));
        }
        positive("p", self.p)?;
        positive("phase_step", self.phase_step)?;
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(ExperimentError::Invalid("n_list must be non-empty with entries ≥ 1".into()));
        }
        Ok(())
    }
}

impl RandomMomentumConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.samples < 100 {
            return Err(ExperimentError::Invalid(format!("needs at least 100 samples, got {}", self.samples)));
        }
        at_least_one("modes", self.modes)
    }
}

impl EnergyDriftConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        solve_ok(self.t_end, self.dt, self.modes, self.sample_every)?;
        schedule_ok(&self.schedule, self.modes, 1)
    }
}

impl AprioriConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        solve_ok(self.t_end, self.dt, self.modes, self.sample_every)?;
        if !(self.p >= 2.0 && self.p.is_finite() && self.s > 0.0 && self.s < 1.0 - 1.0 / self.p) {
            return Err(ExperimentError::Invalid(format!(
                "needs 2 ≤ p < ∞ and 0 < s < 1 − 1/p, got s = {}, p = {}",
                self.s, self.p
            )));
        }
        if self.amplitudes.is_empty() || self.amplitudes.iter().any(|a| !(*a > 0.0)) {
            return Err(ExperimentError::Invalid("amplitudes must be positive".into()));
        }
        Ok(())
    }
}

impl MultiplierConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.k_list.len() < self.stab_doublings + 1 {
            return Err(ExperimentError::Invalid(format!(
                "k_list needs at least {} entries for {} doublings",
                self.stab_doublings + 1,
                self.stab_doublings
            )));
        }
        if self.p_list.iter().any(|p| !(*p >= 1.0)) {
            return Err(ExperimentError::Invalid("p_list entries must be ≥ 1".into()));
        }
        if self.s_list.is_empty() || self.p_list.is_empty() || self.n_list.is_empty() {
            return Err(ExperimentError::Invalid("s_list, p_list and n_list must be non-empty".into()));
        }
        Ok(())
    }
}

/// One experiment together with its configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentKind {
    Conservation(ConservationConfig),
    Gauge(GaugeConfig),
    Nonexistence(NonexistenceConfig),
    Illposedness(IllposednessConfig),
    RandomMomentum(RandomMomentumConfig),
    EnergyDrift(EnergyDriftConfig),
    Apriori(AprioriConfig),
    Multiplier(MultiplierConfig),
}

macro_rules! each_kind {
    ($self:expr, $c:ident => $body:expr) => {
        match $self {
            ExperimentKind::Conservation($c) => $body,
            ExperimentKind::Gauge($c) => $body,
            ExperimentKind::Nonexistence($c) => $body,
            ExperimentKind::Illposedness($c) => $body,
            ExperimentKind::RandomMomentum($c) => $body,
            ExperimentKind::EnergyDrift($c) => $body,
            ExperimentKind::Apriori($c) => $body,
            ExperimentKind::Multiplier($c) => $body,
        }
    };
}

fn keys_of<C: ExperimentConfig>(_: &C) -> &'static [&'static str] {
    C::KEYS
}

fn name_of<C: ExperimentConfig>(_: &C) -> &'static str {
    C::NAME
}

impl ExperimentKind {
    pub const NAMES: &'static [&'static str] = &[
        "conservation",
        "gauge",
        "nonexistence",
        "illposedness",
        "random_momentum",
        "energy_drift",
        "apriori",
        "multiplier",
    ];

    /// Default configuration for the named experiment.
    pub fn from_name(name: &str) -> Result<Self, ParamError> {
        Ok(match name {
            "conservation" => Self::Conservation(Default::default()),
            "gauge" => Self::Gauge(Default::default()),
            "nonexistence" => Self::Nonexistence(Default::default()),
            "illposedness" => Self::Illposedness(Default::default()),
            "random_momentum" => Self::RandomMomentum(Default::default()),
            "energy_drift" => Self::EnergyDrift(Default::default()),
            "apriori" => Self::Apriori(Default::default()),
            "multiplier" => Self::Multiplier(Default::default()),
            other => return Err(ParamError::UnknownExperiment(other.into())),
        })
    }

    pub fn name(&self) -> &'static str {
        each_kind!(self, c => name_of(c))
    }

    pub fn keys(&self) -> &'static [&'static str] {
        each_kind!(self, c => keys_of(c))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        each_kind!(self, c => c.set(key, value))
    }

    pub fn params(&self) -> Params {
        each_kind!(self, c => c.params())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        each_kind!(self, c => c.validate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_round_trips_its_echo() {
        for name in ExperimentKind::NAMES {
            let kind = ExperimentKind::from_name(name).unwrap();
            assert_eq!(kind.name(), *name);
            kind.validate().unwrap();
            let mut again = ExperimentKind::from_name(name).unwrap();
            for (k, v) in kind.params().finish() {
                again.set(&k, &v).unwrap();
            }
            assert_eq!(again, kind);
            assert_eq!(kind.params().finish().len(), kind.keys().len());
        }
    }

    #[test]
    fn errors_are_distinct() {
        let mut kind = ExperimentKind::from_name("gauge").unwrap();
        assert!(matches!(kind.set("bogus", "1"), Err(ParamError::UnknownKey { .. })));
        assert!(matches!(kind.set("dt", "abc"), Err(ParamError::Malformed { .. })));
        assert!(matches!(ExperimentKind::from_name("nope"), Err(ParamError::UnknownExperiment(_))));
        kind.set("dt", "1e-4").unwrap();
        assert!(matches!(kind, ExperimentKind::Gauge(GaugeConfig { dt, .. }) if dt == 1e-4));
    }

    #[test]
    fn schedule_beyond_mode_cap_is_rejected() {
        let cfg = NonexistenceConfig {
            modes: 100,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn n_rule_text() {
        assert_eq!("min".parse::<NRule>().unwrap(), NRule::Min);
        assert_eq!("fixed:40".parse::<NRule>().unwrap(), NRule::Fixed(40));
        assert!("fixed:0".parse::<NRule>().is_err());
        assert_eq!(NRule::Fixed(7).to_string(), "fixed:7");
    }
}
