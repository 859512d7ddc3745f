use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::spectral::{good_fft_len, to_fourier, FourierState, GridFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresetError {
    #[error("unknown initial-data preset `{0}` (expected zero, plane_wave, gaussian_bump, random_smooth or one_sided)")]
    Unknown(String),
    #[error("preset `{name}` expects {expected}, got `{got}`")]
    Arguments {
        name: &'static str,
        expected: &'static str,
        got: String,
    },
    #[error("plane wave at mode {mode} does not fit mode cap {mode_cap}")]
    ModeOutsideCap { mode: i64, mode_cap: usize },
}

/// Named, reproducible initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum IcPreset {
    Zero,
    /// `N^{-s} a e^{iNx}`
    PlaneWave { mode: i64, amplitude: f64, s: f64 },
    /// `amp · exp((cos x − 1)/width²) · e^{ix}`
    GaussianBump { width: f64, amp: f64 },
    /// Random amplitudes `≤ 0.5·e^{−decay(|n|−1)}` and phases on `1 ≤ |n| ≤ modes/2`.
    RandomSmooth { decay: f64, seed: u64, modes: usize },
    /// `n^{−alpha}` on `1 ≤ n ≤ M`, zero elsewhere.
    OneSided { alpha: f64 },
}

fn numbers(name: &'static str, expected: &'static str, args: &str) -> Result<Vec<f64>, PresetError> {
    let bad = || PresetError::Arguments {
        name,
        expected,
        got: args.to_owned(),
    };
    if args.trim().is_empty() {
        return Ok(Vec::new());
    }
    args.split(',')
        .map(|a| {
            let a = a.trim();
            let a = a.split_once('=').map_or(a, |(_, v)| v.trim());
            a.parse::<f64>().ok().filter(|v| v.is_finite())
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(bad)
}

impl FromStr for IcPreset {
    type Err = PresetError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let text = text.trim();
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        match name {
            "zero" if args.is_empty() => Ok(IcPreset::Zero),
            "plane_wave" => {
                let expected = "N,a,s with integer N";
                match numbers("plane_wave", expected, args)?.as_slice() {
                    [n, a, s] if n.fract() == 0.0 => Ok(IcPreset::PlaneWave {
                        mode: *n as i64,
                        amplitude: *a,
                        s: *s,
                    }),
                    _ => Err(PresetError::Arguments {
                        name: "plane_wave",
                        expected,
                        got: args.into(),
                    }),
                }
            }
            "gaussian_bump" => {
                let expected = "width,amp with width > 0";
                match numbers("gaussian_bump", expected, args)?.as_slice() {
                    [w, a] if *w > 0.0 => Ok(IcPreset::GaussianBump { width: *w, amp: *a }),
                    _ => Err(PresetError::Arguments {
                        name: "gaussian_bump",
                        expected,
                        got: args.into(),
                    }),
                }
            }
            "random_smooth" => {
                let expected = "decay,seed[,modes] with decay ≥ 0, integer seed and even modes ≥ 2";
                let err = || PresetError::Arguments {
                    name: "random_smooth",
                    expected,
                    got: args.into(),
                };
                let parts: Vec<&str> = args.split(',').map(str::trim).collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(err());
                }
                let decay = parts[0].parse::<f64>().ok().filter(|d| *d >= 0.0 && d.is_finite());
                let seed = parts[1].parse::<u64>().ok();
                let modes = match parts.get(2) {
                    Some(m) => m
                        .split_once('=')
                        .map_or(*m, |(_, v)| v.trim())
                        .parse::<usize>()
                        .ok()
                        .filter(|m| *m >= 2 && m % 2 == 0),
                    None => Some(8),
                };
                match (decay, seed, modes) {
                    (Some(decay), Some(seed), Some(modes)) => Ok(IcPreset::RandomSmooth { decay, seed, modes }),
                    _ => Err(err()),
                }
            }
            "one_sided" => {
                let expected = "alpha";
                match numbers("one_sided", expected, args)?.as_slice() {
                    [alpha] => Ok(IcPreset::OneSided { alpha: *alpha }),
                    _ => Err(PresetError::Arguments {
                        name: "one_sided",
                        expected,
                        got: args.into(),
                    }),
                }
            }
            _ => Err(PresetError::Unknown(text.into())),
        }
    }
}

impl fmt::Display for IcPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IcPreset::Zero => f.write_str("zero"),
            IcPreset::PlaneWave { mode, amplitude, s } => write!(f, "plane_wave:{mode},{amplitude},{s}"),
            IcPreset::GaussianBump { width, amp } => write!(f, "gaussian_bump:{width},{amp}"),
            IcPreset::RandomSmooth { decay, seed, modes } => write!(f, "random_smooth:{decay},{seed},{modes}"),
            IcPreset::OneSided { alpha } => write!(f, "one_sided:{alpha}"),
        }
    }
}

impl IcPreset {
    pub fn build(&self, mode_cap: usize) -> Result<FourierState, PresetError> {
        let zero = Complex64::new(0.0, 0.0);
        Ok(match *self {
            IcPreset::Zero => FourierState::zeros(mode_cap),
            IcPreset::PlaneWave { mode, amplitude, s } => {
                if mode.unsigned_abs() as usize > mode_cap {
                    return Err(PresetError::ModeOutsideCap { mode, mode_cap });
                }
                let scale = if mode == 0 { 1.0 } else { (mode.abs() as f64).powf(-s) };
                FourierState::single_mode(mode_cap, mode, Complex64::new(scale * amplitude, 0.0))
            }
            IcPreset::GaussianBump { width, amp } => {
                let points = good_fft_len(4 * mode_cap + 64);
                let grid = GridFunction::from_fn(points, |x| {
                    amp * ((x.cos() - 1.0) / (width * width)).exp() * Complex64::from_polar(1.0, x)
                });
                to_fourier(&grid, mode_cap).expect("grid is finer than the mode cap")
            }
            IcPreset::RandomSmooth { decay, seed, modes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let half = (modes / 2) as i64;
                let mut state = FourierState::zeros(mode_cap);
                // draw order: n = 1, −1, 2, −2, … so every mode cap sees the same values
                for k in 1..=half {
                    for n in [k, -k] {
                        let r: f64 = rng.random();
                        let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                        if n.unsigned_abs() as usize <= mode_cap {
                            let a = 0.5 * r * (-decay * (k - 1) as f64).exp();
                            state.set(n, Complex64::from_polar(a, phase));
                        }
                    }
                }
                state
            }
            IcPreset::OneSided { alpha } => {
                FourierState::from_fn(mode_cap, |n| if n >= 1 { Complex64::new((n as f64).powf(-alpha), 0.0) } else { zero })
            }
        })
    }
}
