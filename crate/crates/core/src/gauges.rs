//! Translation (G1) and global-phase (G2) gauges between the three flows.
//!
//! * G1 maps mKdV solutions to mKdV1 solutions: `u(t, x − σμt)`, i.e.
//!   `û(n) ↦ e^{−inσμt} û(n)`.
//! * G2 maps mKdV1 solutions to mKdV2 solutions: `u ↦ e^{−iσPt} u`.
//!
//! Both act as unimodular multipliers, so every Fourier–Lebesgue norm, the
//! mass and the momentum are unchanged slice by slice.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Sign, Trajectory, Variant};
use crate::norms::mass;
use crate::spectral::FourierState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GaugeKind {
    G1,
    G2,
}

impl fmt::Display for GaugeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GaugeKind::G1 => "G1",
            GaugeKind::G2 => "G2",
        })
    }
}

impl std::str::FromStr for GaugeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G1" => Ok(GaugeKind::G1),
            "G2" => Ok(GaugeKind::G2),
            other => Err(format!("unknown gauge `{other}` (expected G1 or G2)")),
        }
    }
}

/// One applied gauge. `scalar` is the frozen mass (G1) or momentum (G2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeSpec {
    #[serde(rename = "gauge")]
    pub which: GaugeKind,
    pub sign: Sign,
    pub scalar: f64,
}

impl GaugeSpec {
    pub fn new(which: GaugeKind, sign: Sign, scalar: f64) -> Result<Self, GaugeError> {
        if !scalar.is_finite() {
            return Err(GaugeError::NonFiniteScalar(scalar));
        }
        Ok(Self { which, sign, scalar })
    }

    /// Phase multiplier applied to mode `n` at time `t` by the forward gauge.
    pub fn multiplier(&self, n: i64, t: f64) -> Complex64 {
        let rate = self.sign.value() * self.scalar * t;
        let angle = match self.which {
            GaugeKind::G1 => n as f64 * rate,
            GaugeKind::G2 => rate,
        };
        Complex64::from_polar(1.0, -angle)
    }

    pub fn apply_to_state(&self, state: &FourierState) -> FourierState {
        let t = state.time();
        state.map_modes(|n, c| self.multiplier(n, t) * c)
    }

    pub fn invert_state(&self, state: &FourierState) -> FourierState {
        let t = state.time();
        state.map_modes(|n, c| self.multiplier(n, t).conj() * c)
    }
}

impl fmt::Display for GaugeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (sign {}, scalar {})", self.which, self.sign, self.scalar)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("gauge scalar must be finite, got {0}")]
    NonFiniteScalar(f64),
    #[error("cannot invert {requested}: trajectory's outermost gauge is {recorded}")]
    Mismatch {
        requested: GaugeSpec,
        recorded: GaugeSpec,
    },
}

fn forward_label(kind: GaugeKind, v: Variant) -> Variant {
    match (kind, v) {
        (GaugeKind::G1, Variant::Mkdv) => Variant::Mkdv1,
        (GaugeKind::G2, Variant::Mkdv1) => Variant::Mkdv2,
        (_, v) => v,
    }
}

fn backward_label(kind: GaugeKind, v: Variant) -> Variant {
    match (kind, v) {
        (GaugeKind::G1, Variant::Mkdv1) => Variant::Mkdv,
        (GaugeKind::G2, Variant::Mkdv2) => Variant::Mkdv1,
        (_, v) => v,
    }
}

fn check_sign(traj: &Trajectory, sign: Sign) {
    if traj.equation().sign != sign {
        log::warn!(
            "gauge sign {sign} differs from the trajectory's equation sign {}",
            traj.equation().sign
        );
    }
}

fn relabel(traj: Trajectory, variant: Variant) -> Trajectory {
    let mut eq = traj.equation();
    eq.variant = variant;
    traj.with_equation(eq)
}

/// Applies an already-built gauge and pushes it on the trajectory's gauge stack.
pub fn apply_gauge(traj: &Trajectory, spec: GaugeSpec) -> Trajectory {
    check_sign(traj, spec.sign);
    let mut stack = traj.gauges().to_vec();
    stack.push(spec);
    let out = traj.map_states(|s| spec.apply_to_state(s), stack);
    let variant = forward_label(spec.which, traj.equation().variant);
    relabel(out, variant)
}

/// G1 with the mass frozen from the initial slice.
pub fn apply_gauge1(traj: &Trajectory, sign: Sign) -> Trajectory {
    let mu = mass(traj.initial());
    apply_gauge(traj, GaugeSpec { which: GaugeKind::G1, sign, scalar: mu })
}

/// G2 with caller-supplied momentum `p0`.
pub fn apply_gauge2(traj: &Trajectory, sign: Sign, p0: f64) -> Result<Trajectory, GaugeError> {
    Ok(apply_gauge(traj, GaugeSpec::new(GaugeKind::G2, sign, p0)?))
}

/// Undoes `spec`. If the trajectory records gauges, `spec` must be the most recent one.
pub fn invert_gauge(traj: &Trajectory, spec: GaugeSpec) -> Result<Trajectory, GaugeError> {
    let mut stack = traj.gauges().to_vec();
    match stack.last() {
        Some(top) if *top == spec => {
            stack.pop();
        }
        Some(top) => {
            return Err(GaugeError::Mismatch {
                requested: spec,
                recorded: *top,
            })
        }
        None => check_sign(traj, spec.sign),
    }
    let out = traj.map_states(|s| spec.invert_state(s), stack);
    let variant = backward_label(spec.which, traj.equation().variant);
    Ok(relabel(out, variant))
}
