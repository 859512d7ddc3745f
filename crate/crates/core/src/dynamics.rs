//! The mKdV family on the torus: nonlinearities, their Fourier-side
//! decomposition, resonance algebra, multiplier sums, and the time stepper.
//!
//! All three equations share the form `∂_t u + ∂_x³ u = σ·N(u)` with
//! `σ = ±1` and, on the Fourier side, `∂_t û(n) = i n³ û(n) + σ·N̂(u)(n)`:
//!
//! * `mKdV`:  `N(u) = |u|² ∂_x u`
//! * `mKdV1`: `N(u) = (|u|² − μ) ∂_x u`
//! * `mKdV2`: `N(u) = (|u|² − μ) ∂_x u − i P(u) u`
//!
//! with mass `μ = Σ|û(n)|²` and momentum `P = Σ n|û(n)|²`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gauges::GaugeSpec;
use crate::norms::{mass, momentum};
use crate::spectral::{japanese, FourierState, SpectralError, Transform};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("resonance function overflows 128-bit arithmetic for ({0}, {1}, {2})")]
    Overflow(i64, i64, i64),
    #[error("direct O(M³) decomposition refused for mode cap {0} > {max}; use the pseudo-spectral nonlinearity instead", max = MAX_DIRECT_MODE_CAP)]
    TooLargeForDirectSum(usize),
    #[error("multiplier sum needs p ≥ 1, got {0}")]
    BadExponent(f64),
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("non-finite coefficient at t = {time} (mode {mode})")]
    NonFinite { time: f64, mode: i64 },
    #[error("trajectory has {0} samples, need at least 3")]
    TooShort(usize),
    #[error("trajectory is malformed: {0}")]
    BadTrajectory(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Mkdv,
    Mkdv1,
    Mkdv2,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Mkdv => "mkdv",
            Variant::Mkdv1 => "mkdv1",
            Variant::Mkdv2 => "mkdv2",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mkdv" => Ok(Variant::Mkdv),
            "mkdv1" => Ok(Variant::Mkdv1),
            "mkdv2" => Ok(Variant::Mkdv2),
            other => Err(format!("unknown equation `{other}` (expected mkdv, mkdv1 or mkdv2)")),
        }
    }
}

/// Sign in front of the nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+1" | "1" | "+" => Ok(Sign::Plus),
            "-1" | "-" => Ok(Sign::Minus),
            other => Err(format!("unknown sign `{other}` (expected +1 or -1)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EquationSpec {
    pub variant: Variant,
    pub sign: Sign,
}

impl EquationSpec {
    pub fn new(variant: Variant, sign: Sign) -> Self {
        Self { variant, sign }
    }
}

impl fmt::Display for EquationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (sign {})", self.variant, self.sign)
    }
}

/// Resonance function `Φ = 3(n₁+n₂)(n₁+n₃)(n₂+n₃)`.
///
/// This equals `n³ − n₁³ − n₂³ − n₃³` for `n = n₁+n₂+n₃`. The trilinear
/// estimate is usually written with the opposite sign; only `|Φ|` matters there.
pub fn phi_resonance(n1: i64, n2: i64, n3: i64) -> Result<i128, DynamicsError> {
    let (a, b, c) = (n1 as i128, n2 as i128, n3 as i128);
    let overflow = || DynamicsError::Overflow(n1, n2, n3);
    (a + b)
        .checked_mul(a + c)
        .and_then(|x| x.checked_mul(b + c))
        .and_then(|x| x.checked_mul(3))
        .ok_or_else(overflow)
}

/// Whether `(n₁,n₂,n₃) ∈ Λ(n)`: the triple sums to `n` and no pairwise sum vanishes.
pub fn lambda_membership(n: i64, n1: i64, n2: i64, n3: i64) -> bool {
    let (a, b, c) = (n1 as i128, n2 as i128, n3 as i128);
    n as i128 == a + b + c && a + b != 0 && a + c != 0 && b + c != 0
}

/// `e^{i k³ t}` with the phase product formed without cancellation loss,
/// so large `k³ t` keeps full relative accuracy of the unimodular factor.
pub fn cubic_phase(k: i64, t: f64) -> Complex64 {
    let cube = (k as i128).pow(3);
    let hi = cube as f64;
    let lo = (cube - hi as i128) as f64;
    let p = hi * t;
    let err = hi.mul_add(t, -p) + lo * t;
    Complex64::from_polar(1.0, p) * Complex64::from_polar(1.0, err)
}

/// Airy propagator `S(t)`: `û(n) ↦ e^{i n³ t} û(n)`. The time stamp advances by `t`.
pub fn linear_propagator(state: &FourierState, t: f64) -> FourierState {
    let mut out = state.map_modes(|n, c| cubic_phase(n, t) * c);
    out.set_time(state.time() + t);
    out
}

/// The four Fourier-side pieces of the mKdV1 nonlinearity, unsigned.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearityParts {
    /// `Σ_{Λ(n)} i n₃ û(n₁) conj(û(−n₂)) û(n₃)`
    pub nonresonant: FourierState,
    /// `i n |û(n)|² û(n)`
    pub resonant: FourierState,
    /// `i P(u) û(n)`
    pub momentum_part: FourierState,
    /// `μ · i n û(n)`
    pub mean_part: FourierState,
}

impl NonlinearityParts {
    /// Signed right-hand side of `variant` rebuilt from the pieces.
    pub fn recombine(&self, eq: EquationSpec) -> FourierState {
        let sigma = eq.sign.value();
        self.nonresonant.map_modes(|n, nr| {
            let mut v = nr - self.resonant.get(n);
            if eq.variant != Variant::Mkdv2 {
                v += self.momentum_part.get(n);
            }
            if eq.variant == Variant::Mkdv {
                v += self.mean_part.get(n);
            }
            sigma * v
        })
    }
}

/// Largest mode cap accepted by [`decompose_nonlinearity`].
pub const MAX_DIRECT_MODE_CAP: usize = 64;

/// Brute-force Fourier-side decomposition (`O(M³)`).
pub fn decompose_nonlinearity(state: &FourierState) -> Result<NonlinearityParts, DynamicsError> {
    let cap = state.mode_cap();
    if cap > MAX_DIRECT_MODE_CAP {
        return Err(DynamicsError::TooLargeForDirectSum(cap));
    }
    let m = cap as i64;
    let mu = mass(state);
    let p = momentum(state);
    let i = Complex64::i();
    let conj_reflected = |k: i64| state.get(-k).conj();
    let nonresonant = FourierState::from_fn(cap, |n| {
        let mut acc = ZERO;
        for n1 in -m..=m {
            for n2 in -m..=m {
                let n3 = n - n1 - n2;
                if n3.abs() > m || !lambda_membership(n, n1, n2, n3) {
                    continue;
                }
                acc += i * n3 as f64 * state.get(n1) * conj_reflected(n2) * state.get(n3);
            }
        }
        acc
    });
    let resonant = state.map_modes(|n, c| i * n as f64 * c.norm_sqr() * c);
    let momentum_part = state.map_modes(|_, c| i * p * c);
    let mean_part = state.map_modes(|n, c| i * (mu * n as f64) * c);
    let t = state.time();
    Ok(NonlinearityParts {
        nonresonant: nonresonant.with_time(t),
        resonant,
        momentum_part,
        mean_part,
    })
}

/// Pseudo-spectral evaluator of `σ·N(u)` for a fixed mode cap.
///
/// Works on a grid padded to at least `4M+1` points. States with very few
/// nonzero modes go through a direct sparse convolution instead, which gives
/// the same exact truncated convolution at a fraction of the cost.
pub struct NonlinearEngine {
    transform: Transform,
    u: Vec<Complex64>,
    ux: Vec<Complex64>,
    support: Vec<(i64, Complex64)>,
    sparse_budget: usize,
}

impl NonlinearEngine {
    pub fn new(mode_cap: usize) -> Self {
        let transform = Transform::dealiased(mode_cap);
        let k = transform.points();
        let log2 = (usize::BITS - k.leading_zeros()) as usize;
        Self {
            transform,
            u: Vec::new(),
            ux: Vec::new(),
            support: Vec::new(),
            sparse_budget: 2 * k * log2,
        }
    }

    pub fn mode_cap(&self) -> usize {
        self.transform.mode_cap()
    }

    pub fn padded_points(&self) -> usize {
        self.transform.points()
    }

    /// Writes the signed right-hand side `σ·N(u)` of `eq` into `out`.
    pub fn evaluate_into(&mut self, coeffs: &[Complex64], eq: EquationSpec, out: &mut [Complex64]) {
        let m = self.transform.mode_cap() as i64;
        self.support.clear();
        self.support.extend(
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != ZERO)
                .map(|(i, &c)| (i as i64 - m, c)),
        );
        let mut mu = 0.0;
        let mut p = 0.0;
        for &(n, c) in &self.support {
            mu += c.norm_sqr();
            p += n as f64 * c.norm_sqr();
        }
        if eq.variant == Variant::Mkdv {
            mu = 0.0;
        }
        if eq.variant != Variant::Mkdv2 {
            p = 0.0;
        }
        let sigma = eq.sign.value();
        let s = self.support.len();
        out.iter_mut().for_each(|v| *v = ZERO);
        if s.saturating_mul(s).saturating_mul(s) <= self.sparse_budget {
            // direct convolution over the support; untouched modes stay zero
            for &(n1, a) in &self.support {
                for &(k2, b) in &self.support {
                    // ū has coefficient conj(û(k)) at mode −k
                    let ab = sigma * a * b.conj();
                    let n12 = n1 - k2;
                    for &(n3, c) in &self.support {
                        let n = n12 + n3;
                        if n.abs() <= m {
                            out[(n + m) as usize] += ab * Complex64::new(0.0, n3 as f64) * c;
                        }
                    }
                }
            }
            for &(n, c) in &self.support {
                out[(n + m) as usize] -= sigma * Complex64::new(0.0, mu * n as f64 + p) * c;
            }
            return;
        }
        self.transform
            .synthesize(coeffs, |_| Complex64::new(1.0, 0.0), &mut self.u);
        self.transform
            .synthesize(coeffs, |n| Complex64::new(0.0, n as f64), &mut self.ux);
        for (ux, u) in self.ux.iter_mut().zip(&self.u) {
            *ux *= u.norm_sqr();
        }
        self.transform.analyze(&mut self.ux, out);
        for (idx, (o, &c)) in out.iter_mut().zip(coeffs).enumerate() {
            let n = idx as i64 - m;
            *o = sigma * (*o - Complex64::new(0.0, mu * n as f64 + p) * c);
        }
    }

    pub fn evaluate(&mut self, state: &FourierState, eq: EquationSpec) -> FourierState {
        let mut out = FourierState::zeros(state.mode_cap()).with_time(state.time());
        self.evaluate_into(state.coeffs(), eq, out.coeffs_mut());
        out
    }
}

/// Dealiased pseudo-spectral evaluation of the signed right-hand side `σ·N(u)`.
pub fn nonlinearity(state: &FourierState, eq: EquationSpec) -> FourierState {
    NonlinearEngine::new(state.mode_cap()).evaluate(state, eq)
}

/// Truncated multiplier sum
/// `Σ_{Λ(n), |n₁|,|n₂| ≤ K} (⟨n⟩^s |n₃| / (|Φ|^{1/2} ∏⟨n_j⟩^s))^{p'}`
/// without the final `1/p'` root. For `p = 1` (`p' = ∞`) the largest term is
/// returned instead.
pub fn j1_multiplier_sum(n: i64, s: f64, p: f64, radius: u64) -> Result<f64, DynamicsError> {
    if !(p >= 1.0) {
        return Err(DynamicsError::BadExponent(p));
    }
    let k = radius as i64;
    let sup_mode = p == 1.0;
    let dual = if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
    let reach = n.abs() + 2 * k;
    let bracket: Vec<f64> = (0..=reach).map(|j| japanese(j as f64).powf(s)).collect();
    let br = |j: i64| bracket[j.unsigned_abs() as usize];
    let top = br(n);
    let rows: Vec<f64> = (-k..=k)
        .into_par_iter()
        .map(|n1| {
            let mut acc = 0.0f64;
            for n2 in -k..=k {
                let n3 = n - n1 - n2;
                let phi = 3.0 * ((n1 + n2) as f64) * ((n1 + n3) as f64) * ((n2 + n3) as f64);
                if phi == 0.0 {
                    continue;
                }
                let term = top * n3.abs() as f64 / (phi.abs().sqrt() * br(n1) * br(n2) * br(n3));
                if sup_mode {
                    acc = acc.max(term);
                } else {
                    acc += term.powf(dual);
                }
            }
            acc
        })
        .collect();
    Ok(if sup_mode {
        rows.into_iter().fold(0.0, f64::max)
    } else {
        rows.into_iter().sum()
    })
}

/// Stability heuristic `dt ≤ 0.5 / (M·max|u|² + 1)`.
pub fn stable_dt_bound(state: &FourierState) -> f64 {
    let cap = state.mode_cap();
    let mut t = Transform::dealiased(cap);
    let mut grid = Vec::new();
    t.synthesize(state.coeffs(), |_| Complex64::new(1.0, 0.0), &mut grid);
    let peak = grid.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    0.5 / (cap as f64 * peak + 1.0)
}

/// Integrating-factor classical RK4 (Lawson form).
///
/// The free flow `e^{i n³ dt}` is applied exactly; RK4 only sees the
/// nonlinearity in the interaction picture, so `n³` stiffness never limits `dt`.
pub struct Integrator {
    eq: EquationSpec,
    dt: f64,
    engine: NonlinearEngine,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
    base_half: Vec<Complex64>,
    /// Mode set closed under the cubic interaction, reused while the support stays inside it.
    active: Vec<i64>,
    /// Supports at least this large skip the closure search.
    dense_floor: usize,
}

/// `σ·N(u)` for a state living on the closed mode set `active` (sorted).
fn sparse_rhs(active: &[i64], vals: &[Complex64], eq: EquationSpec, out: &mut [Complex64]) {
    let sigma = eq.sign.value();
    let mut mu = 0.0;
    let mut p = 0.0;
    for (&n, c) in active.iter().zip(vals) {
        mu += c.norm_sqr();
        p += n as f64 * c.norm_sqr();
    }
    if eq.variant == Variant::Mkdv {
        mu = 0.0;
    }
    if eq.variant != Variant::Mkdv2 {
        p = 0.0;
    }
    for (o, (&n, &c)) in out.iter_mut().zip(active.iter().zip(vals)) {
        *o = -sigma * Complex64::new(0.0, mu * n as f64 + p) * c;
    }
    for (&n1, &a) in active.iter().zip(vals) {
        if a == ZERO {
            continue;
        }
        for (&k2, &b) in active.iter().zip(vals) {
            if b == ZERO {
                continue;
            }
            let ab = sigma * a * b.conj();
            for (&n3, &c) in active.iter().zip(vals) {
                if let Ok(pos) = active.binary_search(&(n1 - k2 + n3)) {
                    out[pos] += ab * Complex64::new(0.0, n3 as f64) * c;
                }
            }
        }
    }
}

impl Integrator {
    pub fn new(eq: EquationSpec, mode_cap: usize, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::BadTimeStep(dt));
        }
        let m = mode_cap as i64;
        let len = 2 * mode_cap + 1;
        Ok(Self {
            eq,
            dt,
            engine: NonlinearEngine::new(mode_cap),
            half: (-m..=m).map(|n| cubic_phase(n, 0.5 * dt)).collect(),
            full: (-m..=m).map(|n| cubic_phase(n, dt)).collect(),
            k: std::array::from_fn(|_| vec![ZERO; len]),
            stage: vec![ZERO; len],
            base_half: vec![ZERO; len],
            active: Vec::new(),
            dense_floor: usize::MAX,
        })
    }

    /// Smallest mode set containing `support` and closed under `(n₁, n₂, n₃) ↦ n₁ − n₂ + n₃`,
    /// or `None` once it is too large for direct convolution.
    fn closed_support(&self, support: &[i64]) -> Option<Vec<i64>> {
        let m = self.engine.mode_cap() as i64;
        let budget = self.engine.sparse_budget;
        let fits = |k: usize| k.saturating_mul(k).saturating_mul(k) <= budget;
        let mut set: std::collections::BTreeSet<i64> = support.iter().copied().collect();
        loop {
            let current: Vec<i64> = set.iter().copied().collect();
            if !fits(current.len()) {
                return None;
            }
            for &a in &current {
                for &b in &current {
                    for &c in &current {
                        let n = a - b + c;
                        if n.abs() <= m {
                            set.insert(n);
                        }
                    }
                }
                if !fits(set.len()) {
                    return None;
                }
            }
            if set.len() == current.len() {
                return Some(current);
            }
        }
    }

    fn step_sparse(&mut self, state: &FourierState) -> FourierState {
        let m = self.engine.mode_cap() as i64;
        let h = self.dt;
        let eq = self.eq;
        let active = &self.active;
        let at = |n: i64| (n + m) as usize;
        let u: Vec<Complex64> = active.iter().map(|&n| state.coeffs()[at(n)]).collect();
        let half: Vec<Complex64> = active.iter().map(|&n| self.half[at(n)]).collect();
        let full: Vec<Complex64> = active.iter().map(|&n| self.full[at(n)]).collect();
        let len = active.len();
        let mut k = [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]];
        let mut stage = vec![ZERO; len];

        sparse_rhs(active, &u, eq, &mut k[0]);
        for i in 0..len {
            stage[i] = half[i] * (u[i] + 0.5 * h * k[0][i]);
        }
        sparse_rhs(active, &stage, eq, &mut k[1]);
        for i in 0..len {
            stage[i] = half[i] * u[i] + 0.5 * h * k[1][i];
        }
        sparse_rhs(active, &stage, eq, &mut k[2]);
        for i in 0..len {
            stage[i] = full[i] * u[i] + h * half[i] * k[2][i];
        }
        sparse_rhs(active, &stage, eq, &mut k[3]);
        let mut next = FourierState::zeros(state.mode_cap()).with_time(state.time() + h);
        let out = next.coeffs_mut();
        for (i, &n) in active.iter().enumerate() {
            out[at(n)] = full[i] * u[i]
                + h / 6.0 * (full[i] * k[0][i] + 2.0 * half[i] * (k[1][i] + k[2][i]) + k[3][i]);
        }
        next
    }

    fn check_active(&self, next: &FourierState) -> Result<(), DynamicsError> {
        let m = self.engine.mode_cap() as i64;
        for &n in &self.active {
            let c = next.coeffs()[(n + m) as usize];
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(DynamicsError::NonFinite {
                    time: next.time(),
                    mode: n,
                });
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn equation(&self) -> EquationSpec {
        self.eq
    }

    pub fn padded_points(&self) -> usize {
        self.engine.padded_points()
    }

    /// Advances `state` by one step of size `dt`. Only the output is checked for non-finite values.
    pub fn step(&mut self, state: &FourierState) -> Result<FourierState, DynamicsError> {
        let cap = self.engine.mode_cap();
        if state.mode_cap() != cap {
            return Err(SpectralError::ModeCapMismatch(cap, state.mode_cap()).into());
        }
        let support: Vec<i64> = state.modes().filter(|(_, c)| *c != ZERO).map(|(n, _)| n).collect();
        let covered = !self.active.is_empty() && support.iter().all(|n| self.active.binary_search(n).is_ok());
        if !covered {
            self.active = Vec::new();
            if support.len() < self.dense_floor {
                match self.closed_support(&support) {
                    Some(active) => self.active = active,
                    None => self.dense_floor = support.len(),
                }
            }
        }
        if !self.active.is_empty() {
            let next = self.step_sparse(state);
            self.check_active(&next)?;
            return Ok(next);
        }
        let u = state.coeffs();
        let h = self.dt;
        let eq = self.eq;
        let [k1, k2, k3, k4] = &mut self.k;

        self.engine.evaluate_into(u, eq, k1);
        for i in 0..u.len() {
            self.base_half[i] = self.half[i] * u[i];
            self.stage[i] = self.half[i] * (u[i] + 0.5 * h * k1[i]);
        }
        self.engine.evaluate_into(&self.stage, eq, k2);
        for i in 0..u.len() {
            self.stage[i] = self.base_half[i] + 0.5 * h * k2[i];
        }
        self.engine.evaluate_into(&self.stage, eq, k3);
        for i in 0..u.len() {
            self.stage[i] = self.full[i] * u[i] + h * self.half[i] * k3[i];
        }
        self.engine.evaluate_into(&self.stage, eq, k4);
        let mut next = state.clone();
        next.set_time(state.time() + h);
        for (i, out) in next.coeffs_mut().iter_mut().enumerate() {
            let e = self.full[i];
            *out = e * u[i]
                + h / 6.0 * (e * k1[i] + 2.0 * self.half[i] * (k2[i] + k3[i]) + k4[i]);
        }
        check_finite(&next)?;
        Ok(next)
    }
}

fn check_finite(state: &FourierState) -> Result<(), DynamicsError> {
    match state.modes().find(|(_, c)| !(c.re.is_finite() && c.im.is_finite())) {
        Some((mode, _)) => Err(DynamicsError::NonFinite {
            time: state.time(),
            mode,
        }),
        None => Ok(()),
    }
}

/// One fourth-order step of `eq` from `state`.
pub fn step(state: &FourierState, eq: EquationSpec, dt: f64) -> Result<FourierState, DynamicsError> {
    check_finite(state)?;
    Integrator::new(eq, state.mode_cap(), dt)?.step(state)
}

/// Time-ordered, uniformly spaced samples of one solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    states: Vec<FourierState>,
    equation: EquationSpec,
    sample_dt: f64,
    step_dt: f64,
    padded_points: usize,
    gauges: Vec<GaugeSpec>,
}

impl Trajectory {
    /// Wraps externally produced samples (spacing `sample_dt`, no solver metadata).
    pub fn from_states(
        states: Vec<FourierState>,
        equation: EquationSpec,
        sample_dt: f64,
    ) -> Result<Self, DynamicsError> {
        Self::with_metadata(states, equation, sample_dt, sample_dt, 0, Vec::new())
    }

    pub fn with_metadata(
        states: Vec<FourierState>,
        equation: EquationSpec,
        sample_dt: f64,
        step_dt: f64,
        padded_points: usize,
        gauges: Vec<GaugeSpec>,
    ) -> Result<Self, DynamicsError> {
        let first = states
            .first()
            .ok_or_else(|| DynamicsError::BadTrajectory("no states".into()))?;
        if states.iter().any(|s| s.mode_cap() != first.mode_cap()) {
            return Err(DynamicsError::BadTrajectory("mode caps differ between slices".into()));
        }
        if !(sample_dt > 0.0) {
            return Err(DynamicsError::BadTrajectory(format!("sample spacing {sample_dt}")));
        }
        for (k, s) in states.iter().enumerate() {
            let expected = first.time() + k as f64 * sample_dt;
            if (s.time() - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(DynamicsError::BadTrajectory(format!(
                    "slice {k} at t = {} breaks uniform spacing {sample_dt}",
                    s.time()
                )));
            }
        }
        Ok(Self {
            states,
            equation,
            sample_dt,
            step_dt,
            padded_points,
            gauges,
        })
    }

    pub fn states(&self) -> &[FourierState] {
        &self.states
    }

    pub fn into_states(self) -> Vec<FourierState> {
        self.states
    }

    pub fn equation(&self) -> EquationSpec {
        self.equation
    }

    pub fn sample_dt(&self) -> f64 {
        self.sample_dt
    }

    pub fn step_dt(&self) -> f64 {
        self.step_dt
    }

    pub fn padded_points(&self) -> usize {
        self.padded_points
    }

    pub fn mode_cap(&self) -> usize {
        self.states[0].mode_cap()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> &FourierState {
        &self.states[0]
    }

    pub fn last(&self) -> &FourierState {
        self.states.last().expect("trajectories are never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(FourierState::time).collect()
    }

    /// Gauges applied so far, innermost first.
    pub fn gauges(&self) -> &[GaugeSpec] {
        &self.gauges
    }

    pub fn with_equation(mut self, equation: EquationSpec) -> Self {
        self.equation = equation;
        self
    }

    /// Slice-wise map that keeps metadata; used by the gauge transforms.
    pub(crate) fn map_states(
        &self,
        f: impl Fn(&FourierState) -> FourierState,
        gauges: Vec<GaugeSpec>,
    ) -> Self {
        Self {
            states: self.states.iter().map(f).collect(),
            gauges,
            ..self.clone()
        }
    }

    /// Interaction-picture profile `v(t) = S(−t) u(t)`.
    pub fn interaction_profile(&self) -> Vec<FourierState> {
        self.states
            .iter()
            .map(|s| {
                let mut v = linear_propagator(s, -s.time());
                v.set_time(s.time());
                v
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Keep every `sample_every`-th step (the initial state is always kept).
    pub sample_every: usize,
    /// Abort when the relative mass change over one step exceeds this.
    pub max_step_mass_drift: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            sample_every: 1,
            max_step_mass_drift: 0.01,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solve request: {0}")]
    InvalidInput(String),
    #[error("instability at t = {time}: relative mass change {drift:.3e} in one step")]
    Unstable {
        time: f64,
        drift: f64,
        partial: Box<Trajectory>,
    },
    #[error("solver produced non-finite values at t = {time} (mode {mode})")]
    NonFinite {
        time: f64,
        mode: i64,
        partial: Box<Trajectory>,
    },
}

impl SolveError {
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            SolveError::Unstable { partial, .. } | SolveError::NonFinite { partial, .. } => Some(partial),
            SolveError::InvalidInput(_) => None,
        }
    }
}

/// Number of steps of size `dt` covering `[0, T]`, or `None` when `dt` does not divide `T`.
pub fn step_count(total: f64, dt: f64) -> Option<usize> {
    let ratio = total / dt;
    let nearest = ratio.round();
    ((ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) && nearest >= 1.0).then_some(nearest as usize)
}

/// Solves `eq` from `ic` on `[0, T]` keeping every step.
pub fn solve(ic: &FourierState, eq: EquationSpec, total: f64, dt: f64) -> Result<Trajectory, SolveError> {
    solve_with(ic, eq, total, dt, &SolveOptions::default())
}

pub fn solve_with(
    ic: &FourierState,
    eq: EquationSpec,
    total: f64,
    dt: f64,
    options: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(SolveError::InvalidInput(format!("final time must be positive, got {total}")));
    }
    if options.sample_every == 0 {
        return Err(SolveError::InvalidInput("sample_every must be at least 1".into()));
    }
    let mut integrator =
        Integrator::new(eq, ic.mode_cap(), dt).map_err(|e| SolveError::InvalidInput(e.to_string()))?;
    if !ic.is_finite() {
        return Err(SolveError::InvalidInput("initial data contains non-finite values".into()));
    }
    let bound = stable_dt_bound(ic);
    if dt > bound {
        log::warn!("dt = {dt:.3e} exceeds the stability heuristic {bound:.3e} for {eq}");
    }
    let steps = step_count(total, dt)
        .ok_or_else(|| SolveError::InvalidInput(format!("dt = {dt} does not divide T = {total}")))?;
    let mut current = ic.clone().with_time(0.0);
    let mut states = Vec::with_capacity(steps / options.sample_every + 2);
    states.push(current.clone());
    let finish = |states: Vec<FourierState>| {
        Trajectory::with_metadata(
            states,
            eq,
            dt * options.sample_every as f64,
            dt,
            integrator_points(ic.mode_cap()),
            Vec::new(),
        )
        .expect("solver output is uniform")
    };
    let mut mass_prev = mass(&current);
    for k in 1..=steps {
        let next = match integrator.step(&current) {
            Ok(next) => next,
            Err(DynamicsError::NonFinite { time, mode }) => {
                return Err(SolveError::NonFinite {
                    time,
                    mode,
                    partial: Box::new(finish(states)),
                })
            }
            Err(e) => return Err(SolveError::InvalidInput(e.to_string())),
        };
        current = next;
        // pin the clock to k·dt so long runs do not accumulate rounding
        current.set_time(k as f64 * dt);
        let mass_now = mass(&current);
        if mass_prev > 0.0 {
            let drift = (mass_now - mass_prev).abs() / mass_prev;
            if drift > options.max_step_mass_drift {
                return Err(SolveError::Unstable {
                    time: current.time(),
                    drift,
                    partial: Box::new(finish(states)),
                });
            }
        }
        mass_prev = mass_now;
        if k % options.sample_every == 0 {
            states.push(current.clone());
        }
    }
    Ok(finish(states))
}

fn integrator_points(mode_cap: usize) -> usize {
    crate::spectral::good_fft_len(4 * mode_cap + 1)
}

/// Per interior sample, `‖(û(t+h) − û(t−h))/2h + (in)³ û(t) − σN̂(u(t))‖_{ℓ²}`.
pub fn residual_check(traj: &Trajectory) -> Result<Vec<f64>, DynamicsError> {
    let states = traj.states();
    if states.len() < 3 {
        return Err(DynamicsError::TooShort(states.len()));
    }
    let h = traj.sample_dt();
    let eq = traj.equation();
    let mut engine = NonlinearEngine::new(traj.mode_cap());
    Ok(states
        .windows(3)
        .map(|w| {
            let rhs = engine.evaluate(&w[1], eq);
            w[1].modes()
                .map(|(n, c)| {
                    let dt = (w[2].get(n) - w[0].get(n)) / (2.0 * h);
                    let cube = (n as f64).powi(3);
                    (dt - Complex64::new(0.0, cube) * c - rhs.get(n)).norm_sqr()
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::derivative;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn eq(variant: Variant, sign: Sign) -> EquationSpec {
        EquationSpec::new(variant, sign)
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_resonance(1, 2, 3).unwrap(), 180);
        assert_eq!(216 - 1 - 8 - 27, 180);
        assert_eq!(phi_resonance(1, -1, 5).unwrap(), 0);
        for k in -50..50 {
            assert_eq!(phi_resonance(0, 0, k).unwrap(), 0);
        }
        assert!(phi_resonance(i64::MAX, i64::MAX, 1).is_err());
        let big = 1 << 20;
        assert!(phi_resonance(big, big, big).is_ok());
    }

    #[test]
    fn lambda_examples() {
        assert!(lambda_membership(6, 1, 2, 3));
        assert!(!lambda_membership(5, 1, -1, 5));
        assert!(!lambda_membership(7, 1, 2, 3));
        for m in -10..10 {
            assert!(!lambda_membership(4, 4, m, -m));
        }
    }

    #[test]
    fn propagator_examples() {
        let s = FourierState::from_fn(6, |n| c(n as f64, 1.0));
        assert_eq!(linear_propagator(&s, 0.0).coeffs(), s.coeffs());
        let full_turn = linear_propagator(&s, std::f64::consts::TAU);
        for (a, b) in full_turn.coeffs().iter().zip(s.coeffs()) {
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
        let m0 = mass(&s);
        assert!((mass(&linear_propagator(&s, 0.37)) - m0).abs() < 1e-14 * m0);
    }

    #[test]
    fn cubic_phase_matches_direct_evaluation_for_small_arguments() {
        for k in -20..=20 {
            let direct = Complex64::from_polar(1.0, (k * k * k) as f64 * 0.013);
            assert!((cubic_phase(k, 0.013) - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_nonlinearity() {
        let amp = c(0.3, -0.4);
        let s = FourierState::single_mode(8, 3, amp);
        let out = nonlinearity(&s, eq(Variant::Mkdv1, Sign::Plus));
        assert!(out.coeffs().iter().all(|z| z.norm() < 1e-15));
        // mKdV2 keeps only the momentum phase −iPû with P = 3|a|²
        let out = nonlinearity(&s, eq(Variant::Mkdv2, Sign::Plus));
        assert!((out.get(3) + Complex64::i() * 3.0 * amp.norm_sqr() * amp).norm() < 1e-15);
        for sign in [Sign::Plus, Sign::Minus] {
            let out = nonlinearity(&s, eq(Variant::Mkdv, sign));
            let expect = sign.value() * Complex64::i() * 3.0 * amp.norm_sqr() * amp;
            assert!((out.get(3) - expect).norm() < 1e-15);
            assert!(out.modes().filter(|(n, _)| *n != 3).all(|(_, z)| z.norm() < 1e-15));
        }
    }

    #[test]
    fn zero_state_nonlinearity() {
        let z = FourierState::zeros(5);
        for v in [Variant::Mkdv, Variant::Mkdv1, Variant::Mkdv2] {
            assert_eq!(nonlinearity(&z, eq(v, Sign::Minus)).support_len(), 0);
        }
        let parts = decompose_nonlinearity(&z).unwrap();
        assert_eq!(parts.nonresonant.support_len(), 0);
        assert_eq!(parts.resonant.support_len(), 0);
    }

    #[test]
    fn mean_only_state_has_zero_mkdv_nonlinearity() {
        let s = FourierState::single_mode(0, 0, c(1.5, 0.5));
        for v in [Variant::Mkdv, Variant::Mkdv1, Variant::Mkdv2] {
            assert_eq!(nonlinearity(&s, eq(v, Sign::Plus)).get(0), c(0.0, 0.0));
        }
    }

    #[test]
    fn single_mode_has_no_nonresonant_part() {
        let s = FourierState::single_mode(4, -2, c(0.7, 0.1));
        assert!(decompose_nonlinearity(&s)
            .unwrap()
            .nonresonant
            .coeffs()
            .iter()
            .all(|z| z.norm() == 0.0));
        assert!(matches!(
            decompose_nonlinearity(&FourierState::zeros(65)),
            Err(DynamicsError::TooLargeForDirectSum(65))
        ));
    }

    #[test]
    fn variants_differ_by_scalar_corrections() {
        let s = FourierState::from_fn(6, |n| c(0.2 / (1.0 + n.abs() as f64), 0.05 * n as f64));
        for sign in [Sign::Plus, Sign::Minus] {
            let a = nonlinearity(&s, eq(Variant::Mkdv, sign));
            let b = nonlinearity(&s, eq(Variant::Mkdv1, sign));
            let d = nonlinearity(&s, eq(Variant::Mkdv2, sign));
            let mu_ux = derivative(&s, 1).scaled(c(mass(&s), 0.0));
            let ipu = s.scaled(c(0.0, momentum(&s)));
            for n in -6..=6 {
                let lhs = a.get(n) - b.get(n);
                assert!((lhs - sign.value() * mu_ux.get(n)).norm() < 1e-14);
                let lhs = b.get(n) - d.get(n);
                assert!((lhs - sign.value() * ipu.get(n)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sparse_and_fft_paths_agree() {
        let s = FourierState::from_fn(20, |n| {
            if n.abs() <= 3 {
                c(0.3 * n as f64, 0.2)
            } else {
                c(0.0, 0.0)
            }
        });
        let mut engine = NonlinearEngine::new(20);
        let e = eq(Variant::Mkdv, Sign::Plus);
        let sparse = engine.evaluate(&s, e);
        engine.sparse_budget = 0;
        let dense = engine.evaluate(&s, e);
        for (a, b) in sparse.coeffs().iter().zip(dense.coeffs()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn sparse_and_dense_steps_agree() {
        let s = FourierState::from_fn(24, |n| match n {
            3 => c(0.4, 0.1),
            -6 => c(0.0, 0.3),
            _ => c(0.0, 0.0),
        });
        for v in [Variant::Mkdv, Variant::Mkdv1, Variant::Mkdv2] {
            let mut sparse = Integrator::new(eq(v, Sign::Plus), 24, 1e-3).unwrap();
            let mut dense = Integrator::new(eq(v, Sign::Plus), 24, 1e-3).unwrap();
            dense.dense_floor = 0;
            let (mut a, mut b) = (s.clone(), s.clone());
            for _ in 0..5 {
                a = sparse.step(&a).unwrap();
                b = dense.step(&b).unwrap();
            }
            assert!(!sparse.active.is_empty());
            assert!(dense.active.is_empty());
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((x - y).norm() < 1e-14, "{v}");
            }
        }
    }

    #[test]
    fn j1_edge_cases() {
        assert_eq!(j1_multiplier_sum(5, 0.5, 2.0, 0).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in [1, 2, 4, 8, 16] {
            let v = j1_multiplier_sum(3, 0.5, 2.0, k).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(j1_multiplier_sum(0, 0.5, 0.5, 4).is_err());
        let sup = j1_multiplier_sum(0, 0.5, 1.0, 8).unwrap();
        assert!(sup > 0.0 && sup.is_finite());
    }

    #[test]
    fn step_and_solve_basics() {
        let z = FourierState::zeros(4);
        let e = eq(Variant::Mkdv2, Sign::Plus);
        assert_eq!(step(&z, e, 0.01).unwrap().support_len(), 0);
        assert!(step(&z, e, 0.0).is_err());
        let traj = solve(&z, e, 0.1, 0.01).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.states().iter().all(|s| s.support_len() == 0));
        assert!((traj.last().time() - 0.1).abs() < 1e-15);
        assert!(matches!(solve(&z, e, 0.1, 0.03), Err(SolveError::InvalidInput(_))));
        let mut bad = FourierState::zeros(2);
        bad.set(1, c(f64::NAN, 0.0));
        assert!(matches!(step(&bad, e, 0.01), Err(DynamicsError::NonFinite { mode: 1, .. })));
    }

    #[test]
    fn small_data_follows_the_linear_flow() {
        let eps = 1e-6;
        let s = FourierState::from_fn(8, |n| c(eps / (1.0 + n.abs() as f64), eps * 0.1 * n as f64));
        let dt = 1e-2;
        let stepped = step(&s, eq(Variant::Mkdv, Sign::Plus), dt).unwrap();
        let linear = linear_propagator(&s, dt);
        let diff = stepped.difference(&linear).unwrap();
        let err = diff.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
        // cubic term is O(ε³·M) per unit time
        assert!(err < 8.0 * 10.0 * eps.powi(3) * dt, "err = {err:e}");
    }

    #[test]
    fn plane_wave_modulus_is_constant_under_mkdv1() {
        let s = FourierState::single_mode(8, 5, c(0.6, 0.2));
        let mut integ = Integrator::new(eq(Variant::Mkdv1, Sign::Plus), 8, 1e-3).unwrap();
        let mut cur = s.clone();
        for _ in 0..50 {
            let next = integ.step(&cur).unwrap();
            assert!((next.get(5).norm() - cur.get(5).norm()).abs() < 1e-12);
            cur = next;
        }
    }

    #[test]
    fn instability_aborts_with_partial_trajectory() {
        let s = FourierState::from_fn(16, |n| c(3.0 / (1.0 + n.abs() as f64), 1.0));
        let err = solve(&s, eq(Variant::Mkdv, Sign::Plus), 1.0, 0.05).unwrap_err();
        let partial = err.partial().expect("partial trajectory");
        assert!(!partial.is_empty());
        assert!(partial.last().time() < 1.0);
    }

    #[test]
    fn residual_needs_three_samples() {
        let z = FourierState::zeros(3);
        let e = eq(Variant::Mkdv, Sign::Plus);
        let short = Trajectory::from_states(vec![z.clone(), z.clone().with_time(0.1)], e, 0.1).unwrap();
        assert!(matches!(residual_check(&short), Err(DynamicsError::TooShort(2))));
        let traj = solve(&z, e, 0.5, 0.1).unwrap();
        assert!(residual_check(&traj).unwrap().iter().all(|r| *r == 0.0));
    }

    #[test]
    fn trajectory_rejects_irregular_spacing() {
        let z = FourierState::zeros(2);
        let e = eq(Variant::Mkdv, Sign::Plus);
        let states = vec![z.clone(), z.clone().with_time(0.1), z.clone().with_time(0.35)];
        assert!(Trajectory::from_states(states, e, 0.1).is_err());
    }

    #[test]
    fn parsing_equation_labels() {
        assert_eq!("mKdV2".parse::<Variant>().unwrap(), Variant::Mkdv2);
        assert_eq!("+1".parse::<Sign>().unwrap(), Sign::Plus);
        assert_eq!("-1".parse::<Sign>().unwrap(), Sign::Minus);
        assert!("kdv".parse::<Variant>().is_err());
        assert!("0".parse::<Sign>().is_err());
    }
}
