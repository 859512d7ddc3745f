//! Fourier–Lebesgue norms, mass, momentum, truncated-momentum diagnostics,
//! and windowed approximations of the space-time `X^{s,b}_{p,q}` norms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{linear_propagator, Trajectory};
use crate::spectral::{forward_dft_in_place, good_fft_len, japanese, FourierState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("invalid norm exponent {name} = {value} (must be ≥ 1)")]
    BadExponent { name: &'static str, value: f64 },
    #[error("p = ∞ is only supported for the spatial Fourier–Lebesgue norm")]
    InfiniteSpaceTimeP,
    #[error("momentum schedule needs at least 4 strictly increasing cutoffs, got {0:?}")]
    BadSchedule(Vec<usize>),
    #[error("space-time norm needs at least 8 time samples, got {0}")]
    TooFewSamples(usize),
}

/// `(s, p)` for `FL^{s,p}`; `p` may be `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: f64,
    pub p: f64,
}

impl NormSpec {
    pub fn new(s: f64, p: f64) -> Result<Self, NormError> {
        if !(p >= 1.0) || !s.is_finite() {
            return Err(NormError::BadExponent { name: "p", value: p });
        }
        Ok(Self { s, p })
    }

    /// `FL^{1/2,2} = H^{1/2}`, used for most trajectory comparisons.
    pub const H_HALF: NormSpec = NormSpec { s: 0.5, p: 2.0 };
    pub const L2: NormSpec = NormSpec { s: 0.0, p: 2.0 };
}

/// `(s, b, p, q)` for `X^{s,b}_{p,q}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeNormSpec {
    pub s: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

impl SpaceTimeNormSpec {
    pub fn new(s: f64, b: f64, p: f64, q: f64) -> Result<Self, NormError> {
        if !(p >= 1.0) {
            return Err(NormError::BadExponent { name: "p", value: p });
        }
        if p.is_infinite() {
            return Err(NormError::InfiniteSpaceTimeP);
        }
        if !(q >= 1.0) {
            return Err(NormError::BadExponent { name: "q", value: q });
        }
        Ok(Self { s, b, p, q })
    }
}

/// Scaling-critical Fourier–Lebesgue regularity `s_crit(p) = -1/p` (0 at `p = ∞`).
pub fn critical_regularity(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        -1.0 / p
    }
}

fn lp_accumulate(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        return values.fold(0.0, f64::max);
    }
    if p == 2.0 {
        return values.map(|v| v * v).sum::<f64>().sqrt();
    }
    if p == 1.0 {
        return values.sum();
    }
    values.map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `‖⟨n⟩^s û(n)‖_{ℓ^p}`.
pub fn fl_norm(state: &FourierState, spec: NormSpec) -> f64 {
    if spec.p == 2.0 {
        // keeps `s = 0, p = 2` bitwise equal to `sqrt(mass)`
        let sum: f64 = state
            .modes()
            .map(|(n, c)| japanese(n as f64).powf(2.0 * spec.s) * c.norm_sqr())
            .sum();
        return sum.sqrt();
    }
    lp_accumulate(
        state.modes().map(|(n, c)| japanese(n as f64).powf(spec.s) * c.norm()),
        spec.p,
    )
}

/// Mass `μ = Σ |û(n)|²`.
pub fn mass(state: &FourierState) -> f64 {
    state.coeffs().iter().map(|c| c.norm_sqr()).sum()
}

/// Momentum `P = Σ n |û(n)|²`, summed in `±n` pairs so conjugate-symmetric
/// states give exactly zero.
pub fn momentum(state: &FourierState) -> f64 {
    truncated_momentum(state, state.mode_cap())
}

/// `P(P_{≤N} u)`.
pub fn truncated_momentum(state: &FourierState, cutoff: usize) -> f64 {
    let top = cutoff.min(state.mode_cap()) as i64;
    (1..=top)
        .map(|n| n as f64 * (state.get(n).norm_sqr() - state.get(-n).norm_sqr()))
        .sum()
}

/// Momentum carried by modes `|n| > N`.
pub fn high_momentum(state: &FourierState, cutoff: usize) -> f64 {
    let m = state.mode_cap() as i64;
    ((cutoff as i64 + 1)..=m)
        .map(|n| n as f64 * (state.get(n).norm_sqr() - state.get(-n).norm_sqr()))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MomentumVerdict {
    Converged { limit: f64, tol: f64 },
    Diverging,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumSeries {
    pub truncations: Vec<(usize, f64)>,
    pub verdict: MomentumVerdict,
}

/// Default tolerance for the `converged` verdict.
pub const MOMENTUM_TOL: f64 = 1e-6;

/// Successive increments growing by at least this factor count as non-decaying.
const NON_DECAY_RATIO: f64 = 0.95;

/// Evaluates `P(P_{≤N} f)` along `schedule` and classifies the sequence.
///
/// * converged: the last three increments are all below `tol·(1+|P_last|)`;
/// * diverging: `|P|` at least doubles across the last octave of the
///   schedule, or the last three increments share a sign, exceed the
///   tolerance and do not decay (each at least 0.95 of its predecessor);
/// * undetermined otherwise.
pub fn momentum_limit_diagnostic(
    state: &FourierState,
    schedule: &[usize],
    tol: f64,
) -> Result<MomentumSeries, NormError> {
    if schedule.len() < 4 || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NormError::BadSchedule(schedule.to_vec()));
    }
    let truncations: Vec<(usize, f64)> = schedule
        .iter()
        .map(|&n| (n, truncated_momentum(state, n)))
        .collect();
    let verdict = classify_momentum(&truncations, tol);
    Ok(MomentumSeries {
        truncations,
        verdict,
    })
}

pub fn classify_momentum(truncations: &[(usize, f64)], tol: f64) -> MomentumVerdict {
    let len = truncations.len();
    let last = truncations[len - 1];
    let scale = tol * (1.0 + last.1.abs());
    let diffs: Vec<f64> = truncations.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let tail = &diffs[diffs.len() - 3..];
    if tail.iter().all(|d| d.abs() < scale) {
        return MomentumVerdict::Converged {
            limit: last.1,
            tol,
        };
    }
    let octave_start = truncations
        .iter()
        .rev()
        .find(|(n, _)| 2 * n <= last.0)
        .map(|&(_, p)| p.abs());
    if let Some(start) = octave_start {
        if start > 0.0 && last.1.abs() >= 2.0 * start {
            return MomentumVerdict::Diverging;
        }
    }
    let same_sign = tail.iter().all(|d| d.signum() == tail[0].signum());
    let large = tail.iter().all(|d| d.abs() >= scale);
    let non_decaying = tail.windows(2).all(|w| w[1].abs() >= NON_DECAY_RATIO * w[0].abs());
    if same_sign && large && non_decaying {
        MomentumVerdict::Diverging
    } else {
        MomentumVerdict::Undetermined
    }
}

/// Raised-cosine window on `[t0, t0 + span]`, zero at both ends.
pub fn raised_cosine(t: f64, t0: f64, span: f64) -> f64 {
    let x = (t - t0) / span;
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let s = (std::f64::consts::PI * x).sin();
    s * s
}

/// Describes the time window used by [`xsb_norm`]; echoed into reports.
pub const XSB_WINDOW: &str = "raised cosine sin^2(pi (t - t0)/T) over the trajectory span";

/// Windowed modulation-space transform of a trajectory.
///
/// Returns, for each mode `n`, the samples `G_n(σ_j)` of
/// `(1/2π)∫ w(t) e^{-in³t} û(t,n) e^{-iσt} dt` with `σ = τ − n³`, together with
/// the frequency grid spacing. Working in the interaction picture keeps the
/// sampled signal slowly varying, so the `n³` shift never aliases.
fn modulation_transform(traj: &Trajectory) -> Result<(Vec<Vec<Complex64>>, Vec<f64>, f64), NormError> {
    let states = traj.states();
    let len = states.len();
    if len < 8 {
        return Err(NormError::TooFewSamples(len));
    }
    let h = traj.sample_dt();
    let t0 = states[0].time();
    let span = states[len - 1].time() - t0;
    let padded = good_fft_len(4 * len);
    let weights: Vec<f64> = states.iter().map(|s| raised_cosine(s.time(), t0, span)).collect();
    let profiles: Vec<FourierState> = states
        .iter()
        .map(|s| linear_propagator(s, -s.time()))
        .collect();
    let half = padded as i64 / 2;
    let dsigma = std::f64::consts::TAU / (padded as f64 * h);
    let sigmas: Vec<f64> = (0..padded as i64)
        .map(|j| if j > half { j - padded as i64 } else { j } as f64 * dsigma)
        .collect();
    let scale = h / std::f64::consts::TAU;
    let out = (0..2 * traj.mode_cap() + 1)
        .map(|idx| {
            let mut buf = vec![Complex64::new(0.0, 0.0); padded];
            for (k, (p, w)) in profiles.iter().zip(&weights).enumerate() {
                buf[k] = p.coeffs()[idx] * (*w * scale);
            }
            forward_dft_in_place(&mut buf);
            buf
        })
        .collect();
    Ok((out, sigmas, dsigma))
}

/// Windowed approximation of `‖⟨n⟩^s ⟨τ−n³⟩^b ℱ_{t,x}(w·u)‖_{ℓ^p_n L^q_τ}`.
///
/// This is an ambient-space proxy (an upper bound for the restriction norm
/// over the trajectory interval), not the exact continuum functional.
pub fn xsb_norm(traj: &Trajectory, spec: SpaceTimeNormSpec) -> Result<f64, NormError> {
    let spec = SpaceTimeNormSpec::new(spec.s, spec.b, spec.p, spec.q)?;
    let (transforms, sigmas, dsigma) = modulation_transform(traj)?;
    let m = traj.mode_cap() as i64;
    let per_mode = transforms.iter().enumerate().map(|(idx, g)| {
        let n = idx as i64 - m;
        let lq = if spec.q.is_infinite() {
            g.iter()
                .zip(&sigmas)
                .map(|(v, s)| japanese(*s).powf(spec.b) * v.norm())
                .fold(0.0, f64::max)
        } else {
            let sum: f64 = g
                .iter()
                .zip(&sigmas)
                .map(|(v, s)| (japanese(*s).powf(spec.b) * v.norm()).powf(spec.q))
                .sum();
            (sum * dsigma).powf(1.0 / spec.q)
        };
        japanese(n as f64).powf(spec.s) * lq
    });
    Ok(lp_accumulate(per_mode, spec.p))
}

/// `Z^{s,b}_p = X^{s,b}_{p,2} ∩ X^{s,b-1/2}_{p,1}`, reported as the sum of the two proxies.
pub fn zsb_norm(traj: &Trajectory, s: f64, b: f64, p: f64) -> Result<f64, NormError> {
    Ok(xsb_norm(traj, SpaceTimeNormSpec::new(s, b, p, 2.0)?)?
        + xsb_norm(traj, SpaceTimeNormSpec::new(s, b - 0.5, p, 1.0)?)?)
}

/// `sup_t ‖a(t) − b(t)‖_{FL^{s,p}}` over paired slices.
pub fn sup_distance(a: &[FourierState], b: &[FourierState], spec: NormSpec) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| fl_norm(&x.difference(y).expect("matching mode caps"), spec))
        .fold(0.0, f64::max)
}

/// `sup_t ‖u(t)‖_{FL^{s,p}}`.
pub fn sup_norm(states: &[FourierState], spec: NormSpec) -> f64 {
    states.iter().map(|s| fl_norm(s, spec)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{project_high, project_low};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_sided(m: usize, alpha: f64) -> FourierState {
        FourierState::from_fn(m, |n| {
            if n >= 1 {
                c((n as f64).powf(-alpha), 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }

    #[test]
    fn fl_norm_examples() {
        assert_eq!(fl_norm(&FourierState::zeros(4), NormSpec::H_HALF), 0.0);
        let s = FourierState::single_mode(8, 5, c(1.0, 0.0));
        let v = fl_norm(&s, NormSpec::new(0.5, 2.0).unwrap());
        assert!((v - 26f64.powf(0.25)).abs() < 1e-15);
        assert!((v - 2.258101).abs() < 1e-6);
        let r = FourierState::from_fn(3, |n| c(n as f64, 0.5));
        let l2 = r.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert_eq!(fl_norm(&r, NormSpec::L2), l2);
        assert_eq!(fl_norm(&r, NormSpec::L2), mass(&r).sqrt());
        let sup = fl_norm(&r, NormSpec::new(0.0, f64::INFINITY).unwrap());
        assert!((sup - (9.25f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bad_exponents_rejected() {
        assert!(NormSpec::new(0.0, 0.5).is_err());
        assert!(SpaceTimeNormSpec::new(0.0, 0.5, f64::INFINITY, 2.0).is_err());
        assert!(SpaceTimeNormSpec::new(0.0, 0.5, 2.0, 0.0).is_err());
    }

    #[test]
    fn mass_examples() {
        assert_eq!(mass(&FourierState::zeros(3)), 0.0);
        let a = 5f64.powf(-0.5);
        let s = FourierState::single_mode(6, 5, c(a, 0.0));
        assert!((mass(&s) - 0.2).abs() < 1e-15);
        let r = FourierState::from_fn(4, |n| c(1.0 / (1 + n * n) as f64, n as f64));
        let rotated = r.scaled(Complex64::from_polar(1.0, 0.7));
        assert!((mass(&rotated) - mass(&r)).abs() < 1e-14 * mass(&r));
    }

    #[test]
    fn momentum_examples() {
        let r = FourierState::from_fn(6, |n| c(1.0 / (1.0 + n.abs() as f64), 0.0));
        assert_eq!(momentum(&r), 0.0);
        let s = FourierState::single_mode(6, 5, c(5f64.powf(-0.5), 0.0));
        assert!((momentum(&s) - 1.0).abs() < 1e-15);
        // partial-sum oracle: Σ_{n≤100} n^{-0.8}
        let data = one_sided(100, 0.9);
        let oracle: f64 = (1..=100).map(|n| (n as f64).powf(-0.8)).sum();
        assert!((momentum(&data) - oracle).abs() < 1e-12);
        assert!((momentum(&data) - 8.1344).abs() < 1e-4);
    }

    #[test]
    fn truncated_momentum_examples() {
        let data = one_sided(100, 0.9);
        assert_eq!(truncated_momentum(&data, 200), momentum(&data));
        assert_eq!(truncated_momentum(&data, 0), 0.0);
        let mut prev = 0.0;
        for n in 1..=100 {
            let p = truncated_momentum(&data, n);
            assert!(p > prev);
            prev = p;
        }
        assert_eq!(truncated_momentum(&data, 7), momentum(&project_low(&data, 7)));
        let split = truncated_momentum(&data, 40) + momentum(&project_high(&data, 40));
        assert!((split - momentum(&data)).abs() <= 1e-14 * momentum(&data));
        assert!((high_momentum(&data, 40) - momentum(&project_high(&data, 40))).abs() < 1e-13);
    }

    #[test]
    fn diagnostic_verdicts() {
        let schedule: Vec<usize> = (4..=12).map(|k| 1usize << k).collect();
        let real = FourierState::from_fn(4096, |n| c((1.0 + n.abs() as f64).powf(-0.9), 0.0));
        let series = momentum_limit_diagnostic(&real, &schedule, MOMENTUM_TOL).unwrap();
        assert!(series.truncations.iter().all(|(_, p)| *p == 0.0));
        assert_eq!(
            series.verdict,
            MomentumVerdict::Converged {
                limit: 0.0,
                tol: MOMENTUM_TOL
            }
        );
        let sym = FourierState::from_fn(4096, |n| c(1.0 / japanese(n as f64), 0.0));
        let series = momentum_limit_diagnostic(&sym, &schedule, MOMENTUM_TOL).unwrap();
        assert!(matches!(series.verdict, MomentumVerdict::Converged { .. }));
        let data = one_sided(4096, 0.9);
        let series = momentum_limit_diagnostic(&data, &schedule, MOMENTUM_TOL).unwrap();
        assert_eq!(series.verdict, MomentumVerdict::Diverging);
        assert!(momentum_limit_diagnostic(&data, &[1, 2, 3], MOMENTUM_TOL).is_err());
        assert!(momentum_limit_diagnostic(&data, &[1, 2, 2, 3], MOMENTUM_TOL).is_err());
    }

    #[test]
    fn summable_one_sided_data_is_not_diverging() {
        // Σ n^{1-2·1.5} = Σ n^{-2} converges; increments decay by ~2 per octave
        let schedule: Vec<usize> = (4..=12).map(|k| 1usize << k).collect();
        let data = one_sided(4096, 1.5);
        let series = momentum_limit_diagnostic(&data, &schedule, MOMENTUM_TOL).unwrap();
        assert_ne!(series.verdict, MomentumVerdict::Diverging);
    }

    #[test]
    fn critical_exponent() {
        assert_eq!(critical_regularity(2.0), -0.5);
        assert_eq!(critical_regularity(f64::INFINITY), 0.0);
    }

    #[test]
    fn window_shape() {
        assert_eq!(raised_cosine(0.0, 0.0, 2.0), 0.0);
        assert!((raised_cosine(1.0, 0.0, 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(raised_cosine(3.0, 0.0, 2.0), 0.0);
    }
}
