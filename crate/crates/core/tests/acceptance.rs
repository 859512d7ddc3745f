//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! The process fails when a criterion outside `KNOWN_SHORTFALLS` fails, or
//! when a known shortfall starts passing (so the list stays accurate).

use std::time::{Duration, Instant};

use mkdv_lab::dynamics::{
    decompose_nonlinearity, nonlinearity, phi_resonance, residual_check, solve, EquationSpec, Sign, Variant,
};
use mkdv_lab::experiments::{
    exp_conservation, exp_gauge_equivalence, exp_illposedness, exp_multiplier_probe, exp_nonexistence,
    exp_random_momentum, loglog_slope, random_momentum_second_moment, ConservationConfig, ExperimentReport,
    GaugeConfig, IcPreset, IllposednessConfig, MultiplierConfig, NonexistenceConfig, RandomMomentumConfig,
};
use mkdv_lab::norms::momentum;
use mkdv_lab::spectral::FourierState;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail for reasons recorded with the project notes.
const KNOWN_SHORTFALLS: &[u32] = &[7, 9];

const PLANE_WAVE_TOL: f64 = 1e-8;
const DECOMPOSITION_TOL: f64 = 1e-12;
const CONSERVATION_TOL: f64 = 1e-8;
const GAUGE_TOL: f64 = 1e-6;
const SEPARATION_FLOOR: f64 = 1.9;
const AGREEMENT_TOL: f64 = 1e-6;
const STANDARD_ERRORS: f64 = 4.0;
const STABILIZATION_TOL: f64 = 0.05;
const ORDER: f64 = 4.0;
const ORDER_TOL: f64 = 0.3;
const RESIDUAL_ORDER: f64 = 2.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn verdict_value(report: &ExperimentReport, name: &str) -> (bool, f64) {
    let v = report.find_verdict(name).unwrap_or_else(|| panic!("report {} has no verdict {name}", report.name));
    (v.passed, v.value)
}

fn sup_coeff_error(state: &FourierState, exact: impl Fn(i64) -> Complex64) -> f64 {
    // ℓ¹ of the coefficient error bounds the sup over x
    state.modes().map(|(n, c)| (c - exact(n)).norm()).sum()
}

fn plane_wave_error(mode: i64, amplitude: f64, omega: f64, t_end: f64, dt: f64, cap: usize) -> (f64, Vec<f64>) {
    let ic = FourierState::single_mode(cap, mode, Complex64::new(amplitude, 0.0));
    let traj = solve(&ic, EquationSpec::new(Variant::Mkdv, Sign::Plus), t_end, dt).expect("plane waves integrate");
    let err = traj
        .states()
        .iter()
        .map(|s| {
            let t = s.time();
            sup_coeff_error(s, |n| if n == mode { Complex64::from_polar(amplitude, omega * t) } else { Complex64::new(0.0, 0.0) })
        })
        .fold(0.0, f64::max);
    let residual = residual_check(&traj).expect("long enough");
    (err, residual)
}

fn criterion_1() -> Outcome {
    let clock = Instant::now();
    let amplitude = 5f64.powf(-0.5);
    let ic = IcPreset::PlaneWave {
        mode: 5,
        amplitude: 1.0,
        s: 0.5,
    }
    .build(32)
    .unwrap();
    assert_eq!(ic.get(5), Complex64::new(amplitude, 0.0));
    let traj = solve(&ic, EquationSpec::new(Variant::Mkdv, Sign::Plus), 0.1, 1e-4).unwrap();
    let err = traj
        .states()
        .iter()
        .map(|s| {
            let t = s.time();
            sup_coeff_error(s, |n| if n == 5 { Complex64::from_polar(amplitude, 126.0 * t) } else { Complex64::new(0.0, 0.0) })
        })
        .fold(0.0, f64::max);
    let elapsed = clock.elapsed();
    outcome(
        err <= PLANE_WAVE_TOL && elapsed < Duration::from_secs(5),
        format!("plane wave sup error {err:.3e} (tol {PLANE_WAVE_TOL:.0e}), {:.2} s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0usize;
    let mut zero_mismatches = 0usize;
    let mut zeros = 0usize;
    let total = 1_000_000;
    for k in 0..total {
        let mut n = [0i64; 3];
        for x in &mut n {
            *x = rng.random_range(-2000..=2000);
        }
        // force a vanishing pairwise sum on a tenth of the triples
        if k % 10 == 0 {
            let (i, j) = [(0, 1), (0, 2), (1, 2)][k / 10 % 3];
            n[j] = -n[i];
        }
        let phi = phi_resonance(n[0], n[1], n[2]).unwrap();
        let [a, b, c] = n.map(|x| x as i128);
        let oracle = (a + b + c).pow(3) - a.pow(3) - b.pow(3) - c.pow(3);
        mismatches += usize::from(phi != oracle);
        let pair_zero = a + b == 0 || a + c == 0 || b + c == 0;
        zeros += usize::from(pair_zero);
        zero_mismatches += usize::from((phi == 0) != pair_zero);
    }
    outcome(
        mismatches == 0 && zero_mismatches == 0 && zeros >= total / 10,
        format!("{total} triples, {mismatches} value mismatches, {zero_mismatches} zero-set mismatches ({zeros} resonant)"),
    )
}

/// Direct Fourier-side evaluation of each right-hand side, `O(M³)`.
fn oracle_rhs(state: &FourierState, eq: EquationSpec) -> FourierState {
    let m = state.mode_cap() as i64;
    let i = Complex64::i();
    let mu: f64 = state.modes().map(|(_, c)| c.norm_sqr()).sum();
    let p: f64 = state.modes().map(|(n, c)| n as f64 * c.norm_sqr()).sum();
    let sigma = eq.sign.value();
    FourierState::from_fn(state.mode_cap(), |n| {
        // |u|² u_x = u · ū · u_x, with ū having coefficients conj(û(−k))
        let mut acc = Complex64::new(0.0, 0.0);
        for n1 in -m..=m {
            for n2 in -m..=m {
                let n3 = n - n1 - n2;
                if n3.abs() <= m {
                    acc += state.get(n1) * state.get(-n2).conj() * i * n3 as f64 * state.get(n3);
                }
            }
        }
        let c = state.get(n);
        if eq.variant != Variant::Mkdv {
            acc -= i * mu * n as f64 * c;
        }
        if eq.variant == Variant::Mkdv2 {
            acc -= i * p * c;
        }
        sigma * acc
    })
}

fn max_diff(a: &FourierState, b: &FourierState) -> f64 {
    a.modes().map(|(n, c)| (c - b.get(n)).norm()).fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let cap = rng.random_range(0..=16usize);
        let state = FourierState::from_fn(cap, |n| {
            let scale = 1.0 / (1.0 + n.abs() as f64);
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        });
        let sign = if k % 2 == 0 { Sign::Plus } else { Sign::Minus };
        let parts = decompose_nonlinearity(&state).unwrap();
        let i = Complex64::i();
        let p = momentum(&state);
        let sigma = sign.value();
        let split1 = parts.nonresonant.map_modes(|n, nr| sigma * (nr - parts.resonant.get(n) + i * p * state.get(n)));
        let split2 = parts.nonresonant.map_modes(|n, nr| sigma * (nr - parts.resonant.get(n)));
        for (variant, split) in [(Variant::Mkdv1, &split1), (Variant::Mkdv2, &split2)] {
            let eq = EquationSpec::new(variant, sign);
            let oracle = oracle_rhs(&state, eq);
            worst = worst
                .max(max_diff(split, &oracle))
                .max(max_diff(&nonlinearity(&state, eq), &oracle))
                .max(max_diff(&parts.recombine(eq), &oracle));
        }
        let eq = EquationSpec::new(Variant::Mkdv, sign);
        worst = worst.max(max_diff(&nonlinearity(&state, eq), &oracle_rhs(&state, eq)));
    }
    let elapsed = clock.elapsed();
    outcome(
        worst <= DECOMPOSITION_TOL && elapsed < Duration::from_secs(30),
        format!("100 states, worst componentwise gap {worst:.3e} (tol {DECOMPOSITION_TOL:.0e}), {:.2} s", elapsed.as_secs_f64()),
    )
}

fn criterion_4() -> Outcome {
    let mut worst_mass = 0.0f64;
    let mut worst_momentum = 0.0f64;
    let mut failures = 0;
    for seed in 1..=20u64 {
        for variant in [Variant::Mkdv, Variant::Mkdv1, Variant::Mkdv2] {
            let cfg = ConservationConfig {
                variant,
                ic: IcPreset::RandomSmooth { decay: 0.5, seed, modes: 8 },
                ..Default::default()
            };
            let report = exp_conservation(&cfg).unwrap();
            worst_mass = worst_mass.max(report.scalars["mass_drift"]);
            worst_momentum = worst_momentum.max(report.scalars["momentum_drift"]);
            failures += usize::from(!report.all_passed());
        }
    }
    outcome(
        failures == 0 && worst_mass <= CONSERVATION_TOL && worst_momentum <= CONSERVATION_TOL,
        format!("60 runs, worst relative mass drift {worst_mass:.3e}, worst momentum drift {worst_momentum:.3e} (tol {CONSERVATION_TOL:.0e})"),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    let mut passed = true;
    for sign in [Sign::Plus, Sign::Minus] {
        let report = exp_gauge_equivalence(&GaugeConfig { sign, ..Default::default() }).unwrap();
        for v in &report.verdicts {
            worst = worst.max(v.value);
            passed &= v.passed && v.value <= GAUGE_TOL;
        }
        passed &= report.verdicts.len() == 3;
    }
    outcome(passed, format!("G1, G2 and G2∘G1 comparisons, worst sup-t FL^{{1/2,2}} gap {worst:.3e} (tol {GAUGE_TOL:.0e})"))
}

fn criterion_6() -> Outcome {
    let report = exp_illposedness(&IllposednessConfig::default()).unwrap();
    let (d_ok, dist) = verdict_value(&report, "solution_distance");
    let (i_ok, inv) = verdict_value(&report, "initial_distance_inverse_n");
    let (t_ok, tn) = verdict_value(&report, "separation_time_within_inverse_n");
    let (a_ok, agree) = verdict_value(&report, "solver_agreement");
    let (e_ok, exact) = verdict_value(&report, "solver_exact_small_modes");
    outcome(
        d_ok && i_ok && t_ok && a_ok && e_ok && dist > SEPARATION_FLOOR && agree <= AGREEMENT_TOL,
        format!(
            "min distance at t_n {dist:.4} (floor {SEPARATION_FLOOR}), n·‖Δu₀‖ deviation {inv:.2e}, n·t_n ≤ {tn:.3}, \
             analytic/solver gap {agree:.2e} (full-state {exact:.2e})"
        ),
    )
}

fn criterion_7() -> Outcome {
    let clock = Instant::now();
    let report = exp_nonexistence(&NonexistenceConfig::default()).unwrap();
    let elapsed = clock.elapsed();
    let (a, shrink) = verdict_value(&report, "v_cauchy_shrinks");
    let (b, floor) = verdict_value(&report, "u_cauchy_bounded_below");
    let (c, _) = verdict_value(&report, "momentum_diverges");
    let (d, pairing) = verdict_value(&report, "pairing_decays");
    let controls = ["control_momentum_zero", "control_gauge_identity", "control_pairing_persists"]
        .iter()
        .all(|n| verdict_value(&report, n).0);
    let fast = elapsed < Duration::from_secs(120);
    outcome(
        a && b && c && d && controls && fast,
        format!(
            "(a) v shrink {shrink:.3} [{}], (b) u gap/‖v‖ {floor:.3} [{}], (c) momentum diverging [{}], \
             (d) pairing ratio {pairing:.3} [{}], controls [{}], {:.1} s",
            tag(a),
            tag(b),
            tag(c),
            tag(d),
            tag(controls),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = RandomMomentumConfig::default();
    let report = exp_random_momentum(&cfg).unwrap();
    let again = exp_random_momentum(&cfg).unwrap();
    let same_bytes = report.to_json() == again.to_json();
    let (m_ok, z_mean) = verdict_value(&report, "mean_within_standard_errors");
    let (s_ok, z_second) = verdict_value(&report, "second_moment_within_standard_errors");
    let analytic = random_momentum_second_moment(cfg.modes);
    outcome(
        m_ok && s_ok && z_second <= STANDARD_ERRORS && same_bytes,
        format!(
            "second moment {:.4} vs {analytic:.4}: z = {z_second:.2} (mean z = {z_mean:.2}), reproducible bytes [{}]",
            report.scalars["second_moment"],
            tag(same_bytes)
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    for (s, p) in [(0.5, 2.0), (0.75, 8.0)] {
        let cfg = MultiplierConfig {
            s_list: vec![s],
            p_list: vec![p],
            stab_doublings: 1,
            thr_stab: STABILIZATION_TOL,
            ..Default::default()
        };
        let report = exp_multiplier_probe(&cfg).unwrap();
        let (ok, change) = verdict_value(&report, &format!("stabilized_s{s}_p{p}"));
        passed &= ok;
        lines.push(format!("(s,p)=({s},{p}) last-doubling change {:.2}% [{}]", 100.0 * change, tag(ok)));
    }
    outcome(passed, lines.join(", "))
}

fn criterion_10() -> Outcome {
    // N = 4, a = 3, s = 0: phase speed 64 + 9·4
    let dts = [1e-3, 5e-4, 2.5e-4];
    let mut errors = Vec::new();
    let mut residuals = Vec::new();
    for &dt in &dts {
        let (err, res) = plane_wave_error(4, 3.0, 100.0, 0.1, dt, 8);
        errors.push((dt, err));
        residuals.push((dt, res.iter().cloned().fold(0.0, f64::max)));
    }
    let order = loglog_slope(&errors).unwrap();
    let residual_order = loglog_slope(&residuals).unwrap();
    outcome(
        (order - ORDER).abs() <= ORDER_TOL && (residual_order - RESIDUAL_ORDER).abs() <= ORDER_TOL,
        format!(
            "error slope {order:.3} (errors {:.2e}, {:.2e}, {:.2e}), residual slope {residual_order:.3}",
            errors[0].1, errors[1].1, errors[2].1
        ),
    )
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fail"
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "exact plane-wave solution", criterion_1),
        (2, "resonance identity", criterion_2),
        (3, "nonlinearity decomposition", criterion_3),
        (4, "mass and momentum conservation", criterion_4),
        (5, "gauge equivalence of the flows", criterion_5),
        (6, "plane-wave separation demonstration", criterion_6),
        (7, "non-existence mechanism", criterion_7),
        (8, "random-data momentum", criterion_8),
        (9, "multiplier stabilization", criterion_9),
        (10, "order of accuracy", criterion_10),
    ];
    let mut unexpected = Vec::new();
    let mut passes = 0;
    for (id, title, run) in criteria {
        let clock = Instant::now();
        let Outcome { passed, detail } = run();
        let known = KNOWN_SHORTFALLS.contains(&id);
        println!(
            "{} criterion {id:>2} {title}: {detail} [{:.1} s]{}",
            if passed { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64(),
            if known && !passed { " (known shortfall)" } else { "" }
        );
        passes += usize::from(passed);
        if passed == known {
            unexpected.push(id);
        }
    }
    println!("acceptance: {passes}/10 PASS, known shortfalls {KNOWN_SHORTFALLS:?}");
    if !unexpected.is_empty() {
        eprintln!("acceptance: unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
