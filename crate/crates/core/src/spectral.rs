//! Fourier representation of periodic functions on the torus `[0, 2π)`.
//!
//! Convention: `û(n) = (1/2π) ∫ u(x) e^{-inx} dx` and `u(x) = Σ û(n) e^{inx}`,
//! so that `Σ |û(n)|²` is the normalised mass `(1/2π) ‖u‖²_{L²}`.
//!
//! States store the symmetric block of modes `n ∈ [-M, M]` with an explicit
//! `n = 0` slot; FFT ordering never leaks out of this module.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid of {points} points aliases a state with mode cap {mode_cap} (need at least {needed})")]
    Aliasing {
        points: usize,
        mode_cap: usize,
        needed: usize,
    },
    #[error("mode caps differ: {0} vs {1}")]
    ModeCapMismatch(usize, usize),
    #[error("coefficient vector of length {len} does not match mode cap {mode_cap} (expected {expected})")]
    BadLength {
        len: usize,
        mode_cap: usize,
        expected: usize,
    },
}

/// Japanese bracket `⟨n⟩ = (1 + n²)^{1/2}`.
#[inline]
pub fn japanese(n: f64) -> f64 {
    1f64.hypot(n)
}

/// Smallest length `≥ min_len` of the form `2^a 3^b 5^c`.
pub fn good_fft_len(min_len: usize) -> usize {
    let mut n = min_len.max(1);
    loop {
        let mut m = n;
        for f in [2, 3, 5] {
            while m % f == 0 {
                m /= f;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// One time slice: complex amplitudes on modes `-M..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierState {
    mode_cap: usize,
    time: f64,
    coeffs: Vec<Complex64>,
}

impl FourierState {
    pub fn zeros(mode_cap: usize) -> Self {
        Self {
            mode_cap,
            time: 0.0,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * mode_cap + 1],
        }
    }

    /// Builds a state from coefficients laid out as `n = -M, ..., M`.
    pub fn from_coeffs(mode_cap: usize, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        let expected = 2 * mode_cap + 1;
        if coeffs.len() != expected {
            return Err(SpectralError::BadLength {
                len: coeffs.len(),
                mode_cap,
                expected,
            });
        }
        Ok(Self {
            mode_cap,
            time: 0.0,
            coeffs,
        })
    }

    pub fn from_fn(mode_cap: usize, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let m = mode_cap as i64;
        Self {
            mode_cap,
            time: 0.0,
            coeffs: (-m..=m).map(&mut f).collect(),
        }
    }

    /// A single Fourier mode `amplitude · e^{i n x}`.
    pub fn single_mode(mode_cap: usize, n: i64, amplitude: Complex64) -> Self {
        let mut s = Self::zeros(mode_cap);
        s.set(n, amplitude);
        s
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn mode_cap(&self) -> usize {
        self.mode_cap
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    #[inline]
    pub fn index_of(&self, n: i64) -> Option<usize> {
        let m = self.mode_cap as i64;
        (n.abs() <= m).then(|| (n + m) as usize)
    }

    /// Coefficient at mode `n`; zero outside `[-M, M]`.
    #[inline]
    pub fn get(&self, n: i64) -> Complex64 {
        self.index_of(n)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Sets mode `n`. Panics if `|n| > M`.
    pub fn set(&mut self, n: i64, value: Complex64) {
        let i = self
            .index_of(n)
            .unwrap_or_else(|| panic!("mode {n} outside cap {}", self.mode_cap));
        self.coeffs[i] = value;
    }

    /// Iterates `(n, û(n))` in increasing `n`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let m = self.mode_cap as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - m, c))
    }

    /// Applies `f(n, û(n))` to every coefficient, keeping the time stamp.
    pub fn map_modes(&self, mut f: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let m = self.mode_cap as i64;
        Self {
            mode_cap: self.mode_cap,
            time: self.time,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| f(i as i64 - m, c))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.map_modes(|_, c| c * factor)
    }

    /// `self - other` coefficientwise (time taken from `self`).
    pub fn difference(&self, other: &Self) -> Result<Self, SpectralError> {
        if self.mode_cap != other.mode_cap {
            return Err(SpectralError::ModeCapMismatch(self.mode_cap, other.mode_cap));
        }
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        Ok(out)
    }

    /// `self + other` coefficientwise (time taken from `self`).
    pub fn sum(&self, other: &Self) -> Result<Self, SpectralError> {
        if self.mode_cap != other.mode_cap {
            return Err(SpectralError::ModeCapMismatch(self.mode_cap, other.mode_cap));
        }
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(out)
    }

    /// Maps `û(n) ↦ conj(û(-n))`, i.e. `u ↦ ū`.
    pub fn conjugate_reflect(&self) -> Self {
        let mut coeffs: Vec<_> = self.coeffs.iter().map(|c| c.conj()).collect();
        coeffs.reverse();
        Self {
            mode_cap: self.mode_cap,
            time: self.time,
            coeffs,
        }
    }

    /// True when `û(-n) = conj(û(n))` for all `n` within `tol`.
    pub fn is_real_valued(&self, tol: f64) -> bool {
        let m = self.mode_cap as i64;
        (0..=m).all(|n| (self.get(-n) - self.get(n).conj()).norm() <= tol)
    }

    /// Symmetrises to the nearest conjugate-symmetric state.
    pub fn real_part(&self) -> Self {
        self.map_modes(|n, c| 0.5 * (c + self.get(-n).conj()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Number of exactly nonzero coefficients.
    pub fn support_len(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != Complex64::new(0.0, 0.0)).count()
    }

    /// Same function on a different mode cap (truncating or zero-padding).
    pub fn with_mode_cap(&self, mode_cap: usize) -> Self {
        let mut out = Self::zeros(mode_cap).with_time(self.time);
        for (n, c) in self.modes() {
            if let Some(i) = out.index_of(n) {
                out.coeffs[i] = c;
            }
        }
        out
    }
}

/// Point values on the equispaced grid `x_j = 2πj/K`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn from_fn(points: usize, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let h = std::f64::consts::TAU / points as f64;
        Self {
            samples: (0..points).map(|j| f(h * j as f64)).collect(),
        }
    }

    pub fn points(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> {
        let h = std::f64::consts::TAU / self.samples.len() as f64;
        (0..self.samples.len()).map(move |j| h * j as f64)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalised forward DFT `X_j = Σ_k x_k e^{-2πi jk/L}` in place.
pub fn forward_dft_in_place(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

fn check_points(mode_cap: usize, points: usize) -> Result<(), SpectralError> {
    let needed = 2 * mode_cap + 1;
    if points < needed {
        return Err(SpectralError::Aliasing {
            points,
            mode_cap,
            needed,
        });
    }
    Ok(())
}

/// Reusable pair of FFT plans for one `(M, K)` combination.
///
/// Plans come from a per-thread planner; a `Transform` itself is not shared.
pub struct Transform {
    mode_cap: usize,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Transform {
    pub fn new(mode_cap: usize, points: usize) -> Result<Self, SpectralError> {
        check_points(mode_cap, points)?;
        let forward = plan(points, false);
        let inverse = plan(points, true);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            mode_cap,
            points,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    /// Transform for alias-free cubic products on mode cap `M`.
    pub fn dealiased(mode_cap: usize) -> Self {
        Self::new(mode_cap, good_fft_len(4 * mode_cap + 1)).expect("4M+1 points always suffice")
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn mode_cap(&self) -> usize {
        self.mode_cap
    }

    /// Writes `Σ_n w(n) c(n) e^{inx_j}` into `out` for coefficients laid out on `[-M, M]`.
    pub fn synthesize(
        &mut self,
        coeffs: &[Complex64],
        weight: impl Fn(i64) -> Complex64,
        out: &mut Vec<Complex64>,
    ) {
        debug_assert_eq!(coeffs.len(), 2 * self.mode_cap + 1);
        let m = self.mode_cap as i64;
        let k = self.points as i64;
        out.clear();
        out.resize(self.points, Complex64::new(0.0, 0.0));
        for (i, &c) in coeffs.iter().enumerate() {
            let n = i as i64 - m;
            out[n.rem_euclid(k) as usize] = weight(n) * c;
        }
        self.inverse.process_with_scratch(out, &mut self.scratch);
    }

    /// Projects grid samples onto modes `[-M, M]`, overwriting `samples`.
    pub fn analyze(&mut self, samples: &mut [Complex64], coeffs: &mut [Complex64]) {
        debug_assert_eq!(samples.len(), self.points);
        self.forward.process_with_scratch(samples, &mut self.scratch);
        let m = self.mode_cap as i64;
        let k = self.points as i64;
        let norm = 1.0 / self.points as f64;
        for (i, c) in coeffs.iter_mut().enumerate() {
            let n = i as i64 - m;
            *c = samples[n.rem_euclid(k) as usize] * norm;
        }
    }
}

/// Evaluates the state on `points` equispaced grid points.
pub fn to_physical(state: &FourierState, points: usize) -> Result<GridFunction, SpectralError> {
    let mut t = Transform::new(state.mode_cap, points)?;
    let mut out = Vec::new();
    t.synthesize(&state.coeffs, |_| Complex64::new(1.0, 0.0), &mut out);
    Ok(GridFunction { samples: out })
}

/// Discrete Fourier coefficients of grid samples on modes `[-M, M]`.
pub fn to_fourier(grid: &GridFunction, mode_cap: usize) -> Result<FourierState, SpectralError> {
    let mut t = Transform::new(mode_cap, grid.points())?;
    let mut samples = grid.samples.clone();
    let mut out = FourierState::zeros(mode_cap);
    t.analyze(&mut samples, &mut out.coeffs);
    Ok(out)
}

/// Dirichlet projection `P_{≤N}`.
pub fn project_low(state: &FourierState, cutoff: usize) -> FourierState {
    let cutoff = cutoff as i64;
    state.map_modes(|n, c| if n.abs() <= cutoff { c } else { Complex64::new(0.0, 0.0) })
}

/// `P_{>N} = Id − P_{≤N}`.
pub fn project_high(state: &FourierState, cutoff: usize) -> FourierState {
    let cutoff = cutoff as i64;
    state.map_modes(|n, c| if n.abs() > cutoff { c } else { Complex64::new(0.0, 0.0) })
}

/// `(in)^k` computed without going through `powi` on a complex number.
pub fn derivative_symbol(n: i64, order: u32) -> Complex64 {
    let mag = (n as f64).powi(order as i32);
    match order % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

/// `∂_x^k`: multiplies `û(n)` by `(in)^k`.
pub fn derivative(state: &FourierState, order: u32) -> FourierState {
    state.map_modes(|n, c| derivative_symbol(n, order) * c)
}

/// Fourier coefficients on `[-M, M]` of the pointwise product `a·b·c`.
///
/// The grid is padded to at least `4M+1` points, which makes the result equal
/// to the exact discrete triple convolution on the retained modes.
pub fn dealiased_triple_product(
    a: &FourierState,
    b: &FourierState,
    c: &FourierState,
) -> Result<FourierState, SpectralError> {
    for other in [b, c] {
        if other.mode_cap != a.mode_cap {
            return Err(SpectralError::ModeCapMismatch(a.mode_cap, other.mode_cap));
        }
    }
    let mut t = Transform::dealiased(a.mode_cap);
    let one = |_| Complex64::new(1.0, 0.0);
    let (mut pa, mut pb, mut pc) = (Vec::new(), Vec::new(), Vec::new());
    t.synthesize(&a.coeffs, one, &mut pa);
    t.synthesize(&b.coeffs, one, &mut pb);
    t.synthesize(&c.coeffs, one, &mut pc);
    for ((x, y), z) in pa.iter_mut().zip(&pb).zip(&pc) {
        *x *= y * z;
    }
    let mut out = FourierState::zeros(a.mode_cap).with_time(a.time);
    t.analyze(&mut pa, &mut out.coeffs);
    Ok(out)
}

/// Triple convolution restricted to `[-M, M]`, summing only over nonzero
/// coefficients. Cost is the product of the three support sizes.
pub fn sparse_triple_product(
    a: &FourierState,
    b: &FourierState,
    c: &FourierState,
) -> Result<FourierState, SpectralError> {
    for other in [b, c] {
        if other.mode_cap != a.mode_cap {
            return Err(SpectralError::ModeCapMismatch(a.mode_cap, other.mode_cap));
        }
    }
    let support = |s: &FourierState| -> Vec<(i64, Complex64)> {
        s.modes().filter(|(_, v)| *v != Complex64::new(0.0, 0.0)).collect()
    };
    let (sa, sb, sc) = (support(a), support(b), support(c));
    let mut out = FourierState::zeros(a.mode_cap).with_time(a.time);
    let m = a.mode_cap as i64;
    for &(n1, x) in &sa {
        for &(n2, y) in &sb {
            let xy = x * y;
            for &(n3, z) in &sc {
                let n = n1 + n2 + n3;
                if n.abs() <= m {
                    out.coeffs[(n + m) as usize] += xy * z;
                }
            }
        }
    }
    Ok(out)
}
