//! Closed-form finite square well, canonical microstate {0, ħk, 0} at the
//! origin.
//!
//! Inside the well W = ħkq. Beyond the wall, with u = κ(q − a) and the basis
//! {sinh u, cosh u},
//!
//! ```text
//! W = ħ arctan[(A₂ sinh u + B₂ cosh u) / (C₂ sinh u + D₂ cosh u)]
//!   = ħ [ka + arctan((k/κ) tanh u)]
//! ```
//!
//! on the continuous branch. Everything is odd in q (W, time) or even (p).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::integrator::OdeState;
use crate::io::format_float;
use crate::model::{Constants, SquareWell};
use crate::rootfind::{illinois, RootOptions};
use crate::scalar::Real;

/// Uniform k-grid used to bracket eigenvalues.
pub const SCAN_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveNumbers<T> {
    pub k: T,
    pub kappa: T,
}

impl<T: Real> WaveNumbers<T> {
    /// k² + κ².
    pub fn total_squared(&self) -> T {
        self.k * self.k + self.kappa * self.kappa
    }
}

/// k = (2mE)^{1/2}/ħ and κ = (2m(V0 − E))^{1/2}/ħ for 0 < E ≤ V0.
pub fn wavenumbers<T: Real>(well: &SquareWell<T>, energy: T) -> Result<WaveNumbers<T>> {
    check_energy(well, energy, true)?;
    let c = well.constants;
    let two_m = T::lit(2.0) * c.mass;
    Ok(WaveNumbers { k: (two_m * energy).sqrt() / c.hbar, kappa: (two_m * (well.v0 - energy)).sqrt() / c.hbar })
}

fn check_energy<T: Real>(well: &SquareWell<T>, energy: T, allow_threshold: bool) -> Result<()> {
    let ok = energy > T::zero() && if allow_threshold { energy <= well.v0 } else { energy < well.v0 };
    if !ok {
        return Err(Error::EnergyOutOfRange { energy: energy.as_f64(), lo: 0.0, hi: well.v0.as_f64() });
    }
    Ok(())
}

/// (2mV0)^{1/2}/ħ, the wave number at threshold.
pub fn k_upper<T: Real>(well: &SquareWell<T>) -> T {
    let c = well.constants;
    (T::lit(2.0) * c.mass * well.v0).sqrt() / c.hbar
}

fn wavenumbers_from_k<T: Real>(well: &SquareWell<T>, k: T) -> WaveNumbers<T> {
    let ub = k_upper(well);
    WaveNumbers { k, kappa: ((ub - k) * (ub + k)).max(T::zero()).sqrt() }
}

fn energy_from_k<T: Real>(well: &SquareWell<T>, k: T) -> T {
    let c = well.constants;
    (c.hbar * k).powi(2) / (T::lit(2.0) * c.mass)
}

/// Coefficients {A, B, C, D} of a Möbius-form reduced action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusCoefficients<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> MobiusCoefficients<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    /// AD − BC.
    pub fn determinant(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    /// {GA, GB, C/G, D/G}.
    pub fn scaled(&self, g: T) -> Self {
        Self::new(g * self.a, g * self.b, self.c / g, self.d / g)
    }

    /// (Aφ + Bϑ)/(Cφ + Dϑ) as a numerator/denominator pair.
    pub fn ratio_parts(&self, phi: T, theta: T) -> (T, T) {
        (self.a * phi + self.b * theta, self.c * phi + self.d * theta)
    }
}

/// Exterior coefficients for the {sinh κ(q−a), cosh κ(q−a)} basis that make
/// W C²-continuous at the wall.
pub fn exterior_coefficients<T: Real>(wn: &WaveNumbers<T>, a: T) -> Result<MobiusCoefficients<T>> {
    if !(wn.kappa > T::zero()) {
        return Err(Error::ThresholdDegenerate);
    }
    if !(wn.k > T::zero()) {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let r = (wn.k / wn.kappa).sqrt();
    let ri = (wn.kappa / wn.k).sqrt();
    let (s, c) = (wn.k * a).sin_cos();
    Ok(MobiusCoefficients::new(r * c, ri * s, -r * s, ri * c))
}

/// Unwraps arctan(num/den) along increasing q by counting sign changes of
/// the denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchTracker {
    pub sheet: i64,
    pub last_denominator_sign: i8,
}

impl BranchTracker {
    pub fn new<T: Real>(initial_denominator: T) -> Self {
        Self { sheet: 0, last_denominator_sign: sign_of(initial_denominator, 1) }
    }

    /// Records the denominator at the next point and returns the sheet.
    pub fn observe<T: Real>(&mut self, denominator: T) -> i64 {
        let s = sign_of(denominator, self.last_denominator_sign);
        if s != self.last_denominator_sign {
            self.sheet += 1;
            self.last_denominator_sign = s;
        }
        self.sheet
    }

    /// arctan(num/den) + π·sheet after observing `den`.
    pub fn unwrap<T: Real>(&mut self, numerator: T, denominator: T) -> T {
        let sheet = self.observe(denominator);
        let principal = if denominator == T::zero() {
            T::FRAC_PI_2() * numerator.signum()
        } else {
            (numerator / denominator).atan()
        };
        principal + T::PI() * T::from_i64(sheet).expect("sheet fits scalar")
    }
}

fn sign_of<T: Real>(x: T, zero_as: i8) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        zero_as
    }
}

/// Canonical W at `q`.
pub fn reduced_action<T: Real>(well: &SquareWell<T>, energy: T, q: T) -> Result<T> {
    Ok(canonical_state(well, energy, q)?.w)
}

/// Canonical ∂qW at `q`.
pub fn conjugate_momentum<T: Real>(well: &SquareWell<T>, energy: T, q: T) -> Result<T> {
    Ok(canonical_state(well, energy, q)?.p)
}

/// Canonical (W, ∂qW, ∂²qW) at `q`.
pub fn canonical_state<T: Real>(well: &SquareWell<T>, energy: T, q: T) -> Result<OdeState<T>> {
    check_energy(well, energy, false)?;
    let wn = wavenumbers(well, energy)?;
    let hbar = well.constants.hbar;
    let x = q.abs();
    let sign = if q < T::zero() { -T::one() } else { T::one() };
    if x <= well.a {
        return Ok(OdeState::new(hbar * wn.k * q, hbar * wn.k, T::zero()));
    }
    let (k, kappa) = (wn.k, wn.kappa);
    let u = kappa * (x - well.a);
    let (sh, ch) = (u.sinh(), u.cosh());
    let w = hbar * (k * well.a + (k / kappa * u.tanh()).atan());
    let den = k / kappa * sh * sh + kappa / k * ch * ch;
    let p = hbar * kappa / den;
    let dden = (k * k + kappa * kappa) / (k * kappa) * (T::lit(2.0) * u).sinh();
    let pp = -hbar * kappa * kappa * dden / (den * den);
    Ok(OdeState::new(sign * w, p, sign * pp))
}

/// Canonical W on increasing `qs ≥ a`, evaluated from the Möbius ratio with
/// a [`BranchTracker`] rather than the closed-form branch.
pub fn reduced_action_tracked<T: Real>(well: &SquareWell<T>, energy: T, qs: &[T]) -> Result<Vec<T>> {
    check_energy(well, energy, false)?;
    let wn = wavenumbers(well, energy)?;
    let coeffs = exterior_coefficients(&wn, well.a)?;
    let hbar = well.constants.hbar;
    let ka = wn.k * well.a;
    // at the wall the ratio is B/D = tan(ka); pick the sheet that gives ka
    let start = (coeffs.b / coeffs.d).atan();
    let offset = ((ka - start) / T::PI()).round() * T::PI();
    let mut tracker = BranchTracker::new(coeffs.d);
    let mut prev = well.a;
    qs.iter()
        .map(|&q| {
            if q < prev || q < well.a {
                return Err(Error::InvalidArgument("positions must increase from the wall".into()));
            }
            prev = q;
            let u = wn.kappa * (q - well.a);
            let (num, den) = coeffs.ratio_parts(u.tanh(), T::one());
            Ok(hbar * (tracker.unwrap(num, den) + offset))
        })
        .collect()
}

/// lim W as q → ∞: ħ(ka + π/2 − arctan(κ/k)); at threshold (2mV0)^{1/2}a + πħ/2.
pub fn w_at_infinity<T: Real>(well: &SquareWell<T>, energy: T) -> Result<T> {
    let wn = wavenumbers(well, energy)?;
    Ok(w_infinity_k(well, &wn))
}

fn w_infinity_k<T: Real>(well: &SquareWell<T>, wn: &WaveNumbers<T>) -> T {
    let hbar = well.constants.hbar;
    hbar * (wn.k * well.a + T::FRAC_PI_2() - wn.kappa.atan2(wn.k))
}

/// Pole-free quantization residuals:
/// sym = k sin ka − κ cos ka (∝ −(C₂ + D₂)), anti = k cos ka + κ sin ka (∝ A₂ + B₂).
pub fn quantization_residuals<T: Real>(well: &SquareWell<T>, energy: T) -> Result<(T, T)> {
    let wn = wavenumbers(well, energy)?;
    Ok(residuals_k(well, &wn))
}

fn residuals_k<T: Real>(well: &SquareWell<T>, wn: &WaveNumbers<T>) -> (T, T) {
    let (s, c) = (wn.k * well.a).sin_cos();
    (wn.k * s - wn.kappa * c, wn.k * c + wn.kappa * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Symmetric,
    Antisymmetric,
}

impl Parity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::Symmetric => "symmetric",
            Parity::Antisymmetric => "antisymmetric",
        }
    }
}

/// A bound state of the well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellEigenvalue<T> {
    pub energy: T,
    pub parity: Parity,
    /// Index within its parity: J = (4n − 2)πħ (symmetric) or 4nπħ (antisymmetric).
    pub n: u32,
    /// Position in the ascending list, starting at 1; J = 2π·level·ħ.
    pub level: u32,
    pub j: T,
    /// Matching quantization residual at `energy`.
    pub residual: T,
    /// Root sits exactly at E = V0.
    pub threshold: bool,
}

/// ⌊4(2mV0)^{1/2}a/h + 1⌋.
pub fn bound_state_count<T: Real>(well: &SquareWell<T>) -> usize {
    let h = T::lit(2.0) * T::PI() * well.constants.hbar;
    let x = T::lit(4.0) * (T::lit(2.0) * well.constants.mass * well.v0).sqrt() * well.a / h + T::one();
    x.floor().to_usize().unwrap_or(usize::MAX)
}

/// All bound states in ascending energy.
pub fn eigenvalues<T: Real>(well: &SquareWell<T>) -> Vec<WellEigenvalue<T>> {
    scan_eigenvalues(well, |wn| residuals_k(well, wn))
}

/// Bound states found from the general residuals of the exterior
/// coefficients of the G-scaled microstate class.
pub fn eigenvalues_for_class<T: Real>(well: &SquareWell<T>, g: T) -> Vec<WellEigenvalue<T>> {
    scan_eigenvalues(well, |wn| {
        if wn.kappa > T::zero() {
            let coeffs = exterior_coefficients(wn, well.a).expect("interior k").scaled(g);
            let (s, a) = general_quantization_residual(&coeffs, T::one());
            let scale = (wn.k * wn.kappa).sqrt();
            (-scale * s, scale * a)
        } else {
            let (s, a) = residuals_k(well, wn);
            (s / g, a * g)
        }
    })
}

fn scan_eigenvalues<T: Real, F>(well: &SquareWell<T>, residuals: F) -> Vec<WellEigenvalue<T>>
where
    F: Fn(&WaveNumbers<T>) -> (T, T),
{
    let ub = k_upper(well);
    let n = SCAN_POINTS;
    let grid: Vec<T> = (1..=n).map(|i| ub * T::from_usize(i).unwrap() / T::from_usize(n).unwrap()).collect();
    let values: Vec<(T, T)> = grid.iter().map(|&k| residuals(&wavenumbers_from_k(well, k))).collect();

    // threshold root: the phase ka + π/2 − arctan(κ/k) lands on a multiple of π/2
    let phase = ub * well.a / T::FRAC_PI_2() + T::one();
    let nearest = phase.round();
    let at_threshold = nearest >= T::one() && (phase - nearest).abs() <= T::lit(1e-12) * phase;

    let mut roots: Vec<(T, Parity, bool)> = Vec::new();
    // k → 0⁺: sym → −κ_max < 0 and anti → κ(ka) > 0, so start from those signs
    let mut prev_k = T::zero();
    let mut prev = (-ub, T::one());
    for (i, (&k, &val)) in grid.iter().zip(&values).enumerate() {
        let last = i + 1 == n;
        for parity in [Parity::Symmetric, Parity::Antisymmetric] {
            let pick = |v: (T, T)| if parity == Parity::Symmetric { v.0 } else { v.1 };
            let (p0, p1) = (pick(prev), pick(val));
            if last && at_threshold && parity == threshold_parity(nearest) {
                roots.push((ub, parity, true));
                continue;
            }
            if p0 == T::zero() || p0.signum() == p1.signum() && p1 != T::zero() {
                continue;
            }
            let f = |kk: T| Ok(pick(residuals(&wavenumbers_from_k(well, kk))));
            let opts = RootOptions::new(T::epsilon() * T::lit(4.0) * ub, T::infinity(), 400);
            let root = match illinois(f, prev_k, k, &opts) {
                Ok(r) => r.x,
                Err(_) => T::lit(0.5) * (prev_k + k),
            };
            roots.push((root, parity, false));
        }
        prev_k = k;
        prev = val;
    }
    roots.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite roots"));

    let hbar = well.constants.hbar;
    let (mut n_sym, mut n_anti) = (0u32, 0u32);
    roots
        .into_iter()
        .enumerate()
        .map(|(i, (k, parity, threshold))| {
            let wn = wavenumbers_from_k(well, k);
            let (rs, ra) = residuals_k(well, &wn);
            let (n, residual) = match parity {
                Parity::Symmetric => {
                    n_sym += 1;
                    (n_sym, rs)
                }
                Parity::Antisymmetric => {
                    n_anti += 1;
                    (n_anti, ra)
                }
            };
            let level = i as u32 + 1;
            let j = T::lit(2.0) * T::PI() * hbar * T::from_u32(level).unwrap();
            let energy = if threshold { well.v0 } else { energy_from_k(well, k) };
            WellEigenvalue { energy, parity, n, level, j, residual, threshold }
        })
        .collect()
}

fn threshold_parity<T: Real>(level: T) -> Parity {
    if (level / T::lit(2.0)).fract() == T::zero() {
        Parity::Antisymmetric
    } else {
        Parity::Symmetric
    }
}

/// CSV with header `n,parity,E,J_over_2pi,residual`; n is the level.
pub fn eigen_report_csv<T: Real>(well: &SquareWell<T>, states: &[WellEigenvalue<T>]) -> String {
    let mut out = String::from("n,parity,E,J_over_2pi,residual\n");
    let two_pi_hbar = T::lit(2.0) * T::PI() * well.constants.hbar;
    for s in states {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.level,
            s.parity.as_str(),
            format_float(s.energy),
            format_float(s.j / two_pi_hbar),
            format_float(s.residual)
        );
    }
    out
}

/// J = 4 W(∞) for the canonical microstate.
pub fn action_of_energy<T: Real>(well: &SquareWell<T>, energy: T) -> Result<T> {
    Ok(T::lit(4.0) * w_at_infinity(well, energy)?)
}

/// Residual of the J–k relation
/// [κ cos(J/4ħ) + k sin(J/4ħ)] sin ka − [−k cos(J/4ħ) + κ sin(J/4ħ)] cos ka.
pub fn transcendental_residual<T: Real>(well: &SquareWell<T>, action: T, energy: T) -> Result<T> {
    let wn = wavenumbers(well, energy)?;
    let theta = action / (T::lit(4.0) * well.constants.hbar);
    let (st, ct) = theta.sin_cos();
    let (s, c) = (wn.k * well.a).sin_cos();
    Ok((ct * wn.kappa + st * wn.k) * s - (-ct * wn.k + st * wn.kappa) * c)
}

/// Upper end of the attainable action range, reached at E = V0.
pub fn max_action<T: Real>(well: &SquareWell<T>) -> T {
    let hbar = well.constants.hbar;
    T::lit(4.0) * (hbar * k_upper(well) * well.a + T::FRAC_PI_2() * hbar)
}

/// The energy whose canonical action is `action`.
pub fn energy_of_action<T: Real>(well: &SquareWell<T>, action: T) -> Result<T> {
    let hi = max_action(well);
    if !(action > T::zero() && action <= hi) {
        return Err(Error::ActionOutOfRange { action: action.as_f64(), lo: 0.0, hi: hi.as_f64() });
    }
    if action == hi {
        return Ok(well.v0);
    }
    let ub = k_upper(well);
    let f = |k: T| Ok(T::lit(4.0) * w_infinity_k(well, &wavenumbers_from_k(well, k)) - action);
    let opts = RootOptions::new(T::epsilon() * T::lit(2.0) * ub, T::infinity(), 400);
    let root = illinois(f, T::zero(), ub, &opts)?;
    Ok(energy_from_k(well, root.x))
}

/// Half width a_n = (n + 1)π/(2k) with k = (mV0)^{1/2}/ħ, the widths for which
/// Ẽ = V0/2 carries the virtual action (2n − 1)πħ in the J–k relation.
pub fn special_half_width<T: Real>(n: u32, v0: T, constants: &Constants<T>) -> Result<T> {
    if n == 0 || !(v0 > T::zero()) {
        return Err(Error::InvalidArgument("need n ≥ 1 and V0 > 0".into()));
    }
    let k = (constants.mass * v0).sqrt() / constants.hbar;
    Ok(T::from_u32(n + 1).unwrap() * T::PI() / (T::lit(2.0) * k))
}

/// Virtual action (2n − 1)πħ paired with [`special_half_width`].
pub fn special_action<T: Real>(n: u32, constants: &Constants<T>) -> T {
    T::from_u32(2 * n - 1).expect("n fits scalar") * T::PI() * constants.hbar
}

/// Closed-form t − τ for the canonical microstate, τ₁ = 0 at the origin:
/// mq/(ħk) inside, τ₂ + m(q − a)/(ħκ[(k/κ)sinh²u + (κ/k)cosh²u]) beyond the wall.
pub fn time_parametrization<T: Real>(well: &SquareWell<T>, energy: T, q: T) -> Result<T> {
    check_energy(well, energy, false)?;
    let wn = wavenumbers(well, energy)?;
    let c = well.constants;
    let x = q.abs();
    let sign = if q < T::zero() { -T::one() } else { T::one() };
    let tau2 = c.mass * well.a / (c.hbar * wn.k);
    if x <= well.a {
        return Ok(c.mass * q / (c.hbar * wn.k));
    }
    let (k, kappa) = (wn.k, wn.kappa);
    let u = kappa * (x - well.a);
    let den = k / kappa * u.sinh().powi(2) + kappa / k * u.cosh().powi(2);
    Ok(sign * (tau2 + c.mass * (x - well.a) / (c.hbar * kappa * den)))
}

/// Location and value of the maximum of [`time_parametrization`] beyond the wall.
pub fn t_max_location<T: Real>(well: &SquareWell<T>, energy: T) -> Result<(T, T)> {
    check_energy(well, energy, false)?;
    let wn = wavenumbers(well, energy)?;
    let (k, kappa) = (wn.k, wn.kappa);
    let ratio = (k * k + kappa * kappa) / (k * kappa);
    let f = |u: T| -> Result<T> {
        let (sh, ch) = (u.sinh(), u.cosh());
        Ok(k / kappa * sh * sh + kappa / k * ch * ch - u * ratio * (T::lit(2.0) * u).sinh())
    };
    let mut hi = T::lit(0.5);
    while f(hi)? > T::zero() {
        hi = hi * T::lit(2.0);
    }
    let root = illinois(f, T::zero(), hi, &RootOptions::new(T::epsilon() * T::lit(8.0), T::infinity(), 400))?;
    let q_star = well.a + root.x / kappa;
    Ok((q_star, time_parametrization(well, energy, q_star)?))
}

/// T/4 = τ₂ = ma/(ħk).
pub fn quarter_period<T: Real>(well: &SquareWell<T>, energy: T) -> Result<T> {
    check_energy(well, energy, false)?;
    let wn = wavenumbers(well, energy)?;
    Ok(well.constants.mass * well.a / (well.constants.hbar * wn.k))
}

/// (sym, anti) = (C·r + D, A·r + B) with r = φ(∞)/ϑ(∞) = ±1.
///
/// sym vanishes on symmetric states (J = (4n − 2)πħ), anti on antisymmetric
/// ones (J = 4nπħ).
pub fn general_quantization_residual<T: Real>(coeffs: &MobiusCoefficients<T>, parity_limit: T) -> (T, T) {
    (coeffs.c * parity_limit + coeffs.d, coeffs.a * parity_limit + coeffs.b)
}
