//! Action variables from reduced actions, and Milne quantization by shooting.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{integrate_at, Tolerances};
use crate::io::format_float;
use crate::model::{EnergyValue, Microstate, Potential};
use crate::rootfind::{illinois, RootOptions};
use crate::scalar::{round_half_even, Real};

/// Largest output spacing used when choosing default grids.
pub const MAX_SPACING: f64 = 0.0025;

/// How the loop integral is assembled from a reduced action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionMode {
    /// J = 4(W(q_max) − W0) for odd solutions on a symmetric potential.
    QuarterSymmetric,
    /// J = 2(W(+q_max) − W(−q_max)) from a forward and a backward integration.
    TwoSided,
}

impl ActionMode {
    /// Quarter mode whenever the microstate and potential allow it.
    pub fn preferred<T: Real>(potential: &Potential<T>, microstate: &Microstate<T>) -> Self {
        if potential.is_symmetric() && microstate.is_antisymmetric_at_origin() {
            ActionMode::QuarterSymmetric
        } else {
            ActionMode::TwoSided
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionVariable<T> {
    pub j: T,
    pub mode: ActionMode,
    pub energy: EnergyValue<T>,
    /// Microstate resolved at `energy`.
    pub microstate: Microstate<T>,
    /// J/(2πħ) minus its nearest integer (ties to even).
    pub residual: T,
}

/// Integration end used when none is given: 10 for oscillator energies up to
/// 2, otherwise 3.5 past the turning point; for the well, 20 decay lengths
/// past the wall.
pub fn default_q_max<T: Real>(potential: &Potential<T>, energy: T) -> T {
    match potential {
        Potential::HarmonicOscillator(osc) => {
            if energy <= T::lit(2.0) {
                T::lit(10.0)
            } else {
                osc.turning_point(energy) + T::lit(3.5)
            }
        }
        Potential::FiniteSquareWell(well) => {
            let c = well.constants;
            let kappa_max = (T::lit(2.0) * c.mass * well.v0).sqrt() / c.hbar;
            let kappa = (T::lit(2.0) * c.mass * (well.v0 - energy)).max(T::zero()).sqrt() / c.hbar;
            well.a + T::lit(20.0) / kappa.max(T::lit(1e-3) * kappa_max)
        }
    }
}

/// Number of output points for a range: at least 4000, spacing at most
/// [`MAX_SPACING`].
pub fn default_points<T: Real>(from: T, to: T) -> usize {
    let n = ((to - from).abs() / T::lit(MAX_SPACING)).ceil().to_usize().unwrap_or(usize::MAX - 1);
    n.max(4000)
}

fn check_mode<T: Real>(potential: &Potential<T>, microstate: &Microstate<T>, mode: ActionMode) -> Result<()> {
    if mode == ActionMode::QuarterSymmetric {
        if !potential.is_symmetric() {
            return Err(Error::ModeViolation("quarter-symmetric action needs a symmetric potential"));
        }
        if !microstate.is_antisymmetric_at_origin() {
            return Err(Error::ModeViolation("quarter-symmetric action needs q0 = 0, W0 = 0 and W''(0) = 0"));
        }
    }
    Ok(())
}

/// Action variable at `energy` by integrating out to ±`q_max`.
pub fn action_variable<T: Real>(
    potential: &Potential<T>,
    energy: impl Into<EnergyValue<T>>,
    microstate: &Microstate<T>,
    q_max: T,
    mode: ActionMode,
    tol: &Tolerances<T>,
) -> Result<ActionVariable<T>> {
    let energy = energy.into();
    check_mode(potential, microstate, mode)?;
    let resolved = microstate.resolve(energy.value, potential.constants())?;
    let q0 = resolved.q0;
    if !(q_max > q0.abs()) {
        return Err(Error::InvalidArgument("q_max must lie beyond |q0|".into()));
    }
    let forward = integrate_at(potential, energy, &resolved, &[q_max], tol)?;
    let j = match mode {
        ActionMode::QuarterSymmetric => T::lit(4.0) * (forward.last().w - resolved.w0),
        ActionMode::TwoSided => {
            let backward = integrate_at(potential, energy, &resolved, &[-q_max], tol)?;
            T::lit(2.0) * (forward.last().w - backward.last().w)
        }
    };
    if !j.is_finite() {
        return Err(Error::NonFiniteState { q: q_max.as_f64() });
    }
    let quanta = j / (T::lit(2.0) * T::PI() * potential.constants().hbar);
    Ok(ActionVariable { j, mode, energy, microstate: resolved, residual: quanta - round_half_even(quanta) })
}

/// One sample of J against energy.
#[derive(Debug, Clone, PartialEq)]
pub struct JCurvePoint<T> {
    pub energy: T,
    /// The action, or the error that stopped this point.
    pub j: Result<T>,
    pub case_label: String,
}

impl<T: Real> JCurvePoint<T> {
    /// J/(2πħ).
    pub fn quanta(&self, potential: &Potential<T>) -> Option<T> {
        let hbar = potential.constants().hbar;
        self.j.as_ref().ok().map(|&j| j / (T::lit(2.0) * T::PI() * hbar))
    }

    /// For the oscillator, J/(2πħ) − E/(ħω) − 1/2; otherwise J/(2πħ) minus
    /// its nearest integer.
    pub fn residual(&self, potential: &Potential<T>) -> Option<T> {
        let quanta = self.quanta(potential)?;
        Some(match potential {
            Potential::HarmonicOscillator(osc) => {
                quanta - self.energy / (osc.constants.hbar * osc.omega) - T::lit(0.5)
            }
            Potential::FiniteSquareWell(_) => quanta - round_half_even(quanta),
        })
    }
}

/// J at each energy, evaluated independently and in parallel; the output
/// order follows `energies`. `q_max = None` picks [`default_q_max`] per energy.
pub fn j_curve<T: Real>(
    potential: &Potential<T>,
    energies: &[T],
    microstate: &Microstate<T>,
    q_max: Option<T>,
    case_label: &str,
    tol: &Tolerances<T>,
) -> Vec<JCurvePoint<T>> {
    let mode = ActionMode::preferred(potential, microstate);
    energies
        .par_iter()
        .map(|&e| {
            let j = check_energy(potential, e).and_then(|_| {
                let q = q_max.unwrap_or_else(|| default_q_max(potential, e));
                action_variable(potential, e, microstate, q, mode, tol).map(|a| a.j)
            });
            JCurvePoint { energy: e, j, case_label: case_label.to_string() }
        })
        .collect()
}

fn check_energy<T: Real>(potential: &Potential<T>, e: T) -> Result<()> {
    let hi = match potential {
        Potential::HarmonicOscillator(_) => T::infinity(),
        Potential::FiniteSquareWell(w) => w.v0,
    };
    if !(e > T::zero() && e < hi) {
        return Err(Error::EnergyOutOfRange { energy: e.as_f64(), lo: 0.0, hi: hi.as_f64() });
    }
    Ok(())
}

/// CSV with header `E,J_over_2pi,residual,case`; failed points print `NaN`.
pub fn j_curve_csv<T: Real>(potential: &Potential<T>, points: &[JCurvePoint<T>]) -> String {
    let mut out = String::from("E,J_over_2pi,residual,case\n");
    for pt in points {
        let q = pt.quanta(potential).map(format_float).unwrap_or_else(|| "NaN".into());
        let r = pt.residual(potential).map(format_float).unwrap_or_else(|| "NaN".into());
        let _ = writeln!(out, "{},{},{},{}", format_float(pt.energy), q, r, pt.case_label);
    }
    out
}

/// Outcome of [`shoot_eigenvalue`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult<T> {
    pub energy: T,
    /// J(E) − 2πnħ at the returned energy.
    pub j_residual: T,
    pub evaluations: usize,
    pub bracket_widths: Vec<T>,
}

/// Energy with J(E) = 2πnħ inside `bracket`, by safeguarded regula falsi on
/// the J-space residual.
pub fn shoot_eigenvalue<T: Real>(
    potential: &Potential<T>,
    n: u32,
    bracket: (T, T),
    microstate: &Microstate<T>,
    q_max: Option<T>,
    e_tol: T,
    tol: &Tolerances<T>,
) -> Result<ShootingResult<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("quantum number must be positive".into()));
    }
    if !(e_tol > T::zero()) {
        return Err(Error::InvalidArgument("energy tolerance must be positive".into()));
    }
    let (lo, hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    check_energy(potential, lo)?;
    check_energy(potential, hi)?;
    let mode = ActionMode::preferred(potential, microstate);
    let target = T::lit(2.0) * T::PI() * potential.constants().hbar * T::from_u32(n).expect("n fits scalar");
    let q_fixed = q_max.unwrap_or_else(|| default_q_max(potential, hi));
    let residual = |e: T| -> Result<T> { Ok(action_variable(potential, e, microstate, q_fixed, mode, tol)?.j - target) };

    let r_lo = residual(lo)?;
    let r_hi = residual(hi)?;
    if r_lo.signum() == r_hi.signum() && r_lo != T::zero() && r_hi != T::zero() {
        return Err(Error::NoSignChange { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    // J-space tolerance from the secant slope over the bracket
    let slope = ((r_hi - r_lo) / (hi - lo)).abs();
    let f_tol = (slope * e_tol).max(T::lit(4.0) * tol.rel_tol * target);
    let mut cache = [(lo, r_lo), (hi, r_hi)].into_iter();
    let root = illinois(
        |e| match cache.next() {
            Some((x, r)) if x == e => Ok(r),
            _ => residual(e),
        },
        lo,
        hi,
        &RootOptions::new(e_tol, f_tol, 200),
    )?;
    Ok(ShootingResult {
        energy: root.x,
        j_residual: root.f,
        evaluations: root.evaluations,
        bracket_widths: root.widths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constants, SquareWell};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn lho() -> Potential<f64> {
        Potential::lho_natural()
    }

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    #[test]
    fn ground_state_action() {
        let m = Microstate::symmetric(1.0).unwrap();
        let a = action_variable(&lho(), 0.5, &m, 10.0, ActionMode::QuarterSymmetric, &tol()).unwrap();
        assert!((a.j / (2.0 * PI) - 1.0).abs() < 1e-9, "{}", a.residual);
        assert!(a.residual.abs() < 1e-9);
    }

    #[test]
    fn case_a_virtual_action() {
        let m = Microstate::symmetric(0.5).unwrap();
        let a = action_variable(&lho(), 0.4, &m, 10.0, ActionMode::QuarterSymmetric, &tol()).unwrap();
        assert!((a.j / PI - 1.592).abs() < 0.0005, "{}", a.j / PI);
    }

    #[test]
    fn asymmetric_microstate_two_sided() {
        let m = Microstate::fixed(0.0, 0.0, 1.0, 0.5).unwrap();
        let e = action_variable(&lho(), 0.5, &m, 10.0, ActionMode::QuarterSymmetric, &tol()).unwrap_err();
        assert!(matches!(e, Error::ModeViolation(_)));
        let a = action_variable(&lho(), 0.5, &m, 10.0, ActionMode::TwoSided, &tol()).unwrap();
        assert!((a.j / (2.0 * PI) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_sided_agrees_with_quarter_for_odd_solutions() {
        let m = Microstate::symmetric(2.0).unwrap();
        let q = action_variable(&lho(), 0.8, &m, 10.0, ActionMode::QuarterSymmetric, &tol()).unwrap();
        let t = action_variable(&lho(), 0.8, &m, 10.0, ActionMode::TwoSided, &tol()).unwrap();
        assert!((q.j - t.j).abs() < 1e-10);
    }

    #[test]
    fn j_curve_keeps_order_and_errors() {
        let m = Microstate::symmetric(1.0).unwrap();
        let pts = j_curve(&lho(), &[1.0, -1.0, 0.5], &m, None, "C", &tol());
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].energy, 1.0);
        assert!(pts[1].j.is_err());
        assert!(pts[2].residual(&lho()).unwrap().abs() < 1e-9);
        let csv = j_curve_csv(&lho(), &pts);
        assert!(csv.starts_with("E,J_over_2pi,residual,case\n"));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(2).unwrap().contains("NaN"));
        assert!(j_curve(&lho(), &[], &m, None, "C", &tol()).is_empty());
    }

    #[test]
    fn shooting_ground_state() {
        let m = Microstate::symmetric(1.0).unwrap();
        let r = shoot_eigenvalue(&lho(), 1, (0.4, 0.6), &m, None, 1e-10, &tol()).unwrap();
        assert!((r.energy - 0.5).abs() < 1e-10, "{}", r.energy);
        assert!(r.evaluations <= 60, "{}", r.evaluations);
        assert!(r.bracket_widths.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn shooting_square_well() {
        let well = Potential::FiniteSquareWell(SquareWell::new(1.0, FRAC_PI_4, Constants::natural()).unwrap());
        let r = shoot_eigenvalue(&well, 1, (0.3, 0.7), &Microstate::energy_scaled(), None, 1e-10, &tol()).unwrap();
        assert!((r.energy - 0.5).abs() < 1e-10, "{}", r.energy);
    }

    #[test]
    fn shooting_needs_sign_change() {
        let m = Microstate::symmetric(1.0).unwrap();
        let e = shoot_eigenvalue(&lho(), 1, (0.6, 0.9), &m, None, 1e-10, &tol()).unwrap_err();
        assert_eq!(e, Error::NoSignChange { lo: 0.6, hi: 0.9 });
    }

    #[test]
    fn default_ranges() {
        assert_eq!(default_q_max(&lho(), 0.5), 10.0);
        assert!((default_q_max(&lho(), 32.0) - 11.5).abs() < 1e-12);
        assert_eq!(default_points(0.0, 10.0), 4000);
        assert_eq!(default_points(0.0, 11.5), 4600);
    }
}
