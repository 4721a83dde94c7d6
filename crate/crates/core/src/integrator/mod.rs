//! Integration of the quantum stationary Hamilton-Jacobi equation.
//!
//! The third-order equation
//!
//! ```text
//! (∂qW)²/2m + V − E = −(ħ²/4m) {W; q}
//! {W; q} = W‴/W′ − (3/2)(W″/W′)²
//! ```
//!
//! is rearranged into a first-order system over (W, p = ∂qW, p′ = ∂²qW) and
//! advanced with an adaptive Dormand-Prince 5(4) pair. Samples are produced on
//! an equally spaced grid from the pair's continuous extension.

mod dopri;
mod tableau;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::io::format_float;
use crate::model::{EnergyValue, Microstate, Oscillator, Potential};
use crate::scalar::Real;

/// One point of a reduced-action solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdeState<T> {
    /// Reduced action W.
    pub w: T,
    /// Conjugate momentum ∂qW.
    pub p: T,
    /// ∂²qW.
    pub pp: T,
}

impl<T: Real> OdeState<T> {
    pub fn new(w: T, p: T, pp: T) -> Self {
        Self { w, p, pp }
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.p.is_finite() && self.pp.is_finite()
    }
}

impl<T: Real> From<&Microstate<T>> for OdeState<T> {
    fn from(m: &Microstate<T>) -> Self {
        Self { w: m.w0, p: m.p0, pp: m.pp0 }
    }
}

/// Step-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Absolute tolerance on W.
    pub abs_tol: T,
    /// Relative tolerance on every component.
    pub rel_tol: T,
    /// Momentum below which a solution is considered attenuated and frozen.
    pub p_floor: T,
    /// Cap on accepted plus rejected steps.
    pub max_steps: usize,
}

impl<T: Real> Tolerances<T> {
    pub fn new(abs_tol: T, rel_tol: T) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let floor = T::epsilon();
        if !(self.abs_tol >= floor && self.rel_tol >= floor) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be at least machine epsilon, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if !(self.p_floor > T::zero() && self.p_floor < self.abs_tol) {
            return Err(Error::InvalidArgument("p_floor must be positive and far below abs_tol".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Same settings with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self { abs_tol: self.abs_tol * factor, rel_tol: self.rel_tol * factor, ..*self }
    }
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        let tol = T::lit(1e-13).max(T::tolerance_floor());
        let p_floor = T::lit(1e-250).max(T::min_positive_value() * T::lit(1e8));
        Self { abs_tol: tol, rel_tol: tol, p_floor, max_steps: 2_000_000 }
    }
}

/// Equally spaced samples of (W, ∂qW, ∂²qW) with the inputs that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedActionGrid<T> {
    pub qs: Vec<T>,
    pub states: Vec<OdeState<T>>,
    pub energy: EnergyValue<T>,
    /// The microstate as resolved at `energy`.
    pub microstate: Microstate<T>,
    pub potential: Potential<T>,
    /// First sample index at which the solution had been frozen after
    /// momentum underflow.
    pub frozen_from: Option<usize>,
}

impl<T: Real> ReducedActionGrid<T> {
    pub fn len(&self) -> usize {
        self.qs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qs.is_empty()
    }

    pub fn first(&self) -> &OdeState<T> {
        &self.states[0]
    }

    pub fn last(&self) -> &OdeState<T> {
        &self.states[self.states.len() - 1]
    }

    pub fn w_values(&self) -> impl Iterator<Item = T> + '_ {
        self.states.iter().map(|s| s.w)
    }

    /// CSV with header `q,W,p,pp`, 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,W,p,pp\n");
        for (q, s) in self.qs.iter().zip(&self.states) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_float(*q),
                format_float(s.w),
                format_float(s.p),
                format_float(s.pp)
            );
        }
        out
    }
}

/// ∂³qW from the QSHJE at a given state:
/// `(3/2) pp²/p − (4m/ħ²) p (p²/2m + V(q) − E)`.
pub fn qshje_rhs<T: Real>(state: &OdeState<T>, q: T, energy: T, potential: &Potential<T>, p_floor: T) -> Result<T> {
    if !(state.p > T::zero()) {
        return Err(Error::MonotonicityViolation { q: q.as_f64(), p: state.p.as_f64() });
    }
    if state.p <= p_floor {
        return Err(Error::MomentumUnderflow { q: q.as_f64(), p: state.p.as_f64() });
    }
    Ok(third_derivative(state, q, energy, potential))
}

fn third_derivative<T: Real>(state: &OdeState<T>, q: T, energy: T, potential: &Potential<T>) -> T {
    let c = potential.constants();
    let p = state.p;
    let kinetic = p * p / (T::lit(2.0) * c.mass);
    T::lit(1.5) * state.pp * state.pp / p
        - T::lit(4.0) * c.mass / (c.hbar * c.hbar) * p * (kinetic + potential.value(q) - energy)
}

/// Energy implied by a state and its third derivative through the QSHJE,
/// `p²/2m + V + (ħ²/4m){W; q}`.
pub fn energy_balance<T: Real>(state: &OdeState<T>, w3: T, q: T, potential: &Potential<T>) -> T {
    let c = potential.constants();
    let p = state.p;
    let ratio = state.pp / p;
    let schwarzian = w3 / p - T::lit(1.5) * ratio * ratio;
    p * p / (T::lit(2.0) * c.mass) + potential.value(q) + c.hbar * c.hbar / (T::lit(4.0) * c.mass) * schwarzian
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "a grid needs at least two points");
    let steps = T::from_usize(n - 1).expect("grid size fits scalar");
    let mut out: Vec<T> = (0..n)
        .map(|i| {
            let t = T::from_usize(i).expect("grid index fits scalar") / steps;
            a + (b - a) * t
        })
        .collect();
    out[n - 1] = b;
    out
}

fn check_outputs<T: Real>(q0: T, q_end: T, outputs: &[T]) -> Result<()> {
    let dir = (q_end - q0).signum();
    let mut prev = q0;
    for &x in outputs {
        if !x.is_finite() || (x - prev) * dir < T::zero() || (x - q_end) * dir > T::zero() {
            return Err(Error::InvalidArgument(
                "output points must be finite, ordered along the direction of integration and inside the interval"
                    .into(),
            ));
        }
        prev = x;
    }
    Ok(())
}

/// Integrates the QSHJE from the microstate's q0 to `q_end`, sampling `n_out`
/// equally spaced points (both ends included). Backward integration is
/// supported with `q_end < q0`.
pub fn integrate<T: Real>(
    potential: &Potential<T>,
    energy: impl Into<EnergyValue<T>>,
    microstate: &Microstate<T>,
    q_end: T,
    n_out: usize,
    tol: &Tolerances<T>,
) -> Result<ReducedActionGrid<T>> {
    let energy = energy.into();
    if n_out < 2 {
        return Err(Error::InvalidArgument("n_out must be at least 2".into()));
    }
    let resolved = microstate.resolve(energy.value, potential.constants())?;
    if q_end == resolved.q0 || !q_end.is_finite() {
        return Err(Error::InvalidArgument("q_end must be finite and differ from q0".into()));
    }
    let qs = linspace(resolved.q0, q_end, n_out);
    integrate_at(potential, energy, &resolved, &qs, tol)
}

/// Integrates the QSHJE sampling at arbitrary points, all on one side of q0
/// and ordered away from it.
pub fn integrate_at<T: Real>(
    potential: &Potential<T>,
    energy: impl Into<EnergyValue<T>>,
    microstate: &Microstate<T>,
    qs: &[T],
    tol: &Tolerances<T>,
) -> Result<ReducedActionGrid<T>> {
    let energy = energy.into();
    tol.validate()?;
    if !energy.value.is_finite() {
        return Err(Error::InvalidArgument("energy must be finite".into()));
    }
    let resolved = microstate.resolve(energy.value, potential.constants())?;
    let q_end = *qs.last().ok_or_else(|| Error::InvalidArgument("no output points".into()))?;
    if q_end == resolved.q0 {
        return Err(Error::InvalidArgument("last output point must differ from q0".into()));
    }
    check_outputs(resolved.q0, q_end, qs)?;
    let run = dopri::run_family(
        potential,
        &[energy.value],
        resolved.q0,
        &[OdeState::from(&resolved)],
        q_end,
        qs,
        tol,
    )?;
    let states: Vec<OdeState<T>> = run.samples.into_iter().map(|row| row[0]).collect();
    if let Some((i, _)) = states.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFiniteState { q: qs[i].as_f64() });
    }
    Ok(ReducedActionGrid {
        qs: qs.to_vec(),
        states,
        energy,
        microstate: resolved,
        potential: *potential,
        frozen_from: run.frozen_from[0],
    })
}

/// Integrates one fixed initial triple at several energies on a shared step
/// sequence. Returns one grid per energy, sampled at `qs`.
pub fn integrate_family<T: Real>(
    potential: &Potential<T>,
    energies: &[T],
    microstate: &Microstate<T>,
    qs: &[T],
    tol: &Tolerances<T>,
) -> Result<Vec<ReducedActionGrid<T>>> {
    tol.validate()?;
    if energies.is_empty() {
        return Ok(Vec::new());
    }
    if microstate.policy != crate::model::InitialValuePolicy::Fixed {
        return Err(Error::PolicyViolation);
    }
    let q_end = *qs.last().ok_or_else(|| Error::InvalidArgument("no output points".into()))?;
    if q_end == microstate.q0 {
        return Err(Error::InvalidArgument("last output point must differ from q0".into()));
    }
    check_outputs(microstate.q0, q_end, qs)?;
    let init = vec![OdeState::from(microstate); energies.len()];
    let run = dopri::run_family(potential, energies, microstate.q0, &init, q_end, qs, tol)?;
    Ok(energies
        .iter()
        .enumerate()
        .map(|(i, &e)| ReducedActionGrid {
            qs: qs.to_vec(),
            states: run.samples.iter().map(|row| row[i]).collect(),
            energy: EnergyValue::virtual_energy(e),
            microstate: *microstate,
            potential: *potential,
            frozen_from: run.frozen_from[i],
        })
        .collect())
}

/// p(q)·exp(mω q²/2ħ) per sample; exp(q²/2) in natural units.
pub fn divergence_product<T: Real>(grid: &ReducedActionGrid<T>) -> Result<Vec<T>> {
    let osc: &Oscillator<T> = grid.potential.as_oscillator().ok_or(Error::WrongPotential)?;
    let scale = osc.constants.mass * osc.omega / (T::lit(2.0) * osc.constants.hbar);
    Ok(grid.qs.iter().zip(&grid.states).map(|(&q, s)| s.p * (scale * q * q).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constants, SquareWell};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

    fn lho() -> Potential<f64> {
        Potential::lho_natural()
    }

    fn well() -> Potential<f64> {
        Potential::FiniteSquareWell(SquareWell::new(1.0, FRAC_PI_4, Constants::natural()).unwrap())
    }

    #[test]
    fn rhs_examples() {
        let tol = Tolerances::<f64>::default();
        let s = OdeState::new(0.0, 1.0, 0.0);
        assert_eq!(qshje_rhs(&s, 0.0, 0.5, &lho(), tol.p_floor).unwrap(), 0.0);
        let s = OdeState::new(0.0, 0.5, 0.0);
        let v = qshje_rhs(&s, 0.0, 0.4, &lho(), tol.p_floor).unwrap();
        assert!((v - 0.55).abs() < 1e-15, "{v}");
        // interior of the well with p = ħk, E = ħ²k²/2m
        let s = OdeState::new(0.3, 1.0, 0.0);
        assert_eq!(qshje_rhs(&s, 0.2, 0.5, &well(), tol.p_floor).unwrap(), 0.0);
    }

    #[test]
    fn rhs_errors() {
        let s = OdeState::new(0.0, 0.0, 0.0);
        assert!(matches!(qshje_rhs(&s, 0.0, 0.5, &lho(), 1e-250), Err(Error::MonotonicityViolation { .. })));
        let s = OdeState::new(0.0, 1e-260, 0.0);
        assert!(matches!(qshje_rhs(&s, 0.0, 0.5, &lho(), 1e-250), Err(Error::MomentumUnderflow { .. })));
    }

    #[test]
    fn ground_state_quarter_action() {
        let m = Microstate::symmetric(1.0).unwrap();
        let g = integrate(&lho(), 0.5, &m, 10.0, 4000, &Tolerances::default()).unwrap();
        assert_eq!(g.len(), 4000);
        assert_eq!(g.qs[3999], 10.0);
        assert!((g.last().w - FRAC_PI_2).abs() < 1e-9, "{}", g.last().w - FRAC_PI_2);
        assert!(g.frozen_from.is_none());
    }

    #[test]
    fn square_well_interior_is_linear() {
        let m = Microstate::symmetric(1.0).unwrap();
        let g = integrate(&well(), 0.5, &m, FRAC_PI_8, 50, &Tolerances::default()).unwrap();
        for (q, s) in g.qs.iter().zip(&g.states) {
            assert!((s.w - q).abs() < 1e-12);
            assert!((s.p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_integration_mirrors_forward() {
        let m = Microstate::symmetric(1.0).unwrap();
        let tol = Tolerances::default();
        let fwd = integrate(&lho(), 0.7, &m, 6.0, 601, &tol).unwrap();
        let bwd = integrate(&lho(), 0.7, &m, -6.0, 601, &tol).unwrap();
        for (f, b) in fwd.states.iter().zip(&bwd.states) {
            assert!((f.w + b.w).abs() < 1e-10);
            assert!((f.p - b.p).abs() <= 1e-10 * f.p.abs().max(1e-300));
        }
    }

    #[test]
    fn freezing_after_underflow() {
        let m = Microstate::symmetric(1.0).unwrap();
        let tol = Tolerances { p_floor: 1e-30, ..Tolerances::default() };
        let g = integrate(&lho(), 0.5, &m, 12.0, 1201, &tol).unwrap();
        let idx = g.frozen_from.expect("momentum should cross 1e-30 before q = 12");
        let frozen = g.states[idx];
        assert!(g.qs[idx] > 7.0 && g.qs[idx] < 10.0, "{}", g.qs[idx]);
        for s in &g.states[idx..] {
            assert_eq!(*s, frozen);
        }
        for s in &g.states[..idx] {
            assert!(s.p > 0.0);
        }
    }

    #[test]
    fn divergence_product_requires_oscillator() {
        let m = Microstate::symmetric(1.0).unwrap();
        let g = integrate(&well(), 0.5, &m, 1.0, 10, &Tolerances::default()).unwrap();
        assert_eq!(divergence_product(&g), Err(Error::WrongPotential));
        let g = integrate(&lho(), 0.5, &m, 6.0, 601, &Tolerances::default()).unwrap();
        let d = divergence_product(&g).unwrap();
        assert_eq!(d[0], 1.0);
        assert!(d[600] < d[400]);
    }

    #[test]
    fn invalid_requests() {
        let m = Microstate::symmetric(1.0).unwrap();
        let tol = Tolerances::default();
        assert!(integrate(&lho(), 0.5, &m, 0.0, 10, &tol).is_err());
        assert!(integrate(&lho(), 0.5, &m, 1.0, 1, &tol).is_err());
        let bad = Tolerances { abs_tol: 0.0, ..tol };
        assert!(integrate(&lho(), 0.5, &m, 1.0, 10, &bad).is_err());
        assert!(integrate_at(&lho(), 0.5, &m, &[0.5, 0.2, 1.0], &tol).is_err());
    }

    #[test]
    fn grid_csv_layout() {
        let m = Microstate::symmetric(1.0).unwrap();
        let g = integrate(&lho(), 0.5, &m, 1.0, 3, &Tolerances::default()).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "q,W,p,pp");
        assert_eq!(lines.len(), 4);
        let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
