//! Time parametrization from Jacobi's theorem, t − τ = ∂W/∂E, evaluated by
//! central differences in energy at a fixed initial triple.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::integrator::{integrate_family, Tolerances};
use crate::io::format_float;
use crate::milne::default_q_max;
use crate::model::{EnergyValue, InitialValuePolicy, Microstate, Potential};
use crate::scalar::Real;

/// Energy step used when none is given.
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint<T> {
    pub q: T,
    pub t_minus_tau: T,
}

/// Quantum quarter-cycle transit time against its classical counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitReport<T> {
    pub quarter_time: T,
    pub classical_quarter: T,
    pub delta: T,
    pub energy: EnergyValue<T>,
}

impl<T: Real> TransitReport<T> {
    /// 1/(4·quarter_time).
    pub fn frequency(&self) -> T {
        T::one() / (T::lit(4.0) * self.quarter_time)
    }
}

fn check_inputs<T: Real>(microstate: &Microstate<T>, energy: T, epsilon: T) -> Result<()> {
    if microstate.policy != InitialValuePolicy::Fixed {
        return Err(Error::PolicyViolation);
    }
    if !(epsilon > T::zero() && epsilon.is_finite()) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    if !(energy - epsilon > T::zero()) || !energy.is_finite() {
        return Err(Error::EnergyOutOfRange { energy: energy.as_f64(), lo: epsilon.as_f64(), hi: f64::INFINITY });
    }
    Ok(())
}

/// t − τ at each of `qs` (any order, either side of q0), with t − τ = 0 at q0.
///
/// Both displaced energies are integrated from the same fixed triple on one
/// shared step sequence.
pub fn time_parametrize<T: Real>(
    potential: &Potential<T>,
    energy: T,
    microstate: &Microstate<T>,
    qs: &[T],
    epsilon: T,
    tol: &Tolerances<T>,
) -> Result<Vec<TrajectoryPoint<T>>> {
    check_inputs(microstate, energy, epsilon)?;
    let q0 = microstate.q0;
    let mut times = vec![T::zero(); qs.len()];
    let energies = [energy + epsilon, energy - epsilon];
    let two_eps = (energy + epsilon) - (energy - epsilon);

    for forward in [true, false] {
        let mut idx: Vec<usize> = (0..qs.len()).filter(|&i| if forward { qs[i] > q0 } else { qs[i] < q0 }).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.iter().any(|&i| !qs[i].is_finite()) {
            return Err(Error::InvalidArgument("positions must be finite".into()));
        }
        idx.sort_by(|&a, &b| {
            let (x, y) = (qs[a], qs[b]);
            let ord = x.partial_cmp(&y).expect("finite positions");
            if forward {
                ord
            } else {
                ord.reverse()
            }
        });
        let ordered: Vec<T> = idx.iter().map(|&i| qs[i]).collect();
        let grids = integrate_family(potential, &energies, microstate, &ordered, tol)?;
        for (k, &i) in idx.iter().enumerate() {
            times[i] = (grids[0].states[k].w - grids[1].states[k].w) / two_eps;
        }
    }
    Ok(qs.iter().zip(times).map(|(&q, t)| TrajectoryPoint { q, t_minus_tau: t }).collect())
}

/// Classical quarter period: π/(2ω) for the oscillator, ma/(ħk) for the well.
pub fn classical_quarter<T: Real>(potential: &Potential<T>, energy: T) -> Result<T> {
    match potential {
        Potential::HarmonicOscillator(osc) => Ok(osc.classical_quarter_period()),
        Potential::FiniteSquareWell(well) => {
            if !(energy > T::zero()) {
                return Err(Error::EnergyOutOfRange { energy: energy.as_f64(), lo: 0.0, hi: well.v0.as_f64() });
            }
            let c = well.constants;
            let k = (T::lit(2.0) * c.mass * energy).sqrt() / c.hbar;
            Ok(c.mass * well.a / (c.hbar * k))
        }
    }
}

/// Transit time from q0 to `q_max` (default per [`default_q_max`]).
pub fn quarter_transit<T: Real>(
    potential: &Potential<T>,
    energy: impl Into<EnergyValue<T>>,
    microstate: &Microstate<T>,
    q_max: Option<T>,
    epsilon: T,
    tol: &Tolerances<T>,
) -> Result<TransitReport<T>> {
    let energy = energy.into();
    let q_end = q_max.unwrap_or_else(|| default_q_max(potential, energy.value));
    if q_end == microstate.q0 {
        return Err(Error::InvalidArgument("q_max must differ from q0".into()));
    }
    let t = time_parametrize(potential, energy.value, microstate, &[q_end], epsilon, tol)?;
    let quarter_time = t[0].t_minus_tau;
    let classical = classical_quarter(potential, energy.value)?;
    Ok(TransitReport { quarter_time, classical_quarter: classical, delta: quarter_time - classical, energy })
}

/// Full period 4·T/4 for odd solutions on a symmetric potential.
pub fn cycle_time<T: Real>(
    potential: &Potential<T>,
    energy: impl Into<EnergyValue<T>>,
    microstate: &Microstate<T>,
    q_max: Option<T>,
    epsilon: T,
    tol: &Tolerances<T>,
) -> Result<T> {
    if !potential.is_symmetric() || !microstate.is_antisymmetric_at_origin() {
        return Err(Error::ModeViolation("cycle time needs a symmetric potential and W0 = W''(0) = 0 at q0 = 0"));
    }
    Ok(T::lit(4.0) * quarter_transit(potential, energy, microstate, q_max, epsilon, tol)?.quarter_time)
}

/// CSV with header `q,t_minus_tau`.
pub fn trajectory_csv<T: Real>(points: &[TrajectoryPoint<T>]) -> String {
    let mut out = String::from("q,t_minus_tau\n");
    for p in points {
        let _ = writeln!(out, "{},{}", format_float(p.q), format_float(p.t_minus_tau));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::linspace;
    use crate::model::{Constants, SquareWell};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn lho() -> Potential<f64> {
        Potential::lho_natural()
    }

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    #[test]
    fn epoch_at_origin() {
        let m = Microstate::symmetric(1.0).unwrap();
        let t = time_parametrize(&lho(), 0.5, &m, &[0.0, 1.0, -1.0], 1e-5, &tol()).unwrap();
        assert_eq!(t[0].t_minus_tau, 0.0);
        // odd solution: t is odd in q
        assert!((t[1].t_minus_tau + t[2].t_minus_tau).abs() < 1e-8);
        assert!(t[1].t_minus_tau > 0.0);
    }

    #[test]
    fn ground_state_quarter_transit() {
        let m = Microstate::symmetric(1.0).unwrap();
        let r = quarter_transit(&lho(), 0.5, &m, None, 1e-5, &tol()).unwrap();
        assert!((r.delta / 0.202 - 1.0).abs() < 0.01, "{}", r.delta);
        assert_eq!(r.classical_quarter, FRAC_PI_2);
        assert_eq!(r.delta, r.quarter_time - r.classical_quarter);
        let t = cycle_time(&lho(), 0.5, &m, None, 1e-5, &tol()).unwrap();
        assert_eq!(t, 4.0 * r.quarter_time);
    }

    #[test]
    fn trajectory_levels_off() {
        let m = Microstate::symmetric(1.0).unwrap();
        let qs = linspace(7.0, 10.0, 31);
        let t = time_parametrize(&lho(), 0.5, &m, &qs, 1e-5, &tol()).unwrap();
        let lo = t.iter().map(|p| p.t_minus_tau).fold(f64::INFINITY, f64::min);
        let hi = t.iter().map(|p| p.t_minus_tau).fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 1e-9, "{}", hi - lo);
    }

    #[test]
    fn energy_scaled_is_rejected() {
        let e = time_parametrize(&lho(), 0.5, &Microstate::energy_scaled(), &[1.0], 1e-5, &tol()).unwrap_err();
        assert_eq!(e, Error::PolicyViolation);
        let m = Microstate::symmetric(1.0).unwrap();
        assert!(time_parametrize(&lho(), 0.5, &m, &[1.0], 0.0, &tol()).is_err());
        assert!(time_parametrize(&lho(), 1e-6, &m, &[1.0], 1e-5, &tol()).is_err());
    }

    #[test]
    fn cycle_time_needs_symmetry() {
        let m = Microstate::fixed(0.0, 0.0, 1.0, 0.5).unwrap();
        let e = cycle_time(&lho(), 0.5, &m, None, 1e-5, &tol()).unwrap_err();
        assert!(matches!(e, Error::ModeViolation(_)));
    }

    #[test]
    fn classical_quarters() {
        assert_eq!(classical_quarter(&lho(), 3.0).unwrap(), FRAC_PI_2);
        let well = Potential::FiniteSquareWell(SquareWell::new(1.0, FRAC_PI_4, Constants::natural()).unwrap());
        assert!((classical_quarter(&well, 0.5).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((4.0 * classical_quarter(&well, 0.5).unwrap() - PI).abs() < 1e-15);
    }

    /// W at q and as q → ∞ for the fixed triple {0, 0, p0, 0} on a well with
    /// ka < π/2, from the two-region Möbius solution.
    fn fixed_well_action(v0: f64, a: f64, p0: f64, e: f64, q: f64) -> (f64, f64) {
        let (k, kappa) = ((2.0 * e).sqrt(), (2.0 * (v0 - e)).sqrt());
        let s = p0 / k;
        let w_in = |x: f64| (s * (k * x).tan()).atan();
        let den = (k * a).cos().powi(2) / s + s * (k * a).sin().powi(2);
        let p_a = k / den;
        let pp_a = -k * k * (s - 1.0 / s) * (2.0 * k * a).sin() / (den * den);
        let gamma = kappa / p_a;
        let beta = -pp_a * gamma * gamma / (2.0 * kappa * kappa);
        let alpha = (1.0 + beta * beta) / gamma;
        let w_out = |t: f64| w_in(a) + (alpha * t + beta).atan() - beta.atan();
        let w_q = if q <= a { w_in(q) } else { w_out((kappa * (q - a)).tanh()) };
        (w_q, w_out(1.0))
    }

    #[test]
    fn square_well_times_match_two_region_solution() {
        let (v0, a, p0, e) = (1.0, FRAC_PI_4, 1.0, 0.5);
        let well = Potential::FiniteSquareWell(SquareWell::new(v0, a, Constants::natural()).unwrap());
        let m = Microstate::fixed(0.0, 0.0, p0, 0.0).unwrap();
        let h = 1e-6;
        let qs = [PI / 8.0, a, a + 0.6, a + 2.0];
        let t = time_parametrize(&well, e, &m, &qs, 1e-5, &tol()).unwrap();
        for (q, pt) in qs.iter().zip(&t) {
            let oracle = (fixed_well_action(v0, a, p0, e + h, *q).0 - fixed_well_action(v0, a, p0, e - h, *q).0) / (2.0 * h);
            assert!((pt.t_minus_tau - oracle).abs() < 1e-6, "q={q}: {} vs {oracle}", pt.t_minus_tau);
        }
        // inside, q − sin(2q)/2 at k = 1
        assert!((t[0].t_minus_tau - (PI / 8.0 - (FRAC_PI_4).sin() / 2.0)).abs() < 1e-6);

        let r = quarter_transit(&well, e, &m, Some(a + 30.0), 1e-5, &tol()).unwrap();
        let oracle = (fixed_well_action(v0, a, p0, e + h, 0.0).1 - fixed_well_action(v0, a, p0, e - h, 0.0).1) / (2.0 * h);
        assert!((r.quarter_time - oracle).abs() < 1e-6, "{} vs {oracle}", r.quarter_time);
    }

    #[test]
    fn csv_layout() {
        let csv = trajectory_csv(&[TrajectoryPoint { q: 0.0, t_minus_tau: 0.0 }, TrajectoryPoint { q: 1.0, t_minus_tau: 0.5 }]);
        assert_eq!(csv, "q,t_minus_tau\n0.0000000000000000e0,0.0000000000000000e0\n1.0000000000000000e0,5.0000000000000000e-1\n");
    }
}
