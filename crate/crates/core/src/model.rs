//! Physical setup: constants, potentials, microstates and the classical
//! harmonic-oscillator reference quantities.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physical constants in a consistent unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    pub hbar: T,
    pub mass: T,
}

impl<T: Real> Constants<T> {
    pub fn new(hbar: T, mass: T) -> Result<Self> {
        if !(hbar > T::zero() && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass > T::zero() && mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { hbar, mass })
    }

    /// ħ = m = 1.
    pub fn natural() -> Self {
        Self { hbar: T::one(), mass: T::one() }
    }

    /// Planck's constant h = 2πħ.
    pub fn planck(&self) -> T {
        T::TAU() * self.hbar
    }
}

impl<T: Real> Default for Constants<T> {
    fn default() -> Self {
        Self::natural()
    }
}

/// Linear harmonic oscillator V(q) = m ω² q² / 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator<T> {
    pub constants: Constants<T>,
    pub omega: T,
}

impl<T: Real> Oscillator<T> {
    pub fn new(constants: Constants<T>, omega: T) -> Result<Self> {
        if !(omega > T::zero() && omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
        }
        Ok(Self { constants, omega })
    }

    /// ħ = m = ω = 1.
    pub fn natural() -> Self {
        Self { constants: Constants::natural(), omega: T::one() }
    }

    pub fn value(&self, q: T) -> T {
        let m = self.constants.mass;
        T::lit(0.5) * m * self.omega * self.omega * q * q
    }

    /// Classical turning point (2E/m)^{1/2}/ω; zero for E ≤ 0.
    pub fn turning_point(&self, energy: T) -> T {
        if energy <= T::zero() {
            return T::zero();
        }
        (T::lit(2.0) * energy / self.constants.mass).sqrt() / self.omega
    }

    /// Classical conjugate momentum (2mE − m²ω²q²)^{1/2}, positive branch.
    pub fn classical_momentum(&self, energy: T, q: T) -> Result<T> {
        let m = self.constants.mass;
        let mw = m * self.omega;
        let arg = T::lit(2.0) * m * energy - mw * mw * q * q;
        if arg < T::zero() || energy < T::zero() {
            return Err(Error::ClassicallyForbidden { q: q.as_f64(), energy: energy.as_f64() });
        }
        Ok(arg.sqrt())
    }

    /// Classical transit time from the origin to q: (1/ω) asin(q ω (m/2E)^{1/2}).
    pub fn classical_time(&self, energy: T, q: T) -> Result<T> {
        if energy <= T::zero() {
            return Err(Error::ClassicallyForbidden { q: q.as_f64(), energy: energy.as_f64() });
        }
        let x = q * self.omega * (self.constants.mass / (T::lit(2.0) * energy)).sqrt();
        if x.abs() > T::one() {
            return Err(Error::ClassicallyForbidden { q: q.as_f64(), energy: energy.as_f64() });
        }
        Ok(x.asin() / self.omega)
    }

    /// Classical quarter period π/(2ω).
    pub fn classical_quarter_period(&self) -> T {
        T::FRAC_PI_2() / self.omega
    }
}

/// Symmetric finite square well: 0 for |q| ≤ a, V0 outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareWell<T> {
    pub v0: T,
    pub a: T,
    pub constants: Constants<T>,
}

impl<T: Real> SquareWell<T> {
    pub fn new(v0: T, a: T, constants: Constants<T>) -> Result<Self> {
        if !(v0 > T::zero() && v0.is_finite()) {
            return Err(Error::InvalidArgument(format!("V0 must be positive, got {v0}")));
        }
        if !(a > T::zero() && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("half-width must be positive, got {a}")));
        }
        Ok(Self { v0, a, constants })
    }

    pub fn value(&self, q: T) -> T {
        if q.abs() <= self.a {
            T::zero()
        } else {
            self.v0
        }
    }

    /// Potential discontinuities, ascending.
    pub fn breakpoints(&self) -> [T; 2] {
        [-self.a, self.a]
    }
}

/// The two potentials the solver knows about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential<T> {
    HarmonicOscillator(Oscillator<T>),
    FiniteSquareWell(SquareWell<T>),
}

impl<T: Real> Potential<T> {
    /// Harmonic oscillator in natural units.
    pub fn lho_natural() -> Self {
        Potential::HarmonicOscillator(Oscillator::natural())
    }

    pub fn value(&self, q: T) -> T {
        match self {
            Potential::HarmonicOscillator(o) => o.value(q),
            Potential::FiniteSquareWell(w) => w.value(q),
        }
    }

    pub fn constants(&self) -> &Constants<T> {
        match self {
            Potential::HarmonicOscillator(o) => &o.constants,
            Potential::FiniteSquareWell(w) => &w.constants,
        }
    }

    /// Discontinuities of V, ascending. Empty for smooth potentials.
    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            Potential::HarmonicOscillator(_) => Vec::new(),
            Potential::FiniteSquareWell(w) => w.breakpoints().to_vec(),
        }
    }

    /// Breakpoints strictly between `from` and `to`, in the order they are crossed.
    pub fn breakpoints_between(&self, from: T, to: T) -> Vec<T> {
        let (lo, hi) = if from < to { (from, to) } else { (to, from) };
        let mut inside: Vec<T> = self.breakpoints().into_iter().filter(|&b| b > lo && b < hi).collect();
        if to < from {
            inside.reverse();
        }
        inside
    }

    pub fn as_oscillator(&self) -> Option<&Oscillator<T>> {
        match self {
            Potential::HarmonicOscillator(o) => Some(o),
            _ => None,
        }
    }

    pub fn as_square_well(&self) -> Option<&SquareWell<T>> {
        match self {
            Potential::FiniteSquareWell(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }
}

/// How the initial conjugate momentum reacts to a change of energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitialValuePolicy {
    /// The stored triple is used verbatim at every energy.
    Fixed,
    /// p0 is recomputed as (2mE)^{1/2} at each evaluation energy.
    EnergyScaled,
}

/// Initial values {W, ∂qW, ∂²qW} at q0 selecting one QSHJE solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Microstate<T> {
    pub q0: T,
    pub w0: T,
    pub p0: T,
    pub pp0: T,
    pub policy: InitialValuePolicy,
}

impl<T: Real> Microstate<T> {
    pub fn fixed(q0: T, w0: T, p0: T, pp0: T) -> Result<Self> {
        let m = Self { q0, w0, p0, pp0, policy: InitialValuePolicy::Fixed };
        m.validate()?;
        Ok(m)
    }

    /// Microstate at the origin with W = ∂²qW = 0 and the given momentum.
    pub fn symmetric(p0: T) -> Result<Self> {
        Self::fixed(T::zero(), T::zero(), p0, T::zero())
    }

    /// {0, (2mE)^{1/2}, 0} at the origin, re-resolved per energy.
    pub fn energy_scaled() -> Self {
        Self {
            q0: T::zero(),
            w0: T::zero(),
            p0: T::one(),
            pp0: T::zero(),
            policy: InitialValuePolicy::EnergyScaled,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.q0.is_finite() && self.w0.is_finite() && self.p0.is_finite() && self.pp0.is_finite()) {
            return Err(Error::InvalidArgument("microstate values must be finite".into()));
        }
        if self.p0 <= T::zero() {
            return Err(Error::InvalidArgument(format!(
                "initial conjugate momentum must be positive, got {}",
                self.p0
            )));
        }
        Ok(())
    }

    /// The concrete triple used at `energy`.
    ///
    /// Fixed microstates come back unchanged. Energy-scaled ones get
    /// p0 = (2mE)^{1/2} and are returned as fixed.
    pub fn resolve(&self, energy: T, constants: &Constants<T>) -> Result<Self> {
        match self.policy {
            InitialValuePolicy::Fixed => Ok(*self),
            InitialValuePolicy::EnergyScaled => {
                if !(energy > T::zero()) {
                    return Err(Error::EnergyOutOfRange {
                        energy: energy.as_f64(),
                        lo: 0.0,
                        hi: f64::INFINITY,
                    });
                }
                let p0 = (T::lit(2.0) * constants.mass * energy).sqrt();
                Ok(Self { p0, policy: InitialValuePolicy::Fixed, ..*self })
            }
        }
    }

    /// W0 = ∂²qW0 = 0 at the origin: the solution is odd on a symmetric potential.
    pub fn is_antisymmetric_at_origin(&self) -> bool {
        self.q0 == T::zero() && self.w0 == T::zero() && self.pp0 == T::zero()
    }
}

/// Whether an energy is a quantized eigenvalue or a virtual (non-eigenvalue) energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnergyKind {
    Eigenvalue,
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyValue<T> {
    pub value: T,
    pub kind: EnergyKind,
}

impl<T: Real> EnergyValue<T> {
    pub fn eigenvalue(value: T) -> Self {
        Self { value, kind: EnergyKind::Eigenvalue }
    }

    pub fn virtual_energy(value: T) -> Self {
        Self { value, kind: EnergyKind::Virtual }
    }
}

impl<T: Real> From<T> for EnergyValue<T> {
    fn from(value: T) -> Self {
        Self::virtual_energy(value)
    }
}

pub fn potential_value<T: Real>(potential: &Potential<T>, q: T) -> T {
    potential.value(q)
}

pub fn classical_conjugate_momentum<T: Real>(oscillator: &Oscillator<T>, energy: T, q: T) -> Result<T> {
    oscillator.classical_momentum(energy, q)
}

pub fn classical_time_lho<T: Real>(oscillator: &Oscillator<T>, energy: T, q: T) -> Result<T> {
    oscillator.classical_time(energy, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn potential_values() {
        let lho = Potential::<f64>::lho_natural();
        assert_eq!(lho.value(0.0), 0.0);
        assert_eq!(lho.value(1.0), 0.5);
        let well = Potential::FiniteSquareWell(SquareWell::new(1.0, FRAC_PI_4, Constants::natural()).unwrap());
        assert_eq!(well.value(1.0), 1.0);
        assert_eq!(well.value(FRAC_PI_4), 0.0);
        assert_eq!(well.value(-0.5), 0.0);
        assert_eq!(well.breakpoints(), vec![-FRAC_PI_4, FRAC_PI_4]);
        assert_eq!(well.breakpoints_between(0.0, 2.0), vec![FRAC_PI_4]);
        assert_eq!(well.breakpoints_between(2.0, -2.0), vec![FRAC_PI_4, -FRAC_PI_4]);
        assert!(well.breakpoints_between(0.0, FRAC_PI_4).is_empty());
    }

    #[test]
    fn classical_momentum_values() {
        let o = Oscillator::<f64>::natural();
        assert_eq!(o.classical_momentum(0.5, 0.0).unwrap(), 1.0);
        assert_eq!(o.classical_momentum(0.5, 1.0).unwrap(), 0.0);
        assert!((o.classical_momentum(2.0, 1.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(matches!(o.classical_momentum(0.5, 1.01), Err(Error::ClassicallyForbidden { .. })));
    }

    #[test]
    fn classical_time_values() {
        let o = Oscillator::<f64>::natural();
        assert_eq!(o.classical_time(0.5, 0.0).unwrap(), 0.0);
        assert!((o.classical_time(0.5, 1.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((o.classical_time(0.5, 0.5f64.sqrt()).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!(o.classical_time(0.5, -1.5).is_err());
        assert!((4.0 * o.classical_quarter_period() - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn microstate_resolution() {
        let c = Constants::<f64>::natural();
        let scaled = Microstate::energy_scaled();
        for e in [0.1, 0.5, 2.0, 32.0] {
            let r = scaled.resolve(e, &c).unwrap();
            assert_eq!(r.p0, (2.0 * e).sqrt());
            assert_eq!(r.policy, InitialValuePolicy::Fixed);
        }
        let fixed = Microstate::fixed(0.0, 0.0, 1.0, 0.5).unwrap();
        for e in [0.1, 0.5, 2.0] {
            assert_eq!(fixed.resolve(e, &c).unwrap(), fixed);
        }
        assert!(Microstate::<f64>::symmetric(0.0).is_err());
        assert!(Microstate::<f64>::symmetric(-1.0).is_err());
        assert!(scaled.resolve(0.0, &c).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(Constants::<f64>::new(0.0, 1.0).is_err());
        assert!(Constants::<f64>::new(1.0, -1.0).is_err());
        assert!(SquareWell::new(0.0, 1.0, Constants::<f64>::natural()).is_err());
        assert!(SquareWell::new(1.0, 0.0, Constants::<f64>::natural()).is_err());
        assert!(Oscillator::new(Constants::<f64>::natural(), 0.0).is_err());
    }
}
