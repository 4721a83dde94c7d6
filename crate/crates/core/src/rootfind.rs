//! Bracketing root finder: regula falsi with the Illinois modification and a
//! bisection fallback.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Stopping rules for [`illinois`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions<T> {
    /// Stop once the bracket is narrower than this.
    pub x_tol: T,
    /// Stop once |f| is at or below this.
    pub f_tol: T,
    pub max_evaluations: usize,
}

impl<T: Real> RootOptions<T> {
    pub fn new(x_tol: T, f_tol: T, max_evaluations: usize) -> Self {
        Self { x_tol, f_tol, max_evaluations }
    }
}

/// Result of a bracketing solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub f: T,
    /// Function evaluations, including the two endpoint evaluations.
    pub evaluations: usize,
    /// Bracket width after every iteration.
    pub widths: Vec<T>,
}

/// Finds a root of `f` on `[lo, hi]`, which must straddle a sign change.
///
/// Terminates when both the bracket is narrower than `x_tol` and `|f|` is at
/// most `f_tol`, or when `f` hits exactly zero.
pub fn illinois<T: Real, F>(mut f: F, lo: T, hi: T, opts: &RootOptions<T>) -> Result<Root<T>>
where
    F: FnMut(T) -> Result<T>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    let mut evaluations = 2;
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::NonFiniteState { q: if fa.is_finite() { b.as_f64() } else { a.as_f64() } });
    }
    if fa == T::zero() {
        return Ok(Root { x: a, f: fa, evaluations, widths: vec![b - a] });
    }
    if fb == T::zero() {
        return Ok(Root { x: b, f: fb, evaluations, widths: vec![b - a] });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo: a.as_f64(), hi: b.as_f64() });
    }

    let mut widths = vec![b - a];
    // +1 when the last update moved `b`, −1 for `a`
    let mut side = 0i8;
    let (mut best_x, mut best_f) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };

    while evaluations < opts.max_evaluations {
        let width = b - a;
        if width <= opts.x_tol && best_f.abs() <= opts.f_tol {
            return Ok(Root { x: best_x, f: best_f, evaluations, widths });
        }
        let mut x = (a * fb - b * fa) / (fb - fa);
        // fall back to the midpoint when the secant leaves the bracket or stalls
        let mid = T::lit(0.5) * (a + b);
        if !(x > a && x < b) || width <= opts.x_tol {
            x = mid;
        }
        let fx = f(x)?;
        evaluations += 1;
        if !fx.is_finite() {
            return Err(Error::NonFiniteState { q: x.as_f64() });
        }
        if fx.abs() < best_f.abs() || (fx.abs() == best_f.abs() && x != best_x) {
            best_x = x;
            best_f = fx;
        }
        if fx == T::zero() {
            widths.push(T::zero());
            return Ok(Root { x, f: fx, evaluations, widths });
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == 1 {
                fa = fa * T::lit(0.5);
            }
            side = 1;
        } else {
            a = x;
            fa = fx;
            if side == -1 {
                fb = fb * T::lit(0.5);
            }
            side = -1;
        }
        let new_width = b - a;
        // bisect outright if regula falsi shrank the bracket by less than half
        if new_width > T::lit(0.5) * width && new_width > opts.x_tol {
            let m = T::lit(0.5) * (a + b);
            let fm = f(m)?;
            evaluations += 1;
            if !fm.is_finite() {
                return Err(Error::NonFiniteState { q: m.as_f64() });
            }
            if fm.abs() < best_f.abs() {
                best_x = m;
                best_f = fm;
            }
            if fm == T::zero() {
                widths.push(T::zero());
                return Ok(Root { x: m, f: fm, evaluations, widths });
            }
            if fm.signum() == fb.signum() {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            side = 0;
        }
        widths.push(b - a);
    }
    if b - a <= opts.x_tol && best_f.abs() <= opts.f_tol {
        return Ok(Root { x: best_x, f: best_f, evaluations, widths });
    }
    Err(Error::MaxIterations(evaluations))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> RootOptions<f64> {
        RootOptions::new(1e-13, 1e-14, 200)
    }

    #[test]
    fn finds_sqrt_two() {
        let r = illinois(|x: f64| Ok(x * x - 2.0), 0.0, 2.0, &opts()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-13);
        assert!(r.evaluations < 30, "{}", r.evaluations);
    }

    #[test]
    fn widths_never_grow() {
        let r = illinois(|x: f64| Ok((x - 0.3).powi(3) + 1e-3 * (x - 0.3)), -5.0, 7.0, &opts()).unwrap();
        assert!(r.widths.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn flat_function_still_converges() {
        // regula falsi alone stagnates on this one
        let r = illinois(|x: f64| Ok(x.powi(9) - 1e-9), -1.0, 4.0, &RootOptions::new(1e-12, 1e-19, 400)).unwrap();
        assert!((r.x - 0.1).abs() < 1e-11, "{}", r.x);
    }

    #[test]
    fn reversed_bracket_and_exact_root() {
        let r = illinois(|x: f64| Ok(x - 1.0), 3.0, -1.0, &opts()).unwrap();
        assert_eq!(r.x, 1.0);
        let r = illinois(|x: f64| Ok(x), 0.0, 1.0, &opts()).unwrap();
        assert_eq!(r.x, 0.0);
    }

    #[test]
    fn reports_missing_sign_change() {
        let e = illinois(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, &opts()).unwrap_err();
        assert_eq!(e, Error::NoSignChange { lo: -1.0, hi: 1.0 });
    }

    #[test]
    fn reports_iteration_cap() {
        let e = illinois(|x: f64| Ok(x.powi(3) - 0.123), 0.0, 1.0, &RootOptions::new(0.0, 0.0, 5)).unwrap_err();
        assert!(matches!(e, Error::MaxIterations(_)));
    }

    #[test]
    fn propagates_errors() {
        let e = illinois(|_x: f64| Err::<f64, _>(Error::PolicyViolation), 0.0, 1.0, &opts()).unwrap_err();
        assert_eq!(e, Error::PolicyViolation);
    }
}
