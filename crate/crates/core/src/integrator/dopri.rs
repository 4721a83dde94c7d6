//! Adaptive Dormand-Prince 5(4) driver for a family of QSHJE triples that
//! share one step sequence.
//!
//! Every member of the family is the same third-order equation at its own
//! energy. Sharing the step sequence keeps the discretization identical
//! across members, which is what finite differences in energy need.

use super::tableau::*;
use super::{OdeState, Tolerances};
use crate::error::{Error, Result};
use crate::model::Potential;
use crate::scalar::Real;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Output of a family integration.
#[derive(Debug, Clone)]
pub(crate) struct FamilyRun<T> {
    /// `samples[j][i]`: member `i` at output point `j`.
    pub samples: Vec<Vec<OdeState<T>>>,
    /// Per member, the first output index past the freeze point.
    pub frozen_from: Vec<Option<usize>>,
}

struct System<'a, T> {
    energies: &'a [T],
    two_m_over_hbar2_x2: T,
    inv_2m: T,
    inv_hbar: T,
}

enum Eval {
    Ok,
    /// A stage produced p ≤ 0 or a non-finite value.
    Invalid { nonpositive: bool },
}

impl<'a, T: Real> System<'a, T> {
    fn new(potential: &'a Potential<T>, energies: &'a [T]) -> Self {
        let c = potential.constants();
        Self {
            energies,
            two_m_over_hbar2_x2: T::lit(4.0) * c.mass / (c.hbar * c.hbar),
            inv_2m: T::one() / (T::lit(2.0) * c.mass),
            inv_hbar: T::one() / c.hbar,
        }
    }

    /// Derivatives of every live member; `v` is the potential on the open segment.
    fn eval(&self, v: T, y: &[T], frozen: &[bool], dy: &mut [T]) -> Eval {
        let three_halves = T::lit(1.5);
        for (i, e) in self.energies.iter().enumerate() {
            let j = 3 * i;
            if frozen[i] {
                dy[j] = T::zero();
                dy[j + 1] = T::zero();
                dy[j + 2] = T::zero();
                continue;
            }
            let p = y[j + 1];
            let pp = y[j + 2];
            if !(p > T::zero()) || !pp.is_finite() {
                return Eval::Invalid { nonpositive: p <= T::zero() };
            }
            let kinetic = p * p * self.inv_2m;
            dy[j] = p;
            dy[j + 1] = pp;
            dy[j + 2] = three_halves * pp * pp / p - self.two_m_over_hbar2_x2 * p * (kinetic + v - *e);
            if !dy[j + 2].is_finite() {
                return Eval::Invalid { nonpositive: false };
            }
        }
        Eval::Ok
    }

    /// Weighted error norm; momenta are measured against their own magnitude
    /// because they decay over hundreds of decades in forbidden regions.
    fn error_norm(&self, y: &[T], ynew: &[T], err: &[T], frozen: &[bool], tol: &Tolerances<T>) -> T {
        let mut worst = T::zero();
        for i in 0..self.energies.len() {
            if frozen[i] {
                continue;
            }
            let j = 3 * i;
            let sw = tol.abs_tol + tol.rel_tol * y[j].abs().max(ynew[j].abs());
            let p = y[j + 1].abs().max(ynew[j + 1].abs());
            let sp = tol.rel_tol * p + tol.p_floor;
            let spp = tol.rel_tol * (y[j + 2].abs().max(ynew[j + 2].abs()) + p * p * self.inv_hbar) + tol.p_floor;
            worst = worst
                .max((err[j] / sw).abs())
                .max((err[j + 1] / sp).abs())
                .max((err[j + 2] / spp).abs());
        }
        worst
    }
}

struct Work<T> {
    k: [Vec<T>; 7],
    ytmp: Vec<T>,
    ynew: Vec<T>,
    /// Rounding carried out of the last accepted update (compensated sum).
    comp: Vec<T>,
    comp_new: Vec<T>,
    err: Vec<T>,
    dense: [Vec<T>; 5],
}

impl<T: Real> Work<T> {
    fn new(n: usize) -> Self {
        let z = || vec![T::zero(); n];
        Self {
            k: [z(), z(), z(), z(), z(), z(), z()],
            ytmp: z(),
            ynew: z(),
            comp: z(),
            comp_new: z(),
            err: z(),
            dense: [z(), z(), z(), z(), z()],
        }
    }
}

fn flatten<T: Real>(states: &[OdeState<T>]) -> Vec<T> {
    states.iter().flat_map(|s| [s.w, s.p, s.pp]).collect()
}

fn unflatten<T: Real>(y: &[T]) -> Vec<OdeState<T>> {
    y.chunks_exact(3).map(|c| OdeState { w: c[0], p: c[1], pp: c[2] }).collect()
}

/// Integrates every member from `start` to `end`, reporting states at
/// `outputs` (monotone in the direction of travel, inside `[start, end]`).
///
/// Intervals are split at the potential's breakpoints so no step straddles a
/// discontinuity of V.
pub(crate) fn run_family<T: Real>(
    potential: &Potential<T>,
    energies: &[T],
    start: T,
    initial: &[OdeState<T>],
    end: T,
    outputs: &[T],
    tol: &Tolerances<T>,
) -> Result<FamilyRun<T>> {
    assert_eq!(energies.len(), initial.len());
    if !(start.is_finite() && end.is_finite()) || start == end {
        return Err(Error::InvalidArgument("integration interval must be finite and non-empty".into()));
    }
    let dir = (end - start).signum();
    let system = System::new(potential, energies);
    let members = energies.len();
    let mut y = flatten(initial);
    let mut frozen = vec![false; members];
    let mut frozen_from = vec![None; members];
    let mut samples: Vec<Vec<OdeState<T>>> = Vec::with_capacity(outputs.len());
    let mut next_out = 0usize;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut work = Work::new(y.len());

    for i in 0..members {
        if !(initial[i].p > T::zero()) {
            return Err(Error::MonotonicityViolation { q: start.as_f64(), p: initial[i].p.as_f64() });
        }
    }

    // outputs sitting exactly on the start point
    while next_out < outputs.len() && outputs[next_out] == start {
        samples.push(unflatten(&y));
        next_out += 1;
    }

    let mut knots = vec![start];
    knots.extend(potential.breakpoints_between(start, end));
    knots.push(end);

    for seg in knots.windows(2) {
        let (s0, s1) = (seg[0], seg[1]);
        // V is constant or smooth on the open segment; sample it at the midpoint
        // for piecewise-constant wells so a knot never picks the wrong side.
        let piecewise = matches!(potential, Potential::FiniteSquareWell(_));
        let v_mid = potential.value(T::lit(0.5) * (s0 + s1));
        let v_at = |q: T| if piecewise { v_mid } else { potential.value(q) };

        let mut q = s0;
        let seg_len = (s1 - s0).abs();
        let mut h = initial_step(&system, &v_at, q, &y, &frozen, dir, seg_len, tol, &mut work)?;
        let mut fac_old = T::lit(1e-4);
        let mut last_rejected = false;
        let mut fsal_valid = false;

        loop {
            if accepted + rejected >= tol.max_steps {
                return Err(Error::StepLimitExceeded { q: q.as_f64(), max_steps: tol.max_steps });
            }
            let remaining = (s1 - q) * dir;
            let mut hit_end = false;
            if (h * T::lit(1.01)).abs() >= remaining {
                h = s1 - q;
                hit_end = true;
            }
            if h.abs() <= T::epsilon() * T::lit(16.0) * q.abs().max(T::one()) {
                return Err(Error::StepSizeUnderflow { q: q.as_f64() });
            }

            if !fsal_valid {
                if let Eval::Invalid { nonpositive } = system.eval(v_at(q), &y, &frozen, &mut work.k[0]) {
                    return Err(invalid_state(q, &y, nonpositive));
                }
            }

            let stage = attempt_step(&system, &v_at, q, h, &y, &frozen, &mut work);
            let (err_norm, stage_ok) = match stage {
                Eval::Ok => (system.error_norm(&y, &work.ynew, &work.err, &frozen, tol), true),
                Eval::Invalid { .. } => (T::infinity(), false),
            };

            if stage_ok && err_norm <= T::one() {
                accepted += 1;
                let q_new = if hit_end { s1 } else { q + h };
                build_dense(h, &y, &mut work);

                while next_out < outputs.len() && (outputs[next_out] - q_new) * dir <= T::zero() {
                    let x = outputs[next_out];
                    let row = if x == q_new {
                        unflatten(&work.ynew)
                    } else {
                        let theta = (x - q) / h;
                        unflatten(&dense_eval(theta, &frozen, &y, &work))
                    };
                    samples.push(row);
                    next_out += 1;
                }

                std::mem::swap(&mut y, &mut work.ynew);
                std::mem::swap(&mut work.comp, &mut work.comp_new);
                // k7 at the new point is k1 of the next step
                let (first, rest) = work.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                fsal_valid = true;

                for i in 0..members {
                    if frozen[i] {
                        continue;
                    }
                    let p = y[3 * i + 1];
                    if !(p > T::zero()) {
                        return Err(Error::MonotonicityViolation { q: q_new.as_f64(), p: p.as_f64() });
                    }
                    if p <= tol.p_floor {
                        frozen[i] = true;
                        frozen_from[i] = Some(next_out);
                        fsal_valid = false;
                    }
                }

                q = q_new;
                if hit_end {
                    break;
                }

                let fac11 = err_norm.max(T::lit(1e-300)).powf(T::lit(0.2 - BETA * 0.75));
                let mut fac = fac11 / fac_old.powf(T::lit(BETA));
                fac = (fac / T::lit(SAFETY)).min(T::one() / T::lit(FAC_MIN)).max(T::one() / T::lit(FAC_MAX));
                let mut h_new = h / fac;
                if last_rejected && h_new.abs() > h.abs() {
                    h_new = h;
                }
                fac_old = err_norm.max(T::lit(1e-4));
                last_rejected = false;
                h = h_new;
            } else {
                rejected += 1;
                last_rejected = true;
                if stage_ok {
                    let fac11 = err_norm.powf(T::lit(0.2 - BETA * 0.75));
                    h = h / (T::one() / T::lit(FAC_MIN)).min(fac11 / T::lit(SAFETY));
                } else {
                    h = h * T::lit(0.25);
                }
                if h.abs() <= T::epsilon() * T::lit(16.0) * q.abs().max(T::one()) {
                    if !stage_ok {
                        return Err(Error::MonotonicityViolation {
                            q: q.as_f64(),
                            p: smallest_momentum(&y, &frozen).as_f64(),
                        });
                    }
                    return Err(Error::StepSizeUnderflow { q: q.as_f64() });
                }
            }
        }
    }

    // anything left (only possible when an output equals `end` after rounding)
    while samples.len() < outputs.len() {
        samples.push(unflatten(&y));
    }

    Ok(FamilyRun { samples, frozen_from })
}

fn smallest_momentum<T: Real>(y: &[T], frozen: &[bool]) -> T {
    y.chunks_exact(3)
        .zip(frozen)
        .filter(|(_, f)| !**f)
        .map(|(c, _)| c[1])
        .fold(T::infinity(), |a, b| a.min(b))
}

fn invalid_state<T: Real>(q: T, y: &[T], nonpositive: bool) -> Error {
    if nonpositive {
        let p = y.chunks_exact(3).map(|c| c[1]).fold(T::infinity(), |a, b| a.min(b));
        Error::MonotonicityViolation { q: q.as_f64(), p: p.as_f64() }
    } else {
        Error::NonFiniteState { q: q.as_f64() }
    }
}

fn attempt_step<T: Real, F: Fn(T) -> T>(
    sys: &System<'_, T>,
    v_at: &F,
    q: T,
    h: T,
    y: &[T],
    frozen: &[bool],
    w: &mut Work<T>,
) -> Eval {
    let n = y.len();
    let lit = T::lit;

    macro_rules! stage {
        ($dst:expr, $c:expr, [$( ($a:expr, $ki:expr) ),*]) => {{
            for j in 0..n {
                let mut acc = T::zero();
                $( acc = acc + lit($a) * w.k[$ki][j]; )*
                w.ytmp[j] = y[j] + h * acc;
            }
            let (_, out) = w.k.split_at_mut($dst);
            if let Eval::Invalid { nonpositive } = sys.eval(v_at(q + lit($c) * h), &w.ytmp, frozen, &mut out[0]) {
                return Eval::Invalid { nonpositive };
            }
        }};
    }

    stage!(1, C2, [(A21, 0)]);
    stage!(2, C3, [(A31, 0), (A32, 1)]);
    stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
    stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
    stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);

    for j in 0..n {
        let acc = lit(A71) * w.k[0][j]
            + lit(A73) * w.k[2][j]
            + lit(A74) * w.k[3][j]
            + lit(A75) * w.k[4][j]
            + lit(A76) * w.k[5][j];
        let inc = h * acc - w.comp[j];
        let sum = y[j] + inc;
        w.comp_new[j] = (sum - y[j]) - inc;
        w.ynew[j] = sum;
    }
    {
        let (_, out) = w.k.split_at_mut(6);
        if let Eval::Invalid { nonpositive } = sys.eval(v_at(q + h), &w.ynew, frozen, &mut out[0]) {
            return Eval::Invalid { nonpositive };
        }
    }
    for j in 0..n {
        w.err[j] = h
            * (lit(E1) * w.k[0][j]
                + lit(E3) * w.k[2][j]
                + lit(E4) * w.k[3][j]
                + lit(E5) * w.k[4][j]
                + lit(E6) * w.k[5][j]
                + lit(E7) * w.k[6][j]);
    }
    Eval::Ok
}

fn build_dense<T: Real>(h: T, y: &[T], w: &mut Work<T>) {
    let lit = T::lit;
    for j in 0..y.len() {
        let dy = w.ynew[j] - y[j];
        let bspl = h * w.k[0][j] - dy;
        w.dense[0][j] = y[j];
        w.dense[1][j] = dy;
        w.dense[2][j] = bspl;
        w.dense[3][j] = dy - h * w.k[6][j] - bspl;
        w.dense[4][j] = h
            * (lit(D1) * w.k[0][j]
                + lit(D3) * w.k[2][j]
                + lit(D4) * w.k[3][j]
                + lit(D5) * w.k[4][j]
                + lit(D6) * w.k[5][j]
                + lit(D7) * w.k[6][j]);
    }
}

fn dense_eval<T: Real>(theta: T, frozen: &[bool], y: &[T], w: &Work<T>) -> Vec<T> {
    let theta1 = T::one() - theta;
    let d = &w.dense;
    (0..y.len())
        .map(|j| {
            if frozen[j / 3] {
                y[j]
            } else {
                d[0][j] + theta * (d[1][j] + theta1 * (d[2][j] + theta * (d[3][j] + theta1 * d[4][j])))
            }
        })
        .collect()
}

/// Starting step size from the local derivative scales, bounded by the segment.
#[allow(clippy::too_many_arguments)]
fn initial_step<T: Real, F: Fn(T) -> T>(
    sys: &System<'_, T>,
    v_at: &F,
    q: T,
    y: &[T],
    frozen: &[bool],
    dir: T,
    seg_len: T,
    tol: &Tolerances<T>,
    w: &mut Work<T>,
) -> Result<T> {
    if let Eval::Invalid { nonpositive } = sys.eval(v_at(q), y, frozen, &mut w.k[0]) {
        return Err(invalid_state(q, y, nonpositive));
    }
    // ||y|| and ||f|| measured with the same component scales as the error norm
    let d0 = sys.error_norm(y, y, y, frozen, tol);
    let d1 = sys.error_norm(y, y, &w.k[0], frozen, tol);
    let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    h0 = h0.min(seg_len);
    for j in 0..y.len() {
        w.ytmp[j] = y[j] + h0 * dir * w.k[0][j];
    }
    let d2 = match sys.eval(v_at(q + h0 * dir), &w.ytmp, frozen, &mut w.k[1]) {
        Eval::Ok => {
            for j in 0..y.len() {
                w.err[j] = w.k[1][j] - w.k[0][j];
            }
            sys.error_norm(y, y, &w.err, frozen, tol) / h0
        }
        Eval::Invalid { .. } => T::infinity(),
    };
    let big = d1.max(d2);
    let h1 = if big <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / big).powf(T::lit(0.2))
    };
    let h = (h0 * T::lit(100.0)).min(h1).min(seg_len);
    Ok(h * dir)
}
