//! Reference oscillator tables, recomputed and compared cell by cell.
//!
//! Reference values are kept at their printed precision.

use std::f64::consts::PI;
use std::fmt::Write as _;

use qhj::jacobi::{quarter_transit, DEFAULT_EPSILON};
use qhj::milne::{action_variable, default_q_max, ActionMode};
use qhj::{Microstate, Potential, Result, Tolerances};
use rayon::prelude::*;

/// One compared cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub computed: f64,
    pub reference: f64,
    /// Largest accepted |computed − reference|.
    pub tolerance: f64,
    pub pass: bool,
}

impl TableRow {
    fn new(label: String, computed: f64, reference: f64, tolerance: f64) -> Self {
        let pass = (computed - reference).abs() <= tolerance;
        Self { label, computed, reference, tolerance, pass }
    }

    /// Ordering or sign check; 1 means it holds.
    fn check(label: String, holds: bool) -> Self {
        let computed = if holds { 1.0 } else { 0.0 };
        Self { label, computed, reference: 1.0, tolerance: 0.0, pass: holds }
    }

    /// Shown for completeness, never failing.
    fn info(label: String, computed: f64, reference: f64) -> Self {
        Self { label, computed, reference, tolerance: f64::INFINITY, pass: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub table_id: u8,
    pub rows: Vec<TableRow>,
    pub overall_pass: bool,
}

impl TableReport {
    fn new(table_id: u8, rows: Vec<TableRow>) -> Self {
        let overall_pass = rows.iter().all(|r| r.pass);
        Self { table_id, rows, overall_pass }
    }

    pub fn failures(&self) -> impl Iterator<Item = &TableRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// CSV with header `label,computed,reference,tolerance,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,computed,reference,tolerance,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.label,
                qhj::io::format_float(r.computed),
                qhj::io::format_float(r.reference),
                qhj::io::format_float(r.tolerance),
                r.pass
            );
        }
        out
    }
}

/// Half a unit in the `digits`-th significant place of `reference`.
pub fn sig_fig_tolerance(reference: f64, digits: i32) -> f64 {
    if reference == 0.0 {
        return 0.0;
    }
    0.5 * 10f64.powi(reference.abs().log10().floor() as i32 - (digits - 1))
}

/// Initial conjugate momentum of the four oscillator cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    A,
    B,
    C,
    D,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::A, Case::B, Case::C, Case::D];

    pub fn p0(self, energy: f64) -> f64 {
        match self {
            Case::A => 0.5,
            Case::B => (2.0 * energy).sqrt(),
            Case::C => 1.0,
            Case::D => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
            Case::D => "D",
        }
    }
}

pub const TABLE1_ENERGIES: [f64; 13] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6];

/// J/π per energy row, columns A–D.
pub const TABLE1_J_OVER_PI: [[f64; 4]; 13] = [
    [1.592, 1.766, 1.791, 1.895],
    [2.0, 2.0, 2.0, 2.0],
    [2.464, 2.220, 2.240, 2.121],
    // printed "2.882 π6" in column A
    [2.882, 2.430, 2.501, 2.261],
    [3.199, 2.633, 2.766, 2.421],
    [3.423, 2.832, 3.017, 2.604],
    [3.585, 3.029, 3.243, 2.811],
    [3.705, 3.223, 3.439, 3.038],
    [3.799, 3.417, 3.608, 3.279],
    [3.876, 3.611, 3.754, 3.525],
    [3.941, 3.805, 3.883, 3.768],
    [4.0, 4.0, 4.0, 4.0],
    [4.055, 4.196, 4.110, 4.219],
];

/// J/(2π) − E − 1/2 per energy row; NaN on the eigenvalue rows.
pub const TABLE1_RESIDUAL: [[f64; 4]; 13] = [
    [-0.104, -0.0168, -0.00473, 0.0473],
    [f64::NAN; 4],
    [0.132, 0.00979, 0.0200, -0.0395],
    [0.241, 0.0148, 0.0505, -0.0697],
    [0.299, 0.0166, 0.0834, -0.0895],
    [0.312, 0.0162, 0.109, -0.0978],
    [0.293, 0.0143, 0.122, -0.0946],
    [0.253, 0.0124, 0.120, -0.0812],
    [0.200, 0.00856, 0.104, -0.0607],
    [0.138, 0.00544, 0.0770, -0.0374],
    [0.0707, 0.00252, 0.0410, -0.0161],
    [f64::NAN; 4],
    // column D printed as "+0.00934e-3", which its own J column contradicts
    [-0.0724, -0.00201, -0.0450, 0.00934e-3],
];

/// Printed bounds on |J/(2π) − E − 1/2| at the two eigenvalues.
pub const TABLE1_EIGEN_BOUNDS: [[f64; 4]; 2] = [[2e-15, 2e-15, 2e-15, 2e-15], [2e-14, 2e-15, 9e-15, 2e-15]];

/// Residual bound this solver is held to at eigenvalues.
pub const EIGEN_RESIDUAL_BAR: f64 = 1e-9;

pub const TABLE2_ENERGIES: [f64; 3] = [0.499, 0.5, 0.501];

/// (J − 2π)/π, columns A–D.
pub const TABLE2_J_MINUS_2PI_OVER_PI: [[f64; 4]; 3] = [
    [-0.004510, -0.002257, -0.002255, -0.001128],
    [5.329e-15, 3.997e-15, 3.997e-15, 1.312e-15],
    [0.004517, 0.002256, 0.002258, 0.001129],
];

pub const TABLE3_ENERGIES: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// Case B, J/(2π) − E − 1/2.
pub const TABLE3_RESIDUAL: [f64; 6] = [0.0287, -0.00883, -0.00240, -6.16e-4, -1.55e-4, -3.89e-5];

/// (E, p0, T/4 − π/2) at eigenvalues.
pub const TABLE4_EIGEN: [(f64, f64, f64); 7] = [
    (0.5, 1.0, 2.02e-1),
    (1.5, 1.7320508075688772, -3.58e-2),
    (2.5, 2.23606797749979, 1.45e-2),
    (3.5, 2.6457513110645907, -7.64e-3),
    (4.5, 3.0, 4.72e-3),
    (9.5, 4.358898943540674, -1.08e-3),
    (14.5, 5.385164807134504, 4.66e-4),
];

/// (E, p0, T/4 − π/2) at integer energies. Every row takes p0 = (2E)^{1/2};
/// the E = 4 row is printed with 2^{5/2}.
pub const TABLE4_VIRTUAL: [(f64, f64, f64); 7] = [
    (1.0, std::f64::consts::SQRT_2, 2.13e-1),
    (2.0, 2.0, -1.19e-1),
    (3.0, 2.449489742783178, 8.12e-2),
    (4.0, 2.8284271247461903, -6.14e-2),
    (5.0, 3.1622776601683795, 5.05e-2),
    (10.0, 4.47213595499958, -2.50e-2),
    (15.0, 5.477225575051661, 1.66e-2),
];

pub const TABLE4_RELATIVE: f64 = 0.05;

/// Quarter-symmetric action from the origin triple {0, p0, 0}.
pub fn oscillator_action(energy: f64, p0: f64, tol: &Tolerances<f64>) -> Result<f64> {
    let lho = Potential::lho_natural();
    let m = Microstate::symmetric(p0)?;
    let q_max = default_q_max(&lho, energy);
    Ok(action_variable(&lho, energy, &m, q_max, ActionMode::QuarterSymmetric, tol)?.j)
}

/// T/4 − π/2 from the origin triple {0, p0, 0}.
pub fn oscillator_transit_delta(energy: f64, p0: f64, tol: &Tolerances<f64>) -> Result<f64> {
    let lho = Potential::lho_natural();
    let m = Microstate::symmetric(p0)?;
    Ok(quarter_transit(&lho, energy, &m, None, DEFAULT_EPSILON, tol)?.delta)
}

pub fn run_table(table_id: u8, tol: &Tolerances<f64>) -> Result<TableReport> {
    match table_id {
        1 => table1(tol),
        2 => table2(tol),
        3 => table3(tol),
        4 => table4(tol),
        _ => Err(qhj::Error::InvalidArgument(format!("no table {table_id}; expected 1 to 4"))),
    }
}

fn table1(tol: &Tolerances<f64>) -> Result<TableReport> {
    let cells: Vec<(usize, Case)> =
        (0..TABLE1_ENERGIES.len()).flat_map(|i| Case::ALL.into_iter().map(move |c| (i, c))).collect();
    let js: Vec<f64> = cells
        .par_iter()
        .map(|&(i, c)| {
            let e = TABLE1_ENERGIES[i];
            oscillator_action(e, c.p0(e), tol)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (&(i, c), &j) in cells.iter().zip(&js) {
        let e = TABLE1_ENERGIES[i];
        let col = c as usize;
        let reference = TABLE1_J_OVER_PI[i][col];
        rows.push(TableRow::new(format!("J/pi case {} E={}", c.name(), e), j / PI, reference, sig_fig_tolerance(reference, 3)));

        let residual = j / (2.0 * PI) - e - 0.5;
        let label = format!("J/2pi-E-0.5 case {} E={}", c.name(), e);
        let printed = TABLE1_RESIDUAL[i][col];
        if printed.is_nan() {
            let k = if e == 0.5 { 0 } else { 1 };
            let bound = TABLE1_EIGEN_BOUNDS[k][col];
            rows.push(TableRow::new(label, residual.abs(), bound, EIGEN_RESIDUAL_BAR));
        } else if c == Case::D && e == 1.6 {
            // compared against what the printed J implies
            rows.push(TableRow::info(label, residual, reference / 2.0 - e - 0.5));
        } else {
            rows.push(TableRow::new(label, residual, printed, sig_fig_tolerance(printed, 3)));
        }
    }
    Ok(TableReport::new(1, rows))
}

fn table2(tol: &Tolerances<f64>) -> Result<TableReport> {
    let cells: Vec<(usize, Case)> =
        (0..TABLE2_ENERGIES.len()).flat_map(|i| Case::ALL.into_iter().map(move |c| (i, c))).collect();
    let js: Vec<f64> = cells
        .par_iter()
        .map(|&(i, c)| {
            let e = TABLE2_ENERGIES[i];
            oscillator_action(e, c.p0(e), tol)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (&(i, c), &j) in cells.iter().zip(&js) {
        let e = TABLE2_ENERGIES[i];
        let reference = TABLE2_J_MINUS_2PI_OVER_PI[i][c as usize];
        let computed = (j - 2.0 * PI) / PI;
        let label = format!("(J-2pi)/pi case {} E={}", c.name(), e);
        if e == 0.5 {
            rows.push(TableRow::new(label, computed.abs(), reference, 2.0 * EIGEN_RESIDUAL_BAR));
        } else {
            rows.push(TableRow::new(label, computed, reference, sig_fig_tolerance(reference, 3)));
        }
    }
    for c in Case::ALL {
        let col = c as usize;
        let (lo, hi) = (js[col] - 2.0 * PI, js[2 * 4 + col] - 2.0 * PI);
        let mag = lo.abs().max(hi.abs());
        rows.push(TableRow::check(format!("antisymmetric about E=0.5 case {}", c.name()), (lo + hi).abs() <= 0.01 * mag));
    }
    Ok(TableReport::new(2, rows))
}

fn table3(tol: &Tolerances<f64>) -> Result<TableReport> {
    let residuals: Vec<f64> = TABLE3_ENERGIES
        .par_iter()
        .map(|&e| Ok(oscillator_action(e, Case::B.p0(e), tol)? / (2.0 * PI) - e - 0.5))
        .collect::<Result<_>>()?;
    let mut rows: Vec<TableRow> = TABLE3_ENERGIES
        .iter()
        .zip(&residuals)
        .zip(&TABLE3_RESIDUAL)
        .map(|((e, &r), &reference)| {
            TableRow::new(format!("J/2pi-E-0.5 case B E={e}"), r, reference, sig_fig_tolerance(reference, 2))
        })
        .collect();
    let decreasing = residuals.windows(2).all(|w| w[1].abs() < w[0].abs());
    rows.push(TableRow::check("magnitudes strictly decrease".into(), decreasing));
    Ok(TableReport::new(3, rows))
}

fn table4(tol: &Tolerances<f64>) -> Result<TableReport> {
    let all: Vec<(f64, f64, f64)> = TABLE4_EIGEN.iter().chain(&TABLE4_VIRTUAL).copied().collect();
    let deltas: Vec<f64> =
        all.par_iter().map(|&(e, p0, _)| oscillator_transit_delta(e, p0, tol)).collect::<Result<_>>()?;
    let mut rows: Vec<TableRow> = all
        .iter()
        .zip(&deltas)
        .map(|(&(e, _, reference), &d)| {
            let mut row = TableRow::new(format!("T/4-pi/2 E={e}"), d, reference, TABLE4_RELATIVE * reference.abs());
            row.pass &= d.signum() == reference.signum();
            row
        })
        .collect();
    let (eigen, virt) = deltas.split_at(TABLE4_EIGEN.len());
    for (name, d) in [("eigenvalue", eigen), ("integer", virt)] {
        let alternates = d.iter().enumerate().all(|(i, x)| (x > &0.0) == (i % 2 == 0));
        rows.push(TableRow::check(format!("{name} rows alternate in sign"), alternates));
        let shrinking = d.windows(2).all(|w| w[1].abs() < w[0].abs());
        rows.push(TableRow::check(format!("{name} rows decrease in magnitude"), shrinking));
    }
    Ok(TableReport::new(4, rows))
}
