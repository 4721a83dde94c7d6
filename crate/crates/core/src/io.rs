//! Text output helpers shared by the CSV writers.

use crate::scalar::Real;

/// Scientific notation with 17 significant digits.
pub fn format_float<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}
