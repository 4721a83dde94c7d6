//! Solver for the one-dimensional quantum stationary Hamilton-Jacobi equation.
//!
//! The reduced action W(q) is integrated from an initial triple
//! {W0, W'0, W''0} via the third-order form of the equation. On top of that
//! sit the Milne action variable, time from Jacobi's theorem and the closed
//! form for the finite square well.
//!
//! All numerics are generic over [`Real`]; the aliases below fix the scalar.

pub mod error;
pub mod integrator;
pub mod io;
pub mod jacobi;
pub mod milne;
pub mod model;
pub mod rootfind;
pub mod scalar;
pub mod squarewell;

pub use error::{Error, Result};
pub use integrator::{OdeState, ReducedActionGrid, Tolerances};
pub use model::{Constants, EnergyKind, EnergyValue, InitialValuePolicy, Microstate, Oscillator, Potential, SquareWell};
pub use scalar::Real;

pub type Potential64 = Potential<f64>;
pub type Microstate64 = Microstate<f64>;
pub type Grid64 = ReducedActionGrid<f64>;
pub type Tolerances64 = Tolerances<f64>;
pub type Well64 = SquareWell<f64>;

pub type Potential32 = Potential<f32>;
pub type Microstate32 = Microstate<f32>;
pub type Grid32 = ReducedActionGrid<f32>;
pub type Tolerances32 = Tolerances<f32>;
pub type Well32 = SquareWell<f32>;
