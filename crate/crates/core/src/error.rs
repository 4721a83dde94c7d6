use thiserror::Error;

/// Failures raised by the physics and numerics layers.
///
/// Positions and energies are reported as `f64` whatever the working scalar.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("position q = {q} lies in the classically forbidden region at E = {energy}")]
    ClassicallyForbidden { q: f64, energy: f64 },

    #[error("conjugate momentum {p:e} fell below the floor at q = {q}")]
    MomentumUnderflow { q: f64, p: f64 },

    #[error("conjugate momentum became non-positive ({p:e}) at q = {q}; parasitic solution")]
    MonotonicityViolation { q: f64, p: f64 },

    #[error("step limit of {max_steps} exceeded at q = {q}")]
    StepLimitExceeded { q: f64, max_steps: usize },

    #[error("non-finite state encountered at q = {q}")]
    NonFiniteState { q: f64 },

    #[error("step size underflow at q = {q}")]
    StepSizeUnderflow { q: f64 },

    #[error("operation requires a harmonic-oscillator potential")]
    WrongPotential,

    #[error("mode precondition violated: {0}")]
    ModeViolation(&'static str),

    #[error("time parametrization requires a fixed microstate")]
    PolicyViolation,

    #[error("energy {energy} outside the admissible range ({lo}, {hi}]")]
    EnergyOutOfRange { energy: f64, lo: f64, hi: f64 },

    #[error("action {action} outside the attainable range ({lo}, {hi}]")]
    ActionOutOfRange { action: f64, lo: f64, hi: f64 },

    #[error("exterior coefficients are degenerate at the threshold (kappa = 0)")]
    ThresholdDegenerate,

    #[error("residual has no sign change over [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root finder did not converge within {0} evaluations")]
    MaxIterations(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
