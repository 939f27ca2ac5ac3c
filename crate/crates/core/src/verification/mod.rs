//! Manufactured solutions, discrete error norms, convergence studies and
//! numerical checks of the stability properties of the scheme.

mod convergence;
mod errors;
mod manufactured;
mod studies;

pub use convergence::{
    eoc, lsq_slope, run_convergence, run_convergence_for, ConvergenceConfig, ConvergenceReport, LevelResult,
};
pub use errors::{error_pressure, error_velocity, pressure_lebesgue_norm};
pub use manufactured::{ExactSolution, ManufacturedCase, PolynomialSolution, TrigonometricSolution};
pub use studies::{
    infsup_constant, infsup_study, korn_study, monotonicity_study, InfSupLevel, InfSupReport, KornLevel, KornReport,
    MonotonicityReport,
};
