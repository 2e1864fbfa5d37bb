//! Dipole moments μ, their spectral coefficients and the drift/cubic coefficients.

mod atoms;
mod coefficients;
mod report;

pub use atoms::{Atom, DipoleMoment};
pub use coefficients::{
    cubic_coefficient, cubic_series, drift_coefficient_bracket, drift_coefficient_series,
    drift_series, drift_weight, mu_coefficient, CouplingMatrices, CubicCoefficient, DriftValue, ModeColumns,
};
pub use report::{check_hypotheses, HypothesisReport, Tolerances, Verdicts};
