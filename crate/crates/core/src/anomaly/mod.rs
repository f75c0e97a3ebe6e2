//! Per-slice inverse-Jacobian coefficients of a time-sliced canonical
//! transformation, and the order-in-ε bookkeeping of slicing corrections.

mod coeffs;
mod sliced;

pub use coeffs::{
    anomaly_coefficients, constraint_surface_vanishing, exponentiation_deviation, free_particle_generating_function,
    free_particle_reference, harmonic_generating_function, jacobian_exponentiation_check, AnomalyCoeffs,
    ConsistencyReport, ExponentiationReport, GeneratingFunction, Origin, SurfaceEntry, SurfaceReport,
};
pub use sliced::{increment, sliced_expansion_check, taylor_increments, ScalingReport, SlicedReport};

use thiserror::Error;

use crate::expr::{EvalError, SampleError};
use crate::reduction::ReductionError;

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error("chart error: {0}")]
    Chart(#[from] SampleError),
    #[error("map rejected: {0}")]
    Map(#[from] ReductionError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("generating function: {0}")]
    Generator(String),
}
