//! Classical delta-squeezed amplitudes, Jacobi-field determinants and
//! time-sliced quantum propagators for the reduced quadratic systems.

mod flow;
mod jacobi;
mod lattice;
mod scaling;

pub use flow::{classical_flow, hamiltonian_flow, FlowResult};
pub use jacobi::{classical_amplitude, fluctuation_det, AmplitudeSource, Quadratic, FOCAL_THRESHOLD};
pub use lattice::{
    partition_reference, propagate_quantum, propagate_standard, trotter_convergence, KernelResult, LatticeConfig,
    Mode, PartitionResult, PropagatorResult, StandardForm, TrotterReport,
};
pub use scaling::{
    bridge_variance_study, deterministic_increment_study, hbar_scaling_report, BridgeStudy, HbarReport,
    IncrementStudy,
};

use thiserror::Error;

use crate::expr::EvalError;
use crate::reduction::ReductionError;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("evaluation failed at t = {t}: {source}")]
    Singular { t: f64, source: EvalError },
    #[error("focal point: det M = {det:e} at T = {t} (T must stay below the first focal time)")]
    Focal { t: f64, det: f64 },
    #[error("lattice coverage: {0}")]
    Coverage(String),
    #[error("Trotter error {error:e} above tolerance {tol:e} at {slices} slices")]
    Trotter { error: f64, tol: f64, slices: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
