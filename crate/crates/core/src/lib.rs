//! Faddeev-Jackiw reduction of deterministic first-order Hamiltonian systems
//! and numerical checks of the quantum systems that emerge from it.

pub mod anomaly;
pub mod expr;
pub mod numeric;
pub mod pathint;
pub mod reduction;
mod scalar;
pub mod symplectic;

pub use expr::{parse, Chart, Expr, Number, Role, Symbol, SymbolTable};
pub use scalar::Scalar;

/// Exact rational constant type used inside expressions.
pub type Rational = num_rational::BigRational;

pub type FlowResult64 = pathint::FlowResult<f64>;
pub type KernelResult64 = pathint::KernelResult<f64>;
pub type PropagatorResult64 = pathint::PropagatorResult<f64>;
