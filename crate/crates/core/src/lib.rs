//! Simulation toolkit for a two-photon dissipative cat qubit: a memory mode `a`
//! exchanging photon pairs with a lossy buffer mode `b`.
//!
//! The numerical core is generic over the real scalar type. The aliases at the
//! crate root fix it to `f64`, which is what the stochastic and fitting layers use.

pub mod analysis;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod pulse;
pub mod scalar;
pub mod semiclassical;
pub mod sparse;
pub mod trajectories;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex = num_complex::Complex64;
pub type QOperator = hilbert::QOperator<f64>;
pub type QState = hilbert::QState<f64>;
pub type Liouvillian = lindblad::Liouvillian<f64>;
pub type PhysicalParams = model::PhysicalParams<f64>;
pub type CircuitParams = model::CircuitParams<f64>;
pub type DriveSpec = model::DriveSpec<f64>;
pub type CollapseOp = model::CollapseOp<f64>;
pub type PulseSequence = pulse::PulseSequence<f64>;
pub type TimeDependentProblem = pulse::TimeDependentProblem<f64>;
pub type SemiclassicalState = semiclassical::SemiclassicalState<f64>;
pub use hilbert::SpaceDims;
