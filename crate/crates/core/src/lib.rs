//! Design and analysis of the impulsive Goodwin's oscillator: a third-order
//! positive cascade closed by a frequency- and amplitude-modulated impulsive
//! feedback.
//!
//! The crate computes the 1-cycle fixed point of the impulse-to-impulse map
//! for a prescribed impulse weight and period, calibrates Hill modulation
//! laws that make it orbitally stable, simulates the hybrid dynamics exactly
//! and sweeps parameters for period-doubling.
// Negated comparisons reject NaN; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audit;
pub mod bifurcation;
pub mod cli;
pub mod cycle;
pub mod design;
pub mod error;
pub mod matfun;
pub mod model;
pub mod sim;
pub mod stability;
pub mod svg;

pub use cycle::{CycleSolution, CycleSpec, StateVec};
pub use error::{IgoError, Result};
pub use matfun::Matrix3;
pub use model::{HillParams, IgoModel, PlantParams};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
#[allow(dead_code)]
mod test_oracle;
