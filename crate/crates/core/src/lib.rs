//! Numerical estimation of geometric ergodicity rates by coupling.
//!
//! Two copies of a Markov chain are run as a coupled pair until they meet.
//! The exponential tail of the meeting time bounds the rate of geometric
//! contraction from below; the tail of a first exit time from a pair of
//! disjoint set sequences bounds it from above.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod degenerate;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod modelzoo;
pub mod real;
pub mod rng;
pub mod run;

pub use error::{Error, Result};
pub use real::Real;

pub type StatePoint64 = dynamics::StatePoint<f64>;
pub type StatePoint32 = dynamics::StatePoint<f32>;
pub type StepModel64 = dynamics::StepModel<f64>;
pub type StepModel32 = dynamics::StepModel<f32>;
pub type CouplingConfig64 = coupling::CouplingConfig<f64>;
pub type CoupledPair64 = coupling::CoupledPair<f64>;
pub type RateEstimate64 = estimation::RateEstimate<f64>;
pub type SirModel64 = degenerate::SirModel<f64>;
