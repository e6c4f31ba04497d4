//! State spaces, one-step Markov kernels and their transition densities.

mod model;
mod state;

pub use model::{
    wrap_terms, ConstantDiffusion, Diffusion, Frame, MatrixField, Scheme, ScalarField,
    StateDiffusion, StepModel, TrajectoryScratch, VectorField,
};

pub use state::{Geometry, StatePoint};
