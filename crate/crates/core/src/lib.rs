//! Phase-space simulation of random linear-optical circuits acting on
//! multimode coherent states, with analytic cost gradients, closed-form
//! gradient-moment predictions and Monte Carlo estimators over the Haar
//! measure on `O(2m)`.
//!
//! Conventions used throughout:
//!
//! * quadratures are `q = (a + a*)/√2`, `p = (−ia + ia*)/√2`, stored
//!   interleaved as `(q₁, p₁, …, q_m, p_m)`;
//! * a coherent state is its real mean vector `u` with intensity `‖u‖²/2`;
//! * a linear-optical unitary acts on mean vectors from the right,
//!   `u ↦ uT` with `T ∈ O(2m)`, so the matrix of the first-applied element
//!   of a circuit is the leftmost factor.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_forms;
pub mod cost;
pub mod error;
pub mod estimators;
pub mod linear_optics;
pub mod phase_space;
pub mod sampling;
pub mod special;
pub mod trainer;

pub use error::{Error, Result};
pub use linear_optics::{GateKind, GeneratorPair, LayeredCircuit, OrthogonalMatrix};
pub use phase_space::{Intensity, MeanVector};
pub use sampling::RandomSource;
pub use special::LogScaled;
