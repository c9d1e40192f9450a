//! Numerical laboratory for the Fučík spectrum of a nonlocal operator on
//! bounded one-dimensional domains with an exterior Dirichlet condition.
//!
//! The crate discretizes the operator by a P1 Galerkin method, computes its
//! principal spectrum, traces the first nontrivial Fučík curve by two
//! independent algorithms (a constrained mountain-pass path deformation and a
//! predictor–corrector continuation with a semismooth Newton corrector), and
//! solves a nonresonant semilinear problem by an unconstrained mountain pass.
//!
//! Everything numeric is generic over the scalar type through [`Real`];
//! concrete `f64` aliases are exported at the crate root.

// Negated comparisons (`!(x > 0)`) are used throughout as NaN-rejecting
// guards: they fail closed when a value is not comparable. Index-based loops
// mirror the matrix/block index arithmetic they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod cache;
pub mod config;
pub mod continuation;
mod descent;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod minimax;
pub mod nonresonance;
pub mod output;
pub mod quad;
pub mod runner;
pub mod real;
pub mod spectrum;

pub use error::{Error, Result};
pub use real::Real;

/// Default scalar-precision aliases.
pub type Domain = geometry::Domain<f64>;
pub type Mesh = geometry::Mesh<f64>;
pub type Element = geometry::Element<f64>;
pub type Kernel = kernel::Kernel<f64>;
pub type KernelVariant = kernel::KernelVariant<f64>;
pub type GalerkinPair = assembly::GalerkinPair<f64>;
pub type EigenPair = spectrum::EigenPair<f64>;
