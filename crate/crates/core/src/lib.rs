//! Uniformly accurate time integrators for Klein–Gordon-type equations in the
//! nonrelativistic limit regime.
//!
//! The building blocks are the spectral functional calculus ([`calculus`]),
//! quadrature for oscillatory and slowly varying integrands ([`quadrature`]),
//! the iterated integrators `Ψ_l` ([`integrator`]) and concrete test problems
//! ([`problems`]).

pub mod calculus;
pub mod error;
pub mod integrator;
pub mod problems;
pub mod quadrature;

pub use calculus::{ComplexStructure, SpectralBasis, StateVector, Symbols};
pub use error::{Error, Result};
