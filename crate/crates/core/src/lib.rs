//! Numerical laboratory for variable-exponent Calderón–Hardy spaces.
//!
//! The crate implements Luxemburg norms for variable exponents, the
//! Calderón maximal functions `N_{q,γ}` on classes modulo polynomials,
//! `(p(·), p₀, d)`-atoms, polyharmonic potentials `b = h ∗ a`, and a
//! verification harness that checks the estimates tying them together.

pub mod error;
pub mod exponents;
pub mod grid;
pub mod optimize;
pub mod quadrature;
pub mod atoms;
pub mod maximal;
pub mod potential;
pub mod experiments;

pub use error::{Error, Result};
pub use exponents::{ExponentFunction, ModularValue, VariableExponent};
pub use atoms::{Atom, AtomicDecomposition};
pub use maximal::{FunctionClass, MaximalParams, ScaleGrid};
pub use potential::{KernelSpec, PotentialResult};
pub use grid::{Cube, DomainBox, GridFunction, MultiIndex, Polynomial};
