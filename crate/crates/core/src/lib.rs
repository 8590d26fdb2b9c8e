//! Special values of Hurwitz-type spectral zeta functions for the one- and
//! two-photon quantum Rabi models, their weighted-Bergman deformation, and
//! the non-commutative harmonic oscillator.

pub mod apery;
pub mod cli;
pub mod error;
pub mod operator_oracle;
pub mod quadrature;
pub mod specfun;
pub mod trace_terms;
pub mod validation;
pub mod zeta_values;

pub use error::{Error, Result};
pub use specfun::{SeriesValue, C64};
