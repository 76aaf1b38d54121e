//! Null controllability of one-dimensional degenerate heat equations with nonlocal integral terms.
//!
//! The crate covers the problem description ([`model`]), Carleman weight functions ([`weights`]),
//! forward and adjoint solvers ([`pde`]), penalised-HUM null controls ([`hum`]), the fixed point
//! for the nonlocal problem ([`nonlocal`]) and numerical checks of the underlying inequalities
//! ([`verify`]). [`cli`] drives all of it from JSON scenario files.

pub mod cli;
pub mod error;
pub mod hum;
pub mod model;
pub mod nonlocal;
pub mod pde;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
