//! Finite-difference and modal solvers for the state and adjoint equations.

mod forward;
mod galerkin;
mod operator;
pub mod tridiag;

pub use forward::{solve_adjoint, solve_forward, Problem, Stepper};
pub use galerkin::{galerkin_eigenbasis, solve_galerkin, ModalBasis};
pub use operator::{assemble_operator, DiscreteOperator};
