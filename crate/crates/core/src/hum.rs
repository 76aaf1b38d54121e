//! Penalised Hilbert uniqueness method for the local problem with a source term.

mod band;
mod cg;
mod control;
mod kappa;

pub use cg::{pcg, CgOutcome};
pub use control::{
    evaluate_cost, null_control_nonhom, weighted_norm_sq_levels, weighted_source_norm_sq, ControlResult, EstimateSides,
    HumOptions,
};
pub use kappa::{Kappa, MIN_REGULARIZATION};
