use crate::error::Result;
use crate::model::Field;
use crate::pde::{galerkin_eigenbasis, solve_forward, solve_galerkin, Problem, Stepper};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinReport {
    pub modes: usize,
    pub eigenvalues: Vec<f64>,
    /// `|y_fd - y_modal|_{L^2(Q)} / |y_fd|_{L^2(Q)}` in the natural space.
    pub relative_difference: f64,
}

/// Compares the finite-difference solution with its truncated modal counterpart, both advanced by
/// implicit Euler on the same grids.
pub fn check_galerkin(pb: &Problem, y0: &[f64], f: Option<&Field>, u: Option<&Field>, modes: usize) -> Result<GalerkinReport> {
    let basis = galerkin_eigenbasis(pb, modes)?;
    let modal = solve_galerkin(pb, &basis, y0, f, u)?;
    let fd = solve_forward(pb, y0, f, u, Stepper::ImplicitEuler)?;
    let mut diff = fd.clone();
    diff.as_mut_slice().iter_mut().zip(modal.as_slice()).for_each(|(a, b)| *a -= b);
    let base = pb.field_norm(&fd);
    let gap = pb.field_norm(&diff);
    Ok(GalerkinReport {
        modes,
        eigenvalues: basis.eigenvalues,
        relative_difference: if base > 0.0 { gap / base } else { gap },
    })
}
