//! Grids, coefficients, control regions and memory kernels.

mod coefficient;
mod grid;
mod kernel;
pub mod quad;
mod region;
mod validate;

pub use coefficient::{Coefficient, Form, Shape};
pub use grid::{Field, SpatialGrid, TimeGrid};
pub use kernel::{apply_nonlocal, kernel_weighted_sup, Factor, Kernel, KernelBound, KernelKind, KernelTable};
pub(crate) use kernel::apply_matrix;
pub use quad::{plain_inner, weighted_inner};
pub use region::ControlRegion;
pub use validate::{validate_coefficient, CoefficientReport};
