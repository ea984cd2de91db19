//! Uniform grids, sampled fields, quadrature, finite-difference stencils and
//! resampling.

mod dst;
pub mod dump;
mod field;
mod grid;
mod resample;
mod stencil;
pub mod sum;

pub use dst::KineticPreconditioner;
pub use field::{integrate, ScalarField};
pub use grid::{Grid3D, MIN_POINTS};
pub use resample::{rescale_field, sample_trilinear, shift_cells};
pub use stencil::{dirichlet_laplacian_apply, kinetic_quadratic_form, Stencil};

pub(crate) use stencil::neg_laplacian_into;
