//! Per-cell HHO machinery: degrees of freedom, interpolation,
//! reconstructions, boundary residuals and the local forms.

mod forms;
mod layout;
mod operators;

pub use forms::{
    cell_lebesgue_pow, energy_gram_matrix, gradient_energy, local_divergence_coupling, local_energy_seminorm,
    local_energy_seminorm_pow, local_viscous_residual, local_viscous_tangent, stab_residual_energy, stabilization_form,
    viscous_residual_vector, viscous_tangent_matrix,
};
pub use layout::DofLayout;
pub use operators::{hho_cell_basis, interpolate, interpolate_face, ElementOperators, LocalVector, DEFAULT_QUAD_BOOST};

use crate::mesh::Mesh;
use crate::Result;

/// Builds the operators of `cell` with the default quadrature.
pub fn build_element_operators(mesh: &Mesh, cell: usize, k: usize, r: f64) -> Result<ElementOperators> {
    ElementOperators::new(mesh, cell, k, r)
}
