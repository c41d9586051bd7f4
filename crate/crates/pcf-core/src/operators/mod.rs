//! Graph Laplacians H_{Λ_m}, weak-form Laplacians, eigensystems, Green
//! operators, spectral Sobolev norms and multiharmonic bases.
//!
//! L² is lumped onto the tent weights d_x = ∫ψ_x dμ throughout, so every
//! eigenproblem is H u = −λ D u with D = diag(d).

mod laplacian;
mod multiharmonic;
mod spectral;
#[cfg(test)]
mod tests;

pub use laplacian::{graph_energy, graph_laplacian, harmonic_split, laplacian_apply, GraphLaplacian, HarmonicSplit};
pub use multiharmonic::{multiharmonic_basis, MultiharmonicBasis};
pub use spectral::{
    eigensystem, green_apply, spectral_coefficients, spectral_sobolev_norm, weyl_slope, Boundary, DirichletGreen,
    EigenSystem, NeumannGreen, WeylReport,
};
