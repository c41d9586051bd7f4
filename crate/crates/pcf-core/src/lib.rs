//! Discrete analysis on post-critically finite self-similar fractals.
//!
//! A fractal is described by a [`spec_core::FractalSpec`] (contractions,
//! resistance weights, boundary Laplacian and gluing rules). From it the
//! crate builds vertex and cell approximations, graph Laplacians and their
//! eigensystems, Haar/tent decompositions with their smoothed variants,
//! and the family of Besov-type norms used to characterize Sobolev spaces
//! on the fractal.
//!
//! ```
//! use pcf_core::{approximation::Fractal, spec_core::FractalSpec};
//!
//! let sg = Fractal::new(FractalSpec::preset("sg").unwrap()).unwrap();
//! assert_eq!(sg.vertex_approx(2).num_vertices(), 15);
//! let ds = sg.constants().d_s;
//! assert!((ds - 2.0 * 3f64.ln() / 5f64.ln()).abs() < 1e-12);
//! ```

pub mod address;
pub mod approximation;
pub mod besov;
pub mod decompositions;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod spec_core;

pub use error::{Error, Result};

#[cfg(test)]
mod properties;
