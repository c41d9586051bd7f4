//! Haar and tent expansions, their smoothed variants, and atomic
//! coefficient norms.

mod atomic;
mod haar;
mod smoothed_haar;
mod smoothed_tent;
mod tent;

use serde::Serialize;

use crate::approximation::VertexFunction;

pub use atomic::{
    atomic_from_function, atomic_from_function_with, atomic_norm, atomic_window, AtomCoefficients, AtomTerm,
    Variant, WindowMode,
};
pub use haar::{cell_averages, haar_expand, haar_reconstruct, HaarLayers};
pub use smoothed_haar::{
    bubble_gamma_at, smoothed_haar_expand, smoothed_haar_kkt, smoothed_haar_layer, SmoothedHaarExpansion,
    SmoothedHaarLayer, Smoothing,
};
pub use smoothed_tent::{smoothed_tent_expand, smoothed_tent_layer};
pub use tent::{tent_expand, tent_reconstruct, TentCoeff, TentLayer, TentLayers};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothedKind {
    Haar,
    Tent,
}

/// Smoothed layers materialized at a common working level.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothedLayers {
    pub kind: SmoothedKind,
    pub working: usize,
    /// Constant term (Haar kind only).
    pub base: Option<f64>,
    /// Layer m is `layers[m - 1]` for Haar; `layers[m]` for tent (layer 0
    /// is the harmonic part).
    pub layers: Vec<VertexFunction>,
    /// Energy per layer (Haar) or d-weighted norm of the Laplacian (tent).
    pub diagnostics: Vec<f64>,
}
