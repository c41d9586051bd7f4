//! Test-function generators and the experiments built on them: norm
//! equivalence bands, divergence probes at critical orders, dimension
//! checks, and report emission.

mod dims;
mod equivalence;
mod probe;
mod recipes;
mod report;

use serde::{Deserialize, Serialize};

pub use dims::{dimension_experiment, DimensionReport, OrderDims};
pub use equivalence::{
    energy_equivalence_experiment, equivalence_experiment, EnergyEquivalence, EquivalenceResult,
};
pub use probe::{divergence_probe, ProbeResult};
pub use recipes::{generate, random_haar_std, RecipeKind, TestFunctionRecipe};
pub use report::{emit_report, norm_rows, render_report, Format, ReportData, NORM_CSV_HEADER};

/// Pass thresholds shared by the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest allowed max/min ratio across a family.
    pub band: f64,
    /// Largest allowed |ρ_M / ρ_{M−1} − 1|.
    pub instability: f64,
    /// Relative tolerance on measured geometric tail ratios.
    pub tail_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { band: 100.0, instability: 0.10, tail_tolerance: 0.02 }
    }
}
