use serde::{Deserialize, Serialize};

use super::recipes::{generate, TestFunctionRecipe};
use crate::approximation::Fractal;
use crate::besov::{besov_norm, NormKind, Verdict};
use crate::exec::{self, Exec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub kind: NormKind,
    pub label: String,
    pub level: usize,
    pub sigmas: Vec<f64>,
    /// Last tail ratio t_M / t_{M−1} per σ.
    pub tail_ratios: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    /// Last σ whose tail ratio is below one and the first at or above it.
    pub bracket: (f64, f64),
    pub threshold: f64,
}

/// Classifies each σ of an ascending grid by whether the last tail ratio
/// is below one, and locates the transition.
pub fn divergence_probe(
    fr: &Fractal,
    kind: NormKind,
    recipe: &TestFunctionRecipe,
    sigmas: &[f64],
    level: usize,
    exec: Exec,
) -> Result<ProbeResult> {
    if sigmas.len() < 2 || sigmas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("the sigma grid must be ascending with at least two points"));
    }
    if matches!(kind, NormKind::SpectralN | NormKind::SpectralD) {
        return Err(Error::arg("spectral norms have no per-level terms to probe"));
    }
    let f = generate(fr, recipe)?;
    let reports = exec::map(exec, sigmas, |&s| besov_norm(fr, &f, s, level, kind));
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let tail_ratios: Vec<f64> = reports
        .iter()
        .map(|r| r.last_ratio().ok_or_else(|| Error::arg("too few levels for a tail ratio")))
        .collect::<Result<_>>()?;
    let first = tail_ratios
        .iter()
        .position(|&q| q >= 1.0)
        .filter(|&i| i > 0 && tail_ratios[..i].iter().all(|&q| q < 1.0))
        .ok_or_else(|| Error::NoTransition(format!("{kind} for {}", recipe.label())))?;
    let bracket = (sigmas[first - 1], sigmas[first]);
    Ok(ProbeResult {
        kind,
        label: recipe.label(),
        level,
        sigmas: sigmas.to_vec(),
        verdicts: reports.iter().map(|r| r.verdict).collect(),
        tail_ratios,
        threshold: 0.5 * (bracket.0 + bracket.1),
        bracket,
    })
}
