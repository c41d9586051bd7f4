use serde::{Deserialize, Serialize};

use super::recipes::{generate, TestFunctionRecipe};
use super::Thresholds;
use crate::approximation::{CellFunction, Fractal, Function, VertexFunction};
use crate::besov::{besov_norm, difference_field, DiffKind, NormKind};
use crate::decompositions::{smoothed_haar_expand, Smoothing};
use crate::exec::{self, Exec};
use crate::operators::graph_energy;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceResult {
    pub kinds: (NormKind, NormKind),
    pub level: usize,
    pub sigmas: Vec<f64>,
    pub labels: Vec<String>,
    /// `ratios[s][i]`: ‖f_i‖_a / ‖f_i‖_b at σ_s, truncated at M.
    pub ratios: Vec<Vec<f64>>,
    /// The same at M − 1.
    pub previous: Vec<Vec<f64>>,
    pub band_min: Vec<f64>,
    pub band_max: Vec<f64>,
    /// max/min per σ.
    pub band: Vec<f64>,
    /// max_i |ρ_M / ρ_{M−1} − 1| per σ.
    pub instability: Vec<f64>,
    /// Largest relative move of the band endpoints between M − 1 and M, per
    /// σ. Informational; the pass test uses `instability`.
    pub band_drift: Vec<f64>,
    pub thresholds: Thresholds,
    pub pass: bool,
}

fn summarize(ratios: &[f64], previous: &[f64]) -> (f64, f64, f64) {
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let drift = ratios.iter().zip(previous).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    (lo, hi, drift)
}

/// Compares two norms across a family at truncation levels M − 1 and M.
pub fn equivalence_experiment(
    fr: &Fractal,
    kinds: (NormKind, NormKind),
    sigmas: &[f64],
    family: &[TestFunctionRecipe],
    level: usize,
    thresholds: Thresholds,
    exec: Exec,
) -> Result<EquivalenceResult> {
    if family.is_empty() {
        return Err(Error::arg("empty function family"));
    }
    if sigmas.is_empty() {
        return Err(Error::arg("empty sigma grid"));
    }
    if level < 1 {
        return Err(Error::arg("equivalence experiments need M >= 1"));
    }
    for &s in sigmas {
        for k in [kinds.0, kinds.1] {
            if !k.in_window(fr, s) {
                return Err(Error::OutOfWindow { sigma: s, what: format!("the {k} norm") });
            }
        }
    }
    let functions: Vec<Function> = exec::map(exec, family, |r| generate(fr, r)).into_iter().collect::<Result<_>>()?;
    for (f, r) in functions.iter().zip(family) {
        if f.level() < level {
            return Err(Error::arg(format!("{} has level {} < {level}", r.label(), f.level())));
        }
    }
    // One job per (σ, function, truncation level).
    let jobs: Vec<(usize, usize, usize)> = (0..sigmas.len())
        .flat_map(|s| (0..functions.len()).flat_map(move |i| [(s, i, level), (s, i, level - 1)]))
        .collect();
    let values = exec::map(exec, &jobs, |&(s, i, m)| -> Result<f64> {
        let a = besov_norm(fr, &functions[i], sigmas[s], m, kinds.0)?.total;
        let b = besov_norm(fr, &functions[i], sigmas[s], m, kinds.1)?.total;
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::arg(format!("{} has zero norm", family[i].label())));
        }
        Ok(a / b)
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let n = functions.len();
    let mut result = EquivalenceResult {
        kinds,
        level,
        sigmas: sigmas.to_vec(),
        labels: family.iter().map(|r| r.label()).collect(),
        ratios: Vec::new(),
        previous: Vec::new(),
        band_min: Vec::new(),
        band_max: Vec::new(),
        band: Vec::new(),
        instability: Vec::new(),
        band_drift: Vec::new(),
        thresholds,
        pass: true,
    };
    for s in 0..sigmas.len() {
        let base = 2 * s * n;
        let now: Vec<f64> = (0..n).map(|i| values[base + 2 * i]).collect();
        let prev: Vec<f64> = (0..n).map(|i| values[base + 2 * i + 1]).collect();
        let (lo, hi, drift) = summarize(&now, &prev);
        let (plo, phi, _) = summarize(&prev, &prev);
        result.band_drift.push((lo / plo - 1.0).abs().max((hi / phi - 1.0).abs()));
        result.pass &= hi / lo <= thresholds.band && drift <= thresholds.instability;
        result.ratios.push(now);
        result.previous.push(prev);
        result.band_min.push(lo);
        result.band_max.push(hi);
        result.band.push(hi / lo);
        result.instability.push(drift);
    }
    Ok(result)
}

/// (C² + E(f)) against (‖f‖² + Σ r^{−m}‖D_m f_m‖²) for the smoothed Haar
/// expansion f = C + Σ f_m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEquivalence {
    pub level: usize,
    pub ratios: Vec<f64>,
    pub previous: Vec<f64>,
    pub band: f64,
    pub instability: f64,
    pub thresholds: Thresholds,
    pub pass: bool,
}

fn energy_ratio(fr: &Fractal, f: &VertexFunction, top: usize, working: usize) -> Result<f64> {
    let exp = smoothed_haar_expand(fr, f, top, Smoothing::Discrete { working })?;
    let lhs = exp.base * exp.base + graph_energy(fr, f, f.level)?;
    let r = fr.constants().r_min;
    let mut rhs = fr.l2_norm(f).powi(2);
    for layer in &exp.layers {
        let m = layer.m;
        let averages = CellFunction { level: m, averages: layer.averages(fr, m)? };
        rhs += r.powi(-(m as i32)) * difference_field(fr, &averages.into(), m, DiffKind::Cell)?.norm_sq();
    }
    Ok(lhs / rhs)
}

/// Runs the smoothed Haar expansion with `top` = M and M − 1 layers, each
/// at working level top + `extra`.
pub fn energy_equivalence_experiment(
    fr: &Fractal,
    family: &[VertexFunction],
    level: usize,
    extra: usize,
    thresholds: Thresholds,
    exec: Exec,
) -> Result<EnergyEquivalence> {
    if family.is_empty() {
        return Err(Error::arg("empty function family"));
    }
    if level < 2 {
        return Err(Error::arg("energy equivalence needs M >= 2"));
    }
    let now: Vec<f64> = exec::map(exec, family, |f| energy_ratio(fr, f, level, level + extra))
        .into_iter()
        .collect::<Result<_>>()?;
    let prev: Vec<f64> = exec::map(exec, family, |f| energy_ratio(fr, f, level - 1, level - 1 + extra))
        .into_iter()
        .collect::<Result<_>>()?;
    let (lo, hi, drift) = summarize(&now, &prev);
    Ok(EnergyEquivalence {
        level,
        band: hi / lo,
        instability: drift,
        pass: hi / lo <= thresholds.band && drift <= thresholds.instability,
        ratios: now,
        previous: prev,
        thresholds,
    })
}
