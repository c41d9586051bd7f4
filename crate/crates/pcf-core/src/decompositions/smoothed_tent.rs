use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{SmoothedKind, SmoothedLayers};
use crate::approximation::{Fractal, VertexFunction};
use crate::linalg::guard;
use crate::operators::graph_laplacian;
use crate::{Error, Result};

struct Plan {
    /// Ids of V_{Λ_m} inside V_{Λ_W}.
    fixed: Vec<usize>,
    free: Vec<usize>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    /// D^{-1/2} H on interior rows, fixed columns.
    fixed_block: DMatrix<f64>,
}

fn plan(fr: &Fractal, m: usize, working: usize) -> Result<Arc<Plan>> {
    if working <= m {
        return Err(Error::arg(format!("working level {working} must exceed tent level {m}")));
    }
    fr.cached(format!("stent/{m}/{working}"), || {
        let lap = graph_laplacian(fr, working)?;
        let n = lap.len();
        let b = lap.boundary;
        guard(n, "smoothed tent system")?;
        let fixed = fr.vertex_approx(working).embedding_from(&fr.vertex_approx(m))?;
        let mut is_fixed = vec![false; n];
        for &x in &fixed {
            is_fixed[x] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&x| !is_fixed[x]).collect();
        let h = lap.dense();
        let rows = n - b;
        let scaled = |x: usize, y: usize| h[(x, y)] / lap.d[x].sqrt();
        let a = DMatrix::from_fn(rows, free.len(), |i, j| scaled(b + i, free[j]));
        let fixed_block = DMatrix::from_fn(rows, fixed.len(), |i, j| scaled(b + i, fixed[j]));
        let qr = a.qr();
        let (q, r) = (qr.q(), qr.r());
        let diag_max = r.diagonal().amax();
        if r.diagonal().iter().any(|v| v.abs() <= 1e-12 * diag_max) {
            return Err(Error::RankDeficient(format!("smoothed tent system at level {m}/{working}")));
        }
        Ok(Plan { fixed, free, q, r, fixed_block })
    })
}

/// Minimizer of ‖Δ_W g‖_d over g on V_{Λ_W} with g = `values` on V_{Λ_m}.
pub fn smoothed_tent_layer(fr: &Fractal, values: &[f64], m: usize, working: usize) -> Result<VertexFunction> {
    let plan = plan(fr, m, working)?;
    if values.len() != plan.fixed.len() {
        return Err(Error::arg("prescribed values do not match V_m"));
    }
    let rhs = -(&plan.fixed_block * DVector::from_column_slice(values));
    let qtb = plan.q.tr_mul(&rhs);
    let x = plan
        .r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Singular("smoothed tent triangular solve".into()))?;
    let mut out = vec![0.0; plan.fixed.len() + plan.free.len()];
    for (&i, v) in plan.fixed.iter().zip(values) {
        out[i] = *v;
    }
    for (&i, v) in plan.free.iter().zip(x.iter()) {
        out[i] = *v;
    }
    Ok(VertexFunction { level: working, values: out })
}

fn laplacian_norm(fr: &Fractal, g: &VertexFunction) -> Result<f64> {
    let lap = graph_laplacian(fr, g.level)?;
    let hg = lap.apply(&g.values);
    Ok((lap.boundary..lap.len()).map(|x| hg[x] * hg[x] / lap.d[x]).sum::<f64>().sqrt())
}

/// Greedy expansion f ≈ Σ_{m=0}^{top} φ̆_m matching f on V_{Λ_top}; layer 0
/// is the harmonic part.
pub fn smoothed_tent_expand(fr: &Fractal, f: &VertexFunction, top: usize, working: usize) -> Result<SmoothedLayers> {
    f.check(fr)?;
    if working <= top {
        return Err(Error::arg(format!("working level {working} must exceed top level {top}")));
    }
    let g = if f.level < top { fr.extend(f, top)? } else { fr.restrict(f, top)? };
    let phi0 = fr.harmonic_extend(&g.values[..fr.b()], 0, working)?;
    let mut sum = phi0.clone();
    let mut layers = vec![phi0];
    for m in 1..=top {
        let target = fr.restrict(&g, m)?;
        let have = fr.restrict(&sum, m)?;
        let resid: Vec<f64> = target.values.iter().zip(&have.values).map(|(a, b)| a - b).collect();
        let layer = smoothed_tent_layer(fr, &resid, m, working)?;
        sum.add_scaled(&layer, 1.0);
        layers.push(layer);
    }
    let diagnostics = layers.iter().map(|l| laplacian_norm(fr, l)).collect::<Result<Vec<_>>>()?;
    Ok(SmoothedLayers { kind: SmoothedKind::Tent, working, base: None, layers, diagnostics })
}
