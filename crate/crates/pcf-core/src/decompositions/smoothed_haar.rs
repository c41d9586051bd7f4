use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{SmoothedKind, SmoothedLayers};
use crate::address::Word;
use crate::approximation::{fits, CellFunction, Fractal, VertexFunction};
use crate::linalg::{guard, General, Spd};
use crate::{Error, Result};

/// How the cell bubble (the Dirichlet Green function of 1) is resolved.
///
/// `Discrete` reproduces the exact minimizer of E_{Λ_W} at working level W;
/// `Continuum` uses the limit bubble, giving the minimizer on the fractal
/// itself sampled at the vertices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    Discrete { working: usize },
    Continuum,
}

impl Smoothing {
    fn key(self) -> String {
        match self {
            Smoothing::Discrete { working } => format!("d{working}"),
            Smoothing::Continuum => "c".into(),
        }
    }
}

/// ∫ of the bubble on the unit cell, interpolated piecewise-harmonically
/// on the relative partition Λ(t). `None` gives the continuum value.
pub fn bubble_gamma_at(fr: &Fractal, t: Option<f64>) -> f64 {
    let Some(t) = t else { return fr.bubble_gamma() };
    if t >= 1.0 {
        return 0.0;
    }
    let key = format!("gamma/{:.12e}", t);
    *fr.cached(key, || {
        let mut sum = 0.0;
        bubble_walk(fr, &vec![0.0; fr.b()], t, &mut |w, vals| {
            sum += fr.mu_of(w) * crate::linalg::dot(fr.ell(), vals);
        });
        Ok(sum)
    })
    .expect("bubble integral")
}

/// Walk the cells of the unit cell down to relative scale t carrying the
/// bubble's corner values.
fn bubble_walk(fr: &Fractal, start_vals: &[f64], t: f64, visit: &mut dyn FnMut(&Word, &[f64])) {
    let spec = fr.spec();
    let mut stack = vec![(Word::empty(), 1.0f64, 1.0f64, start_vals.to_vec())];
    while let Some((u, r, rho, vals)) = stack.pop() {
        if fits(r, t) {
            visit(&u, &vals);
            continue;
        }
        for i in (0..fr.n()).rev() {
            let mut child = fr.ext().apply(i, &vals);
            for (c, g) in child.iter_mut().zip(fr.green_cell_values(i)) {
                *c += rho * g;
            }
            let ri = spec.r[i];
            stack.push((u.child(i), r * ri, rho * ri * fr.constants().mu[i], child));
        }
    }
}

/// A smoothed Haar function S_m f̃_m in compact form: on each cell w of Λ_m
/// it is the harmonic function with corner values `values` plus
/// `bubbles[w]` times the rescaled bubble.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothedHaarLayer {
    pub m: usize,
    pub smoothing: Smoothing,
    /// Values on V_{Λ_m}.
    pub values: Vec<f64>,
    pub bubbles: Vec<f64>,
    pub energy: f64,
}

struct Plan {
    gammas: Vec<f64>,
    chol: Spd,
}

fn relative_scale(fr: &Fractal, smoothing: Smoothing, r: f64) -> Option<f64> {
    match smoothing {
        Smoothing::Discrete { working } => Some(fr.scale(working) / r),
        Smoothing::Continuum => None,
    }
}

fn plan(fr: &Fractal, m: usize, smoothing: Smoothing) -> Result<Arc<Plan>> {
    if let Smoothing::Discrete { working } = smoothing {
        if working <= m {
            return Err(Error::arg(format!("working level {working} must exceed layer level {m}")));
        }
    }
    fr.cached(format!("shaar/{m}/{}", smoothing.key()), || {
        let approx = fr.try_vertex_approx(m)?;
        let nv = approx.num_vertices();
        guard(nv, "smoothed Haar system")?;
        let ell = fr.ell();
        let gammas: Vec<f64> = approx.r_w.iter().map(|&r| bubble_gamma_at(fr, relative_scale(fr, smoothing, r))).collect();
        let mut k = -approx.dense_h();
        for (c, verts) in approx.cell_vertices.iter().enumerate() {
            let s = 1.0 / (approx.r_w[c] * gammas[c]);
            for (p, &x) in verts.iter().enumerate() {
                for (q, &y) in verts.iter().enumerate() {
                    k[(x, y)] += s * ell[p] * ell[q];
                }
            }
        }
        Ok(Plan { gammas, chol: Spd::new(k, "smoothed Haar system")? })
    })
}

/// S_m f̃_m through the reduced system on V_{Λ_m}.
pub fn smoothed_haar_layer(fr: &Fractal, layer: &CellFunction, smoothing: Smoothing) -> Result<SmoothedHaarLayer> {
    layer.check(fr)?;
    let m = layer.level;
    let plan = plan(fr, m, smoothing)?;
    let approx = fr.vertex_approx(m);
    let ell = fr.ell();
    let mut rhs = DVector::zeros(approx.num_vertices());
    for (c, verts) in approx.cell_vertices.iter().enumerate() {
        let s = layer.averages[c] / (approx.r_w[c] * plan.gammas[c]);
        for (p, &x) in verts.iter().enumerate() {
            rhs[x] += s * ell[p];
        }
    }
    let values: Vec<f64> = plan.chol.solve(&rhs).iter().copied().collect();
    let mut energy = approx.energy_pair(fr.h0(), &values, &values);
    let bubbles: Vec<f64> = (0..approx.num_cells())
        .map(|c| {
            let lb = crate::linalg::dot(ell, &approx.cell_values(&values, c));
            let cw = (layer.averages[c] - lb) / plan.gammas[c];
            energy += cw * cw * plan.gammas[c] / approx.r_w[c];
            cw
        })
        .collect();
    Ok(SmoothedHaarLayer { m, smoothing, values, bubbles, energy })
}

impl SmoothedHaarLayer {
    /// Walk the cells of Λ_target below each cell of Λ_m, visiting (leaf
    /// word, corner values of the layer, bubble coefficient times the leaf
    /// bubble mass term).
    fn walk(&self, fr: &Fractal, target: usize, visit: &mut dyn FnMut(&Word, Vec<f64>, f64)) {
        let approx = fr.vertex_approx(self.m);
        let b = fr.b();
        let t = fr.scale(target);
        for (c, w) in approx.words.iter().enumerate() {
            let harm = approx.cell_values(&self.values, c);
            let cw = self.bubbles[c];
            let rw = approx.r_w[c];
            // Column 0..b: harmonic part; b..2b: bubble corner values.
            let mut stack = vec![(Word::empty(), rw, 1.0f64, harm, vec![0.0; b])];
            while let Some((u, r, rho, h, g)) = stack.pop() {
                if fits(r, t) {
                    let leaf = w.concat(&u);
                    let vals: Vec<f64> = h.iter().zip(&g).map(|(a, bb)| a + cw * bb).collect();
                    let gamma = bubble_gamma_at(fr, relative_scale(fr, self.smoothing, r));
                    visit(&leaf, vals, cw * rho * gamma);
                    continue;
                }
                for i in (0..fr.n()).rev() {
                    let hc = fr.ext().apply(i, &h);
                    let mut gc = fr.ext().apply(i, &g);
                    for (x, gi) in gc.iter_mut().zip(fr.green_cell_values(i)) {
                        *x += rho * gi;
                    }
                    let ri = fr.spec().r[i];
                    stack.push((u.child(i), r * ri, rho * ri * fr.constants().mu[i], hc, gc));
                }
            }
        }
    }

    /// Vertex values on V_{Λ_M}, M ≥ m.
    pub fn materialize(&self, fr: &Fractal, target: usize) -> Result<VertexFunction> {
        if target < self.m {
            return Err(Error::arg(format!("cannot materialize layer {} at level {target}", self.m)));
        }
        let dst = fr.try_vertex_approx(target)?;
        let mut out = vec![0.0; dst.num_vertices()];
        self.walk(fr, target, &mut |leaf, vals, _| {
            for (p, v) in vals.into_iter().enumerate() {
                out[dst.id_of(leaf, p).expect("leaf vertex")] = v;
            }
        });
        Ok(VertexFunction { level: target, values: out })
    }

    /// Averages of the layer over Λ_k.
    pub fn averages(&self, fr: &Fractal, k: usize) -> Result<Vec<f64>> {
        if k <= self.m {
            let fine = self.averages(fr, self.m + 1)?;
            let cf = CellFunction { level: self.m + 1, averages: fine };
            return Ok(fr.coarsen(&cf, k)?.averages);
        }
        let mut out = Vec::with_capacity(fr.vertex_approx(k).num_cells());
        self.walk(fr, k, &mut |_, vals, bubble_mass| {
            out.push(crate::linalg::dot(fr.ell(), &vals) + bubble_mass);
        });
        Ok(out)
    }
}

/// The same minimizer through the full saddle-point system on V_{Λ_M}.
pub fn smoothed_haar_kkt(fr: &Fractal, layer: &CellFunction, working: usize) -> Result<VertexFunction> {
    layer.check(fr)?;
    let m = layer.level;
    if working <= m {
        return Err(Error::arg(format!("working level {working} must exceed layer level {m}")));
    }
    let fine = fr.try_vertex_approx(working)?;
    let coarse = fr.vertex_approx(m);
    let nv = fine.num_vertices();
    let nc = coarse.num_cells();
    guard(nv + nc, "smoothed Haar saddle system")?;
    let anc = fr.ancestor_map(working, m);
    let mut rows = DMatrix::<f64>::zeros(nc, nv);
    for (c, verts) in fine.cell_vertices.iter().enumerate() {
        let w = anc[c];
        let s = fine.mu_w[c] / coarse.mu_w[w];
        for (p, &x) in verts.iter().enumerate() {
            rows[(w, x)] += s * fr.ell()[p];
        }
    }
    let mut kkt = DMatrix::zeros(nv + nc, nv + nc);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&(-fine.dense_h()));
    let mut rhs = DVector::zeros(nv + nc);
    for w in 0..nc {
        let norm = rows.row(w).norm();
        for x in 0..nv {
            let v = rows[(w, x)] / norm;
            kkt[(nv + w, x)] = v;
            kkt[(x, nv + w)] = v;
        }
        rhs[nv + w] = layer.averages[w] / norm;
    }
    let sol = General::new(kkt, "smoothed Haar saddle system")?.solve(&rhs)?;
    Ok(VertexFunction { level: working, values: sol.rows(0, nv).iter().copied().collect() })
}

/// Greedy expansion f = C + Σ_{m=1}^{top} f_m with f_m ∈ J_m: each f_m is
/// the smoothed Haar function of the residual's level-m Haar layer.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothedHaarExpansion {
    pub base: f64,
    pub layers: Vec<SmoothedHaarLayer>,
    /// The Haar layers f̃_m that were smoothed.
    pub haar: Vec<CellFunction>,
}

impl SmoothedHaarExpansion {
    pub fn energy(&self) -> f64 {
        self.layers.iter().map(|l| l.energy).sum()
    }

    pub fn to_layers(&self, fr: &Fractal, working: usize) -> Result<SmoothedLayers> {
        let layers = self.layers.iter().map(|l| l.materialize(fr, working)).collect::<Result<Vec<_>>>()?;
        Ok(SmoothedLayers {
            kind: SmoothedKind::Haar,
            working,
            base: Some(self.base),
            layers,
            diagnostics: self.layers.iter().map(|l| l.energy).collect(),
        })
    }
}

pub fn smoothed_haar_expand(
    fr: &Fractal,
    f: &VertexFunction,
    top: usize,
    smoothing: Smoothing,
) -> Result<SmoothedHaarExpansion> {
    f.check(fr)?;
    let g = if f.level < top { fr.extend(f, top)? } else { f.clone() };
    let base = fr.averages(&g, 0)?[0];
    let mut layers: Vec<SmoothedHaarLayer> = Vec::with_capacity(top);
    let mut haar = Vec::with_capacity(top);
    for m in 1..=top {
        let mut target: Vec<f64> = fr.averages(&g, m)?.iter().map(|a| a - base).collect();
        for prev in &layers {
            for (t, a) in target.iter_mut().zip(prev.averages(fr, m)?) {
                *t -= a;
            }
        }
        let layer = CellFunction { level: m, averages: target };
        layers.push(smoothed_haar_layer(fr, &layer, smoothing)?);
        haar.push(layer);
    }
    Ok(SmoothedHaarExpansion { base, layers, haar })
}
