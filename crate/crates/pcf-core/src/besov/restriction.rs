use nalgebra::DMatrix;
use serde::Serialize;

use crate::approximation::{Fractal, VertexFunction};
use crate::{Error, Result};

/// Harmonic functions φ_p, ψ_p with ⟨φ_p, h⟩ = h(p) and ⟨ψ_p, h⟩ = ∂_n h(p)
/// for every harmonic h.
#[derive(Clone, Debug, Serialize)]
pub struct RieszRepresenters {
    pub phi: Vec<VertexFunction>,
    pub psi: Vec<VertexFunction>,
    /// Boundary values: column p of each matrix holds φ_p (resp. ψ_p) on V_0.
    #[serde(skip)]
    pub phi_boundary: DMatrix<f64>,
    #[serde(skip)]
    pub psi_boundary: DMatrix<f64>,
}

pub fn riesz_representers(fr: &Fractal, level: usize) -> Result<RieszRepresenters> {
    let g = fr.gram();
    let sv = g.clone().svd(false, false).singular_values;
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 1e-12 * hi) {
        return Err(Error::Singular("harmonic Gram matrix".into()));
    }
    let inv = g.clone().try_inverse().ok_or_else(|| Error::Singular("harmonic Gram matrix".into()))?;
    let phi_boundary = inv.clone();
    let psi_boundary = -(&inv * fr.h0());
    let build = |m: &DMatrix<f64>| -> Result<Vec<VertexFunction>> {
        (0..fr.b())
            .map(|p| {
                let col: Vec<f64> = m.column(p).iter().copied().collect();
                fr.harmonic_extend(&col, 0, level)
            })
            .collect()
    };
    Ok(RieszRepresenters { phi: build(&phi_boundary)?, psi: build(&psi_boundary)?, phi_boundary, psi_boundary })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RestrictionKind {
    /// Value-type moments with weight r_w^{−d_H}.
    V,
    /// Normal-derivative-type moments with weight r_w^{−1−d_H}.
    N,
}

/// Entries m = 1..=depth of R^p_v f or R^p_n f: Σ over the cells w of Λ_m
/// meeting p of the weighted pairing of f∘F_w with the representer at
/// F_w^{-1}(p).
pub fn boundary_restriction(
    fr: &Fractal,
    f: &VertexFunction,
    p: usize,
    depth: usize,
    kind: RestrictionKind,
) -> Result<Vec<f64>> {
    f.check(fr)?;
    if p >= fr.b() {
        return Err(Error::arg(format!("{p} is not a boundary vertex")));
    }
    if depth + 2 > f.level {
        return Err(Error::arg(format!("depth {depth} needs a function of level >= {}", depth + 2)));
    }
    let reps = riesz_representers(fr, 0)?;
    let coeffs = match kind {
        RestrictionKind::V => &reps.phi_boundary,
        RestrictionKind::N => &reps.psi_boundary,
    };
    let fine = fr.vertex_approx(f.level);
    let t = fr.scale(f.level);
    let d_h = fr.constants().d_h;
    let gram = fr.gram();
    let b = fr.b();
    (1..=depth)
        .map(|m| {
            let approx = fr.vertex_approx(m);
            let mut entry = 0.0;
            for (c, w) in approx.words.iter().enumerate() {
                let Some(q) = approx.cell_vertices[c].iter().position(|&v| v == p) else { continue };
                let rw = approx.r_w[c];
                let weight = match kind {
                    RestrictionKind::V => rw.powf(-d_h),
                    RestrictionKind::N => rw.powf(-1.0 - d_h),
                };
                let rep: Vec<f64> = coeffs.column(q).iter().copied().collect();
                let mut s = 0.0;
                fr.descend(w, &rep, t, &mut |leaf, vals| {
                    let fv: Vec<f64> = (0..b).map(|k| f.values[fine.id_of(leaf, k).expect("leaf vertex")]).collect();
                    let mut pair = 0.0;
                    for i in 0..b {
                        for j in 0..b {
                            pair += vals[i] * gram[(i, j)] * fv[j];
                        }
                    }
                    s += fr.mu_of(leaf) * pair;
                });
                entry += weight * s;
            }
            Ok(entry)
        })
        .collect()
}
