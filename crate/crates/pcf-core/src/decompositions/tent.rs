use serde::{Deserialize, Serialize};

use crate::address::Word;
use crate::approximation::{Fractal, VertexFunction};
use crate::spec_core::LevelOne;
use crate::{Error, Result};

/// Coefficient of the tent at a vertex x born at level m. The vertex is
/// F_w(y) with y the level-1 vertex `local`; `group` is w.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentCoeff {
    /// Id in V_{Λ_m}.
    pub vertex: usize,
    pub group: Word,
    pub local: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentLayer {
    pub m: usize,
    pub coeffs: Vec<TentCoeff>,
}

/// f = φ_0 + Σ_m φ_m with φ_0 harmonic and φ_m a combination of level-m
/// tents at the vertices new to V_{Λ_m}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentLayers {
    pub level: usize,
    /// Values of φ_0 on V_0.
    pub boundary: Vec<f64>,
    pub layers: Vec<TentLayer>,
}

/// Vertices of V_{Λ_m} not in V_{Λ_{m−1}}, with their group word and local
/// level-1 index.
pub(crate) fn new_vertices(fr: &Fractal, m: usize) -> Result<Vec<(usize, Word, usize)>> {
    let fine = fr.try_vertex_approx(m)?;
    let coarse = fr.try_vertex_approx(m - 1)?;
    let mut old = vec![false; fine.num_vertices()];
    for i in fine.embedding_from(&coarse)? {
        old[i] = true;
    }
    let one = LevelOne::build(fr.spec())?;
    Ok((0..fine.num_vertices())
        .filter(|&x| !old[x])
        .map(|x| {
            let (u, p) = &fine.addresses[x];
            let last = u.last().expect("new vertices have nonempty addresses");
            (x, u.parent().unwrap(), one.cell_vertices[last][*p])
        })
        .collect())
}

pub fn tent_expand(fr: &Fractal, f: &VertexFunction) -> Result<TentLayers> {
    f.check(fr)?;
    let b = fr.b();
    let mut layers = Vec::with_capacity(f.level);
    for m in 1..=f.level {
        let here = fr.restrict(f, m)?;
        let prev = fr.extend(&fr.restrict(f, m - 1)?, m)?;
        let coeffs = new_vertices(fr, m)?
            .into_iter()
            .map(|(x, group, local)| TentCoeff { vertex: x, group, local, value: here.values[x] - prev.values[x] })
            .collect();
        layers.push(TentLayer { m, coeffs });
    }
    Ok(TentLayers { level: f.level, boundary: f.values[..b].to_vec(), layers })
}

pub fn tent_reconstruct(fr: &Fractal, layers: &TentLayers) -> Result<VertexFunction> {
    if layers.boundary.len() != fr.b() {
        return Err(Error::arg("tent expansion boundary has the wrong length"));
    }
    let mut cur = VertexFunction { level: 0, values: layers.boundary.clone() };
    for (i, layer) in layers.layers.iter().enumerate() {
        let m = i + 1;
        if layer.m != m {
            return Err(Error::arg(format!("tent layer {m} stored as level {}", layer.m)));
        }
        cur = fr.extend(&cur, m)?;
        for c in &layer.coeffs {
            *cur.values.get_mut(c.vertex).ok_or_else(|| Error::arg("tent vertex out of range"))? += c.value;
        }
    }
    Ok(cur)
}
