use serde::{Deserialize, Serialize};

use crate::approximation::{CellFunction, Fractal, VertexFunction};
use crate::Result;

/// f = C + Σ_m f̃_m with f̃_m a Haar layer on Λ_m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarLayers {
    pub base: f64,
    /// `layers[m - 1]` is f̃_m as a cell function on Λ_m.
    pub layers: Vec<CellFunction>,
}

impl HaarLayers {
    pub fn level(&self) -> usize {
        self.layers.len()
    }
}

/// A_w(f) for w ∈ Λ_m, exact for the piecewise-harmonic f.
pub fn cell_averages(fr: &Fractal, f: &VertexFunction, m: usize) -> Result<CellFunction> {
    f.check(fr)?;
    let g = if f.level < m { fr.extend(f, m)? } else { f.clone() };
    Ok(CellFunction { level: m, averages: fr.averages(&g, m)? })
}

pub fn haar_expand(fr: &Fractal, f: &CellFunction) -> Result<HaarLayers> {
    f.check(fr)?;
    let top = f.level;
    let mut avgs = vec![f.averages.clone()];
    for m in (0..top).rev() {
        let next = fr.coarsen(f, m)?.averages;
        avgs.push(next);
    }
    avgs.reverse();
    let layers = (1..=top)
        .map(|m| {
            let anc = fr.ancestor_map(m, m - 1);
            let averages = avgs[m].iter().zip(&anc).map(|(a, &p)| a - avgs[m - 1][p]).collect();
            CellFunction { level: m, averages }
        })
        .collect();
    Ok(HaarLayers { base: avgs[0][0], layers })
}

pub fn haar_reconstruct(fr: &Fractal, layers: &HaarLayers) -> Result<CellFunction> {
    let mut cur = vec![layers.base];
    for (i, layer) in layers.layers.iter().enumerate() {
        let m = i + 1;
        layer.check(fr)?;
        if layer.level != m {
            return Err(crate::Error::arg(format!("Haar layer {m} stored at level {}", layer.level)));
        }
        let anc = fr.ancestor_map(m, m - 1);
        cur = layer.averages.iter().zip(&anc).map(|(a, &p)| cur[p] + a).collect();
    }
    Ok(CellFunction { level: layers.level(), averages: cur })
}
