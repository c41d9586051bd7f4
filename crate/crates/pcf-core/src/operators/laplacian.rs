use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::spectral::{Boundary, DirichletGreen};
use crate::approximation::{Fractal, VertexFunction};
use crate::linalg::max_abs;
use crate::Result;

/// H_{Λ_m} in sparse row form with the tent-weight mass diagonal.
#[derive(Clone, Debug)]
pub struct GraphLaplacian {
    pub level: usize,
    /// Off-diagonal conductances per row.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Diagonal entries (minus the total conductance at each vertex).
    pub diag: Vec<f64>,
    pub d: Vec<f64>,
    pub boundary: usize,
}

impl GraphLaplacian {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.diag)
            .enumerate()
            .map(|(x, (row, dg))| dg * f[x] + row.iter().map(|&(y, c)| c * f[y]).sum::<f64>())
            .collect()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut h = DMatrix::zeros(n, n);
        for (x, row) in self.rows.iter().enumerate() {
            h[(x, x)] = self.diag[x];
            for &(y, c) in row {
                h[(x, y)] = c;
            }
        }
        h
    }

    /// −H restricted to interior × interior.
    pub fn neg_interior(&self) -> DMatrix<f64> {
        let b = self.boundary;
        let n = self.len() - b;
        let mut k = DMatrix::zeros(n, n);
        for x in b..self.len() {
            k[(x - b, x - b)] = -self.diag[x];
            for &(y, c) in &self.rows[x] {
                if y >= b {
                    k[(x - b, y - b)] = -c;
                }
            }
        }
        k
    }
}

pub fn graph_laplacian(fr: &Fractal, m: usize) -> Result<Arc<GraphLaplacian>> {
    fr.cached(format!("laplacian/{m}"), || {
        let approx = fr.try_vertex_approx(m)?;
        let n = approx.num_vertices();
        let mut rows = vec![Vec::new(); n];
        let mut diag = vec![0.0; n];
        for &(x, y, c) in &approx.edges {
            rows[x].push((y, c));
            rows[y].push((x, c));
            diag[x] -= c;
            diag[y] -= c;
        }
        for row in &mut rows {
            row.sort_by_key(|&(y, _)| y);
        }
        Ok(GraphLaplacian { level: m, rows, diag, d: approx.tent_weights(fr.ell()), boundary: approx.boundary_size() })
    })
}

fn at_level(fr: &Fractal, f: &VertexFunction, m: usize) -> Result<VertexFunction> {
    f.check(fr)?;
    if f.level >= m {
        fr.restrict(f, m)
    } else {
        fr.extend(f, m)
    }
}

/// E_{Λ_m}(f) = Σ_w r_w^{-1} E_0(f∘F_w). A finer f is restricted first, a
/// coarser one extended harmonically.
pub fn graph_energy(fr: &Fractal, f: &VertexFunction, m: usize) -> Result<f64> {
    let g = at_level(fr, f, m)?;
    let approx = fr.try_vertex_approx(m)?;
    Ok(approx.energy_pair(fr.h0(), &g.values, &g.values).max(0.0))
}

/// Δ_m f = d^{-1} H f on interior vertices, zero on V_0.
pub fn laplacian_apply(fr: &Fractal, f: &VertexFunction, m: usize) -> Result<VertexFunction> {
    let g = at_level(fr, f, m)?;
    let lap = graph_laplacian(fr, m)?;
    let hf = lap.apply(&g.values);
    let values = (0..lap.len()).map(|x| if x < lap.boundary { 0.0 } else { hf[x] / lap.d[x] }).collect();
    Ok(VertexFunction { level: m, values })
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicSplit {
    pub green_part: VertexFunction,
    pub harmonic_part: VertexFunction,
    /// Largest |H h| over interior vertices, scaled by d^{-1}.
    pub residual: f64,
}

/// f = G(−Δf) + h with h harmonic.
pub fn harmonic_split(fr: &Fractal, f: &VertexFunction) -> Result<HarmonicSplit> {
    let m = f.level;
    let lap = laplacian_apply(fr, f, m)?;
    let minus: Vec<f64> = lap.values.iter().map(|v| -v).collect();
    let green = DirichletGreen::new(fr, m)?;
    let g = green.apply(&minus);
    let h: Vec<f64> = f.values.iter().zip(&g).map(|(a, b)| a - b).collect();
    let hv = VertexFunction { level: m, values: h };
    let residual = max_abs(&laplacian_apply(fr, &hv, m)?.values);
    Ok(HarmonicSplit { green_part: VertexFunction { level: m, values: g }, harmonic_part: hv, residual })
}

impl Boundary {
    pub(crate) fn key(self) -> &'static str {
        match self {
            Boundary::Neumann => "neumann",
            Boundary::Dirichlet => "dirichlet",
        }
    }
}
