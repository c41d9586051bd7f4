use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Fractal, VertexApprox};
use crate::linalg::Spd;
use crate::{Error, Result};

/// Effective resistances between the vertices in `subset`.
///
/// The Laplacian is grounded at vertex 0, so R(x, y) = X_xx + X_yy − 2X_xy
/// with X the inverse of the grounded block (and X_0· = 0).
pub fn resistance_matrix(approx: &VertexApprox, subset: &[usize]) -> Result<DMatrix<f64>> {
    let nv = approx.num_vertices();
    if subset.iter().any(|&v| v >= nv) {
        return Err(Error::arg("vertex id out of range"));
    }
    let k = subset.len();
    if nv == 1 {
        return Ok(DMatrix::zeros(k, k));
    }
    let neg = -approx.dense_h();
    let grounded = neg.view((1, 1), (nv - 1, nv - 1)).clone_owned();
    let chol = Spd::new(grounded, "grounded Laplacian").map_err(|_| Error::Disconnected)?;
    let mut rhs = DMatrix::zeros(nv - 1, k);
    for (j, &v) in subset.iter().enumerate() {
        if v > 0 {
            rhs[(v - 1, j)] = 1.0;
        }
    }
    let sol = chol.solve_mat(&rhs);
    // X restricted to subset × subset.
    let x = |i: usize, j: usize| -> f64 {
        let (vi, vj) = (subset[i], subset[j]);
        if vi == 0 || vj == 0 {
            0.0
        } else {
            sol[(vi - 1, j)]
        }
    };
    Ok(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            0.0
        } else {
            (x(i, i) + x(j, j) - x(i, j) - x(j, i)).max(0.0)
        }
    }))
}

/// Vertices y with R(x, y) < ρ, given the resistance row of x over all
/// vertices.
pub fn resistance_ball(row: &[f64], rho: f64) -> Vec<usize> {
    row.iter().enumerate().filter(|(_, &r)| r < rho).map(|(i, _)| i).collect()
}

/// Cells whose anchor vertex lies in the ball.
pub fn resistance_cell_ball(approx: &VertexApprox, row: &[f64], rho: f64) -> Vec<usize> {
    approx.anchors().iter().enumerate().filter(|(_, &a)| row[a] < rho).map(|(c, _)| c).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub level: usize,
    pub samples: usize,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub max_overlap: usize,
}

/// Statistics of μ(B(x, ρ)) / ρ^{d_H} over random centers and radii
/// r_min^m < ρ ≤ 1. Ball measure counts cells by anchor.
pub fn measure_regularity_report(fr: &Fractal, m: usize, samples: usize, seed: u64) -> Result<RegularityReport> {
    if m < 2 {
        return Err(Error::arg("regularity statistics need level >= 2"));
    }
    let approx = fr.try_vertex_approx(m)?;
    let nv = approx.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<usize> = (0..samples).map(|_| rng.random_range(0..nv)).collect();
    let lo = fr.scale(m).ln();
    let radii: Vec<f64> = (0..samples).map(|_| (lo + (0.0 - lo) * rng.random::<f64>()).exp()).collect();
    let all: Vec<usize> = (0..nv).collect();
    let r = resistance_matrix(&approx, &all)?;
    let anchors = approx.anchors();
    let d_h = fr.constants().d_h;
    let mut ratios: Vec<f64> = centers
        .iter()
        .zip(&radii)
        .map(|(&x, &rho)| {
            let mass: f64 = anchors
                .iter()
                .enumerate()
                .filter(|(_, &a)| r[(x, a)] < rho)
                .map(|(c, _)| approx.mu_w[c])
                .sum();
            mass / rho.powf(d_h)
        })
        .collect();
    ratios.sort_by(|a, b| a.total_cmp(b));
    let max_overlap = approx.incidence().iter().map(Vec::len).max().unwrap_or(0);
    Ok(RegularityReport {
        level: m,
        samples,
        min_ratio: ratios.first().copied().unwrap_or(f64::NAN),
        median_ratio: ratios.get(samples / 2).copied().unwrap_or(f64::NAN),
        max_ratio: ratios.last().copied().unwrap_or(f64::NAN),
        max_overlap,
    })
}
