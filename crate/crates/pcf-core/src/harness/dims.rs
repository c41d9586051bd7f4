use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximation::{Fractal, VertexFunction};
use crate::linalg::{max_abs, rank};
use crate::operators::{harmonic_split, multiharmonic_basis, weyl_slope, WeylReport};
use crate::{Error, Result};

/// Rank tolerance relative to the largest singular value.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDims {
    pub k: usize,
    pub dim: usize,
    pub dim_prime: usize,
    pub expected: usize,
    pub residual: f64,
    pub residual_prime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub level: usize,
    pub orders: Vec<OrderDims>,
    /// Interior |Δh| of h = f − G(−Δf) for a random f, relative to max |f|.
    pub split_residual: f64,
    /// Largest |f − g − h| of the same split.
    pub split_reconstruction: f64,
    pub weyl: Option<WeylReport>,
}

fn numeric_rank(fns: &[VertexFunction]) -> usize {
    if fns.is_empty() {
        return 0;
    }
    let n = fns[0].values.len();
    let m = DMatrix::from_fn(n, fns.len(), |i, j| fns[j].values[i]);
    rank(&m, RANK_TOL)
}

/// Multiharmonic dimensions for k = 1..=`max_k`, the Green split of a
/// random function, and optionally the Weyl slope at `weyl_level`.
pub fn dimension_experiment(
    fr: &Fractal,
    level: usize,
    max_k: usize,
    seed: u64,
    weyl_level: Option<usize>,
) -> Result<DimensionReport> {
    if level < 1 {
        return Err(Error::arg("dimension experiments need level >= 1"));
    }
    let orders = (1..=max_k)
        .map(|k| {
            let basis = multiharmonic_basis(fr, level, k)?;
            let (residual, residual_prime) = basis.residual(fr)?;
            Ok(OrderDims {
                k,
                dim: numeric_rank(&basis.harmonic),
                dim_prime: numeric_rank(&basis.harmonic_prime),
                expected: k * fr.b(),
                residual,
                residual_prime,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = fr.vertex_approx(level).num_vertices();
    let f = VertexFunction { level, values: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let split = harmonic_split(fr, &f)?;
    let recon: Vec<f64> = (0..n)
        .map(|i| f.values[i] - split.green_part.values[i] - split.harmonic_part.values[i])
        .collect();
    let scale = max_abs(&f.values).max(f64::MIN_POSITIVE);
    let weyl = weyl_level.map(|m| weyl_slope(fr, m)).transpose()?;
    Ok(DimensionReport {
        level,
        orders,
        split_residual: split.residual / scale,
        split_reconstruction: max_abs(&recon),
        weyl,
    })
}
