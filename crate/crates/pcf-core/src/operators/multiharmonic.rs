use nalgebra::DMatrix;

use super::laplacian::{graph_laplacian, laplacian_apply};
use super::spectral::DirichletGreen;
use crate::approximation::{Fractal, VertexFunction};
use crate::linalg::{max_abs, rank};
use crate::{Error, Result};

/// Bases of 𝓗_{k−1} = {Δ^k f = 0} and 𝓗'_{k−1} = {Δ^k f = const, ∫f = 0}.
///
/// Each element carries its Laplacian chain u_0 = f, u_{j+1} = Δu_j, which
/// fixes the boundary values of the iterates (the discrete Δ only acts on
/// the interior).
#[derive(Clone, Debug)]
pub struct MultiharmonicBasis {
    pub k: usize,
    pub level: usize,
    pub harmonic: Vec<VertexFunction>,
    pub harmonic_prime: Vec<VertexFunction>,
    chains: Vec<Vec<Vec<f64>>>,
    chains_prime: Vec<Vec<Vec<f64>>>,
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| s * x).collect()
}

impl MultiharmonicBasis {
    /// Largest interior deviation of the chain relations Δu_j = u_{j+1} and
    /// of the last iterate from zero (resp. from a constant).
    pub fn residual(&self, fr: &Fractal) -> Result<(f64, f64)> {
        let check = |chains: &[Vec<Vec<f64>>], constant: bool| -> Result<f64> {
            let lap = graph_laplacian(fr, self.level)?;
            let mut worst = 0.0f64;
            for chain in chains {
                for j in 0..chain.len() - 1 {
                    let f = VertexFunction { level: self.level, values: chain[j].clone() };
                    let lf = laplacian_apply(fr, &f, self.level)?;
                    for x in lap.boundary..lap.len() {
                        worst = worst.max((lf.values[x] - chain[j + 1][x]).abs());
                    }
                }
                let last = &chain[chain.len() - 1][lap.boundary..];
                let c = if constant && !last.is_empty() { last[0] } else { 0.0 };
                worst = worst.max(last.iter().map(|v| (v - c).abs()).fold(0.0, f64::max));
            }
            Ok(worst)
        };
        Ok((check(&self.chains, false)?, check(&self.chains_prime, true)?))
    }
}

/// Builds 𝓗_{k−1} from harmonic boundary unit vectors and iterated
/// Dirichlet-Green lifts, and 𝓗'_{k−1} by adding G^k 1 and projecting out
/// the mean.
pub fn multiharmonic_basis(fr: &Fractal, m: usize, k: usize) -> Result<MultiharmonicBasis> {
    if k == 0 {
        return Err(Error::arg("multiharmonic order k must be at least 1"));
    }
    let b = fr.b();
    let green = DirichletGreen::new(fr, m)?;
    let lap = graph_laplacian(fr, m)?;
    let n = lap.len();

    // Chain of G^j h: Δ G^j h = −G^{j−1} h.
    let mut chains = Vec::new();
    for p in 0..b {
        let mut e = vec![0.0; b];
        e[p] = 1.0;
        let h = fr.harmonic_extend(&e, 0, m)?.values;
        let mut lifts = vec![h];
        for _ in 1..k {
            let next = green.apply(lifts.last().unwrap());
            lifts.push(next);
        }
        for j in 0..k {
            let mut chain = Vec::with_capacity(j + 2);
            for i in (0..=j).rev() {
                let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                chain.push(scaled(&lifts[i], sign));
            }
            chain.push(vec![0.0; n]);
            chains.push(chain);
        }
    }

    let mean = |v: &[f64]| -> f64 { v.iter().zip(&lap.d).map(|(a, b)| a * b).sum() };
    let mut chains_prime: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .enumerate()
        // Drop G^0 h_{b−1}: Σ_p h_p = 1 becomes zero after centering.
        .filter(|(i, _)| *i != (b - 1) * k)
        .map(|(_, c)| c.clone())
        .collect();
    let mut lifts = vec![vec![1.0; n]];
    for _ in 0..k {
        let next = green.apply(lifts.last().unwrap());
        lifts.push(next);
    }
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    for i in (0..=k).rev() {
        let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
        chain.push(scaled(&lifts[i], sign));
    }
    chains_prime.push(chain);
    for chain in &mut chains_prime {
        let c = mean(&chain[0]);
        chain[0].iter_mut().for_each(|v| *v -= c);
    }

    let to_functions =
        |chains: &[Vec<Vec<f64>>]| chains.iter().map(|c| VertexFunction { level: m, values: c[0].clone() }).collect();
    let basis = MultiharmonicBasis {
        k,
        level: m,
        harmonic: to_functions(&chains),
        harmonic_prime: to_functions(&chains_prime),
        chains,
        chains_prime,
    };
    for (name, set) in [("H", &basis.harmonic), ("H'", &basis.harmonic_prime)] {
        let mat = DMatrix::from_fn(n, set.len(), |i, j| set[j].values[i]);
        let scale = set.iter().map(|f| max_abs(&f.values)).fold(0.0, f64::max);
        let r = rank(&(mat / scale.max(f64::MIN_POSITIVE)), 1e-9);
        if r < k * b {
            return Err(Error::RankDeficient(format!("{name}_{} at level {m}: rank {r} < {}", k - 1, k * b)));
        }
    }
    Ok(basis)
}
