use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::laplacian::graph_laplacian;
use crate::approximation::{Fractal, VertexFunction};
use crate::linalg::{guard, Spd};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neumann" | "n" => Ok(Boundary::Neumann),
            "dirichlet" | "d" => Ok(Boundary::Dirichlet),
            other => Err(Error::arg(format!("unknown boundary condition '{other}'"))),
        }
    }
}

/// Solutions of H u = −λ D u, ascending. Dirichlet vectors vanish on V_0.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub bc: Boundary,
    pub level: usize,
    pub values: Vec<f64>,
    /// Columns are d-orthonormal eigenvectors on all of V_{Λ_M}; absent for
    /// values-only solves.
    pub vectors: Option<DMatrix<f64>>,
}

impl EigenSystem {
    pub fn vector(&self, i: usize) -> Option<Vec<f64>> {
        self.vectors.as_ref().map(|v| v.column(i).iter().copied().collect())
    }
}

/// Full eigensystem at level M (cached), truncated to `count` pairs when
/// given. With `with_vectors = false` only eigenvalues are computed.
pub fn eigensystem(
    fr: &Fractal,
    m: usize,
    bc: Boundary,
    count: Option<usize>,
    with_vectors: bool,
) -> Result<EigenSystem> {
    let full = full_eigensystem(fr, m, bc, with_vectors)?;
    let k = count.unwrap_or(full.values.len()).min(full.values.len());
    Ok(EigenSystem {
        bc,
        level: m,
        values: full.values[..k].to_vec(),
        vectors: full.vectors.as_ref().map(|v| v.columns(0, k).clone_owned()),
    })
}

fn full_eigensystem(fr: &Fractal, m: usize, bc: Boundary, with_vectors: bool) -> Result<Arc<EigenSystem>> {
    let key = format!("eigen/{m}/{}/{with_vectors}", bc.key());
    fr.cached(key, || {
        let lap = graph_laplacian(fr, m)?;
        let n = lap.len();
        let (lo, k) = match bc {
            Boundary::Neumann => (0, -lap.dense()),
            Boundary::Dirichlet => (lap.boundary, lap.neg_interior()),
        };
        let size = n - lo;
        guard(size, "eigensystem")?;
        if size == 0 {
            return Ok(EigenSystem { bc, level: m, values: vec![], vectors: with_vectors.then(|| DMatrix::zeros(n, 0)) });
        }
        let s: Vec<f64> = lap.d[lo..].iter().map(|d| 1.0 / d.sqrt()).collect();
        let sym = DMatrix::from_fn(size, size, |i, j| {
            let v = s[i] * k[(i, j)] * s[j];
            let w = s[j] * k[(j, i)] * s[i];
            0.5 * (v + w)
        });
        if !with_vectors {
            let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
            values.sort_by(|a, b| a.total_cmp(b));
            clamp_zero(&mut values);
            return Ok(EigenSystem { bc, level: m, values, vectors: None });
        }
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
            .ok_or_else(|| Error::NoConvergence("symmetric eigensolver".into()))?;
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        clamp_zero(&mut values);
        let mut vectors = DMatrix::zeros(n, size);
        for (col, &i) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(i);
            // Fix the sign so that the largest-magnitude entry is positive.
            let pivot = v.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for r in 0..size {
                vectors[(lo + r, col)] = sign * v[r] * s[r];
            }
        }
        Ok(EigenSystem { bc, level: m, values, vectors: Some(vectors) })
    })
}

fn clamp_zero(values: &mut [f64]) {
    let top = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for v in values.iter_mut() {
        if v.abs() < 1e-12 * top.max(1.0) {
            *v = 0.0;
        }
    }
}

/// G = (−Δ_D)^{-1}: solves −H g = D f on the interior with g|V_0 = 0.
pub struct DirichletGreen {
    level: usize,
    b: usize,
    d: Vec<f64>,
    chol: Option<Spd>,
}

impl DirichletGreen {
    pub fn new(fr: &Fractal, m: usize) -> Result<Self> {
        let lap = graph_laplacian(fr, m)?;
        let chol = if lap.len() > lap.boundary {
            Some(Spd::new(lap.neg_interior(), "Dirichlet Laplacian")?)
        } else {
            None
        };
        Ok(DirichletGreen { level: m, b: lap.boundary, d: lap.d.clone(), chol })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        if let Some(chol) = &self.chol {
            let rhs = DVector::from_iterator(f.len() - self.b, (self.b..f.len()).map(|x| self.d[x] * f[x]));
            out[self.b..].copy_from_slice(chol.solve(&rhs).as_slice());
        }
        out
    }
}

/// G_N: inverse of −Δ_N on d-mean-zero functions, returning the mean-zero
/// solution. Equivalent to the spectral sum over nonzero modes.
pub struct NeumannGreen {
    d: Vec<f64>,
    chol: Spd,
}

impl NeumannGreen {
    pub fn new(fr: &Fractal, m: usize) -> Result<Self> {
        let lap = graph_laplacian(fr, m)?;
        let d = lap.d.clone();
        let mut k = -lap.dense();
        // −H + d dᵀ is positive definite and leaves mean-zero solutions fixed.
        for i in 0..d.len() {
            for j in 0..d.len() {
                k[(i, j)] += d[i] * d[j];
            }
        }
        Ok(NeumannGreen { chol: Spd::new(k, "Neumann Laplacian")?, d })
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let total: f64 = self.d.iter().sum();
        let mean: f64 = f.iter().zip(&self.d).map(|(a, b)| a * b).sum::<f64>() / total;
        let rhs = DVector::from_iterator(f.len(), f.iter().zip(&self.d).map(|(v, d)| d * (v - mean)));
        self.chol.solve(&rhs).as_slice().to_vec()
    }
}

pub fn green_apply(fr: &Fractal, f: &VertexFunction, bc: Boundary) -> Result<VertexFunction> {
    f.check(fr)?;
    let values = match bc {
        Boundary::Dirichlet => DirichletGreen::new(fr, f.level)?.apply(&f.values),
        Boundary::Neumann => NeumannGreen::new(fr, f.level)?.apply(&f.values),
    };
    Ok(VertexFunction { level: f.level, values })
}

/// ⟨f, u_i⟩_d for every eigenvector of the cached full system at f's level.
pub fn spectral_coefficients(fr: &Fractal, f: &VertexFunction, bc: Boundary) -> Result<(Vec<f64>, Vec<f64>)> {
    f.check(fr)?;
    let sys = full_eigensystem(fr, f.level, bc, true)?;
    let lap = graph_laplacian(fr, f.level)?;
    let vecs = sys.vectors.as_ref().expect("eigenvectors");
    let weighted: Vec<f64> = f.values.iter().zip(&lap.d).map(|(a, b)| a * b).collect();
    let wf = DVector::from_column_slice(&weighted);
    let coeffs = vecs.tr_mul(&wf);
    Ok((sys.values.clone(), coeffs.iter().copied().collect()))
}

/// (Σ_i (1+λ_i)^σ |⟨f,u_i⟩_d|²)^{1/2} at f's level.
pub fn spectral_sobolev_norm(fr: &Fractal, f: &VertexFunction, sigma: f64, bc: Boundary) -> Result<f64> {
    let (values, coeffs) = spectral_coefficients(fr, f, bc)?;
    let s: f64 = values.iter().zip(&coeffs).map(|(l, c)| (1.0 + l).powf(sigma) * c * c).sum();
    Ok(s.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    pub level: usize,
    pub eigenvalues: usize,
    pub fitted_points: usize,
    pub slope: f64,
    pub target: f64,
    pub relative_error: f64,
}

/// Slope of log N(λ) against log λ for the Neumann spectrum, fitted over
/// the middle 60% of the log-count axis.
pub fn weyl_slope(fr: &Fractal, m: usize) -> Result<WeylReport> {
    let sys = eigensystem(fr, m, Boundary::Neumann, None, false)?;
    let positive: Vec<f64> = sys.values.iter().copied().filter(|&v| v > 0.0).collect();
    if positive.len() < 10 {
        return Err(Error::arg(format!("level {m} has too few eigenvalues for a Weyl fit")));
    }
    // N(λ_i) counts the zero mode too.
    let offset = sys.values.len() - positive.len();
    let pts: Vec<(f64, f64)> = positive.iter().enumerate().map(|(i, l)| (l.ln(), ((i + 1 + offset) as f64).ln())).collect();
    let top = pts.last().unwrap().1;
    let bottom = pts[0].1;
    let (lo, hi) = (bottom + 0.2 * (top - bottom), bottom + 0.8 * (top - bottom));
    let used: Vec<(f64, f64)> = pts.into_iter().filter(|&(_, y)| y >= lo && y <= hi).collect();
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let target = fr.constants().d_s / 2.0;
    Ok(WeylReport {
        level: m,
        eigenvalues: sys.values.len(),
        fitted_points: used.len(),
        slope,
        target,
        relative_error: (slope - target).abs() / target,
    })
}
