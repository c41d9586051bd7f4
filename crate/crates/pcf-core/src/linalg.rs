//! Thin wrappers over nalgebra dense factorizations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use crate::{Error, Result};

/// Largest dense dimension accepted by factorizing routines.
pub const DENSE_LIMIT: usize = 6000;

pub fn guard(n: usize, what: &str) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(Error::TooLarge(format!("{what}: dense dimension {n} exceeds {DENSE_LIMIT}")))
    } else {
        Ok(())
    }
}

/// Cholesky factor of a symmetric positive definite matrix.
pub struct Spd {
    chol: Cholesky<f64, Dyn>,
}

impl Spd {
    pub fn new(m: DMatrix<f64>, what: &str) -> Result<Self> {
        guard(m.nrows(), what)?;
        Cholesky::new(m)
            .map(|chol| Spd { chol })
            .ok_or_else(|| Error::Singular(format!("{what}: matrix not positive definite")))
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }
}

/// LU factor of a general square matrix.
pub struct General {
    lu: LU<f64, Dyn, Dyn>,
}

impl General {
    pub fn new(m: DMatrix<f64>, what: &str) -> Result<Self> {
        guard(m.nrows(), what)?;
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular(format!("{what}: matrix is singular")));
        }
        Ok(General { lu })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu.solve(b).ok_or_else(|| Error::Singular("LU solve failed".into()))
    }
}

/// Numerical rank of the column span of `m`, relative to the largest
/// singular value.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
