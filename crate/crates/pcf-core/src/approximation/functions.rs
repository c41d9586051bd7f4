use serde::{Deserialize, Serialize};

use super::Fractal;
use crate::{Error, Result};

/// Values on V_{Λ_M}, read as the piecewise-harmonic function they
/// determine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexFunction {
    pub level: usize,
    pub values: Vec<f64>,
}

/// Cell averages A_w(f) over Λ_M in lexicographic word order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFunction {
    pub level: usize,
    pub averages: Vec<f64>,
}

/// Either representation; the JSON form is distinguished by its `values`
/// or `averages` field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Function {
    Vertex(VertexFunction),
    Cell(CellFunction),
}

impl Function {
    pub fn level(&self) -> usize {
        match self {
            Function::Vertex(f) => f.level,
            Function::Cell(f) => f.level,
        }
    }

    pub fn check(&self, fr: &Fractal) -> Result<()> {
        match self {
            Function::Vertex(f) => f.check(fr),
            Function::Cell(f) => f.check(fr),
        }
    }

    /// Cell averages on Λ_m, m ≤ level.
    pub fn averages(&self, fr: &Fractal, m: usize) -> Result<Vec<f64>> {
        match self {
            Function::Vertex(f) => fr.averages(f, m),
            Function::Cell(f) => Ok(fr.coarsen(f, m)?.averages),
        }
    }

    pub fn l2_norm(&self, fr: &Fractal) -> f64 {
        match self {
            Function::Vertex(f) => fr.l2_norm(f),
            Function::Cell(f) => fr.cell_l2_norm(f),
        }
    }

    pub fn as_vertex(&self) -> Option<&VertexFunction> {
        match self {
            Function::Vertex(f) => Some(f),
            Function::Cell(_) => None,
        }
    }
}

impl From<VertexFunction> for Function {
    fn from(f: VertexFunction) -> Self {
        Function::Vertex(f)
    }
}

impl From<CellFunction> for Function {
    fn from(f: CellFunction) -> Self {
        Function::Cell(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// |Q_D − Q_{D−1}|.
    pub error: f64,
}

impl VertexFunction {
    pub fn constant(fr: &Fractal, level: usize, c: f64) -> Self {
        VertexFunction { level, values: vec![c; fr.vertex_approx(level).num_vertices()] }
    }

    pub fn zeros(fr: &Fractal, level: usize) -> Self {
        Self::constant(fr, level, 0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, fr: &Fractal) -> Result<()> {
        let nv = fr.try_vertex_approx(self.level)?.num_vertices();
        if self.values.len() != nv {
            return Err(Error::arg(format!(
                "vertex function at level {} has {} values, expected {nv}",
                self.level,
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &VertexFunction, s: f64) {
        assert_eq!(self.level, other.level);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }
}

impl CellFunction {
    pub fn check(&self, fr: &Fractal) -> Result<()> {
        let nc = fr.try_vertex_approx(self.level)?.num_cells();
        if self.averages.len() != nc {
            return Err(Error::arg(format!(
                "cell function at level {} has {} averages, expected {nc}",
                self.level,
                self.averages.len()
            )));
        }
        Ok(())
    }
}

impl Fractal {
    /// Harmonic extension of values on V_{Λ_m} to V_{Λ_M}.
    pub fn harmonic_extend(&self, values: &[f64], m: usize, target: usize) -> Result<VertexFunction> {
        if target < m {
            return Err(Error::arg(format!("target level {target} below source level {m}")));
        }
        let src = self.try_vertex_approx(m)?;
        if values.len() != src.num_vertices() {
            return Err(Error::arg("value count does not match the source level"));
        }
        if target == m {
            return Ok(VertexFunction { level: m, values: values.to_vec() });
        }
        let dst = self.try_vertex_approx(target)?;
        let t = self.scale(target);
        let mut out = vec![0.0; dst.num_vertices()];
        for (c, w) in src.words.iter().enumerate() {
            let bvals = src.cell_values(values, c);
            self.descend(w, &bvals, t, &mut |leaf, vals| {
                for (p, &v) in vals.iter().enumerate() {
                    out[dst.id_of(leaf, p).expect("leaf vertex")] = v;
                }
            });
        }
        Ok(VertexFunction { level: target, values: out })
    }

    pub fn extend(&self, f: &VertexFunction, target: usize) -> Result<VertexFunction> {
        self.harmonic_extend(&f.values, f.level, target)
    }

    /// Restriction of f to V_{Λ_m}, m ≤ f.level.
    pub fn restrict(&self, f: &VertexFunction, m: usize) -> Result<VertexFunction> {
        if m > f.level {
            return Err(Error::arg(format!("cannot restrict level {} to finer level {m}", f.level)));
        }
        if m == f.level {
            return Ok(f.clone());
        }
        let emb = self.vertex_approx(f.level).embedding_from(&self.vertex_approx(m))?;
        Ok(VertexFunction { level: m, values: emb.iter().map(|&i| f.values[i]).collect() })
    }

    /// μ_w ℓ·(f|_w) for every cell of Λ_{f.level}.
    pub fn cell_integrals(&self, f: &VertexFunction) -> Vec<f64> {
        let approx = self.vertex_approx(f.level);
        (0..approx.num_cells())
            .map(|c| {
                let s: f64 =
                    approx.cell_vertices[c].iter().zip(&self.ell).map(|(&v, l)| l * f.values[v]).sum();
                approx.mu_w[c] * s
            })
            .collect()
    }

    /// ∫ f dμ, exact for the piecewise-harmonic interpretation.
    pub fn integrate(&self, f: &VertexFunction) -> f64 {
        self.cell_integrals(f).iter().sum()
    }

    /// Averages A_w(f) over Λ_m, computed at the resolution of f.
    pub fn averages(&self, f: &VertexFunction, m: usize) -> Result<Vec<f64>> {
        if m > f.level {
            return Err(Error::arg(format!("averages at level {m} need a function of level >= {m}")));
        }
        let integrals = self.cell_integrals(f);
        Ok(self.aggregate(&integrals, f.level, m))
    }

    /// Averages over Λ_m of a cell function given at a finer level.
    pub fn coarsen(&self, f: &CellFunction, m: usize) -> Result<CellFunction> {
        if m > f.level {
            return Err(Error::arg(format!("cannot coarsen level {} to level {m}", f.level)));
        }
        let fine = self.vertex_approx(f.level);
        let integrals: Vec<f64> = f.averages.iter().zip(&fine.mu_w).map(|(a, mu)| a * mu).collect();
        Ok(CellFunction { level: m, averages: self.aggregate(&integrals, f.level, m) })
    }

    /// The same piecewise-constant function listed on the finer Λ_m.
    pub fn refine_cells(&self, f: &CellFunction, m: usize) -> Result<CellFunction> {
        if m < f.level {
            return Err(Error::arg(format!("cannot refine level {} to level {m}", f.level)));
        }
        let anc = self.ancestor_map(m, f.level);
        Ok(CellFunction { level: m, averages: anc.iter().map(|&a| f.averages[a]).collect() })
    }

    fn aggregate(&self, integrals: &[f64], fine: usize, m: usize) -> Vec<f64> {
        let coarse = self.vertex_approx(m);
        let anc = self.ancestor_map(fine, m);
        let mut sums = vec![0.0; coarse.num_cells()];
        for (i, &a) in anc.iter().enumerate() {
            sums[a] += integrals[i];
        }
        sums.iter().zip(&coarse.mu_w).map(|(s, mu)| s / mu).collect()
    }

    /// Exact L² pairing of piecewise-harmonic functions through the
    /// harmonic Gram matrix.
    pub fn l2_inner(&self, f: &VertexFunction, g: &VertexFunction) -> f64 {
        assert_eq!(f.level, g.level, "l2_inner needs equal levels");
        let approx = self.vertex_approx(f.level);
        let b = self.b();
        let mut total = 0.0;
        for (c, verts) in approx.cell_vertices.iter().enumerate() {
            let mut s = 0.0;
            for p in 0..b {
                for q in 0..b {
                    s += f.values[verts[p]] * self.gram[(p, q)] * g.values[verts[q]];
                }
            }
            total += approx.mu_w[c] * s;
        }
        total
    }

    pub fn l2_norm(&self, f: &VertexFunction) -> f64 {
        self.l2_inner(f, f).max(0.0).sqrt()
    }

    /// μ-weighted L² norm of a piecewise-constant cell function.
    pub fn cell_l2_norm(&self, f: &CellFunction) -> f64 {
        let approx = self.vertex_approx(f.level);
        f.averages.iter().zip(&approx.mu_w).map(|(a, mu)| mu * a * a).sum::<f64>().sqrt()
    }

    /// Refinement quadrature of ∫ f g dμ: descend `depth` levels below the
    /// functions' level and apply ℓ to pointwise products at the corners.
    pub fn inner_product(&self, f: &VertexFunction, g: &VertexFunction, depth: usize) -> Result<Quadrature> {
        if f.level != g.level {
            return Err(Error::arg("inner_product needs functions of equal level"));
        }
        if depth == 0 {
            return Err(Error::arg("quadrature depth must be at least 1"));
        }
        let fine = self.quadrature(f, g, depth);
        let coarse = self.quadrature(f, g, depth - 1);
        Ok(Quadrature { value: fine, error: (fine - coarse).abs() })
    }

    fn quadrature(&self, f: &VertexFunction, g: &VertexFunction, depth: usize) -> f64 {
        let approx = self.vertex_approx(f.level);
        let b = self.b();
        let t = self.scale(f.level + depth);
        let mut total = 0.0;
        for (c, w) in approx.words.iter().enumerate() {
            let mut vals = approx.cell_values(&f.values, c);
            vals.extend(approx.cell_values(&g.values, c));
            self.descend(w, &vals, t, &mut |leaf, v| {
                let s: f64 = (0..b).map(|p| self.ell[p] * v[p] * v[b + p]).sum();
                total += self.mu_of(leaf) * s;
            });
        }
        total
    }
}
