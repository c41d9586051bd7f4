//! Fractal specifications: parsing, validation, derived constants and the
//! level-1 harmonic extension data.
//!
//! A spec describes N contractions F_i, the boundary V_0 (each boundary
//! point fixed by exactly one contraction), resistance weights r_i and a
//! boundary Laplacian H0. Points of the level-1 graph are addresses (i, p)
//! meaning F_i(p); gluings (i, p, j, q) declare F_i(p) = F_j(q).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::address::UnionFind;
use crate::linalg::Spd;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalSpec {
    pub name: String,
    pub n: usize,
    pub boundary: usize,
    pub r: Vec<f64>,
    pub h0: Vec<Vec<f64>>,
    pub gluings: Vec<[usize; 4]>,
    pub fixed_point: Vec<usize>,
}

pub const PRESETS: &[&str] = &["sg", "interval"];

impl FractalSpec {
    /// The Sierpinski gasket with its standard harmonic structure.
    pub fn sierpinski_gasket() -> Self {
        FractalSpec {
            name: "sg".into(),
            n: 3,
            boundary: 3,
            r: vec![0.6; 3],
            h0: vec![vec![-2.0, 1.0, 1.0], vec![1.0, -2.0, 1.0], vec![1.0, 1.0, -2.0]],
            gluings: vec![[0, 1, 1, 0], [0, 2, 2, 0], [1, 2, 2, 1]],
            fixed_point: vec![0, 1, 2],
        }
    }

    /// The unit interval as two halves.
    pub fn interval() -> Self {
        FractalSpec {
            name: "interval".into(),
            n: 2,
            boundary: 2,
            r: vec![0.5, 0.5],
            h0: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            gluings: vec![[0, 1, 1, 0]],
            fixed_point: vec![0, 1],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sg" => Ok(Self::sierpinski_gasket()),
            "interval" => Ok(Self::interval()),
            other => Err(Error::arg(format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")))),
        }
    }

    /// A preset name or a path to a JSON spec file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if PRESETS.contains(&name_or_path) {
            return Self::preset(name_or_path);
        }
        let text = std::fs::read_to_string(name_or_path)
            .map_err(|source| Error::Io { path: name_or_path.into(), source })?;
        parse_spec(&text)
    }

    pub fn h0_matrix(&self) -> DMatrix<f64> {
        let b = self.boundary;
        DMatrix::from_fn(b, b, |i, j| self.h0[i][j])
    }

    pub fn r_min(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn equal_weights(&self) -> bool {
        self.r.iter().all(|&x| (x - self.r[0]).abs() <= 1e-15 * x)
    }

    /// Check every structural invariant. Parsing calls this; specs built in
    /// code should call it before use.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invariant("n", "at least two contractions are required"));
        }
        if self.boundary < 2 {
            return Err(Error::invariant("boundary", "at least two boundary vertices are required"));
        }
        if self.r.len() != self.n {
            return Err(Error::invariant("r", format!("expected {} weights, got {}", self.n, self.r.len())));
        }
        for (i, &ri) in self.r.iter().enumerate() {
            if !ri.is_finite() || ri <= 0.0 {
                return Err(Error::invariant(format!("r[{i}]"), "weights must be positive"));
            }
            if ri >= 1.0 {
                return Err(Error::invariant(format!("r[{i}]"), "regular harmonic structure requires r_i<1"));
            }
        }
        self.validate_h0()?;
        for (k, g) in self.gluings.iter().enumerate() {
            let [i, p, j, q] = *g;
            if i >= self.n || j >= self.n || p >= self.boundary || q >= self.boundary {
                return Err(Error::invariant(format!("gluings[{k}]"), "index out of range"));
            }
            if i == j {
                return Err(Error::invariant(format!("gluings[{k}]"), "a gluing must involve distinct cells"));
            }
        }
        if self.fixed_point.len() != self.boundary {
            return Err(Error::invariant(
                "fixed_point",
                format!("expected {} entries, got {}", self.boundary, self.fixed_point.len()),
            ));
        }
        for (p, &i) in self.fixed_point.iter().enumerate() {
            if i >= self.n {
                return Err(Error::invariant(format!("fixed_point[{p}]"), "contraction index out of range"));
            }
            if self.fixed_point[..p].contains(&i) {
                return Err(Error::invariant(
                    format!("fixed_point[{p}]"),
                    "each contraction fixes at most one boundary vertex",
                ));
            }
        }
        let net = LevelOne::build(self)?;
        if !net.connected(self) {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    fn validate_h0(&self) -> Result<()> {
        let b = self.boundary;
        if self.h0.len() != b {
            return Err(Error::invariant("h0", format!("expected {b} rows, got {}", self.h0.len())));
        }
        for (i, row) in self.h0.iter().enumerate() {
            if row.len() != b {
                return Err(Error::invariant(format!("h0[{i}]"), format!("expected {b} entries")));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::invariant(format!("h0[{i}]"), "entries must be finite"));
            }
        }
        let scale = self.h0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        for i in 0..b {
            for j in 0..b {
                if (self.h0[i][j] - self.h0[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::invariant(format!("h0[{i}][{j}]"), "h0 must be symmetric"));
                }
                if i != j && self.h0[i][j] < 0.0 {
                    return Err(Error::invariant(format!("h0[{i}][{j}]"), "off-diagonal entries must be >= 0"));
                }
            }
            let s: f64 = self.h0[i].iter().sum();
            if s.abs() > 1e-10 * scale {
                return Err(Error::invariant(format!("h0[{i}]"), "row sums must vanish"));
            }
        }
        // Nonnegative off-diagonals with zero row sums make H0 negative
        // semidefinite; its kernel is the constants iff the graph is connected.
        let mut uf = UnionFind::new(b);
        for i in 0..b {
            for j in 0..b {
                if i != j && self.h0[i][j] > 0.0 {
                    uf.union(i, j);
                }
            }
        }
        let root = uf.find(0);
        if (1..b).any(|i| uf.find(i) != root) {
            return Err(Error::invariant("h0", "kernel of h0 must be exactly the constants (graph disconnected)"));
        }
        Ok(())
    }
}

pub fn parse_spec(text: &str) -> Result<FractalSpec> {
    let spec: FractalSpec = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// Root of Σ r_i^s = 1.
pub fn hausdorff_dimension(spec: &FractalSpec) -> f64 {
    let f = |s: f64| spec.r.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    let df = |s: f64| spec.r.iter().map(|r| r.ln() * r.powf(s)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, 64.0f64);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..4 {
        let step = f(s) / df(s);
        if !step.is_finite() {
            break;
        }
        s -= step;
        if step.abs() < 1e-16 * s {
            break;
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub d_h: f64,
    pub d_w: f64,
    pub d_s: f64,
    pub r_min: f64,
    pub mu: Vec<f64>,
}

impl DerivedConstants {
    /// λ(σ) = r_min^{(d_H − σ d_W)/2}.
    pub fn lambda(&self, sigma: f64) -> f64 {
        self.r_min.powf(0.5 * (self.d_h - sigma * self.d_w))
    }

    /// Critical orders 2k + d_S/2 and 2k + 2 − d_S/2 below `max`, ascending.
    pub fn critical_orders(&self, max: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0.0;
        loop {
            let a = 2.0 * k + 0.5 * self.d_s;
            let b = 2.0 * k + 2.0 - 0.5 * self.d_s;
            if a >= max {
                break;
            }
            out.push(a);
            if b < max {
                out.push(b);
            }
            k += 1.0;
        }
        out
    }

    pub fn is_critical(&self, sigma: f64) -> bool {
        self.critical_orders(sigma + 1.0).iter().any(|c| (c - sigma).abs() < 1e-12)
    }
}

pub fn derived_constants(spec: &FractalSpec) -> DerivedConstants {
    let d_h = hausdorff_dimension(spec);
    let d_w = 1.0 + d_h;
    DerivedConstants {
        d_h,
        d_w,
        d_s: 2.0 * d_h / d_w,
        r_min: spec.r_min(),
        mu: spec.r.iter().map(|r| r.powf(d_h)).collect(),
    }
}

/// The level-1 network: vertex classes of addresses (i, p).
#[derive(Clone, Debug)]
pub(crate) struct LevelOne {
    pub num_vertices: usize,
    /// `cell_vertices[i][p]` is the vertex id of F_i(p). Ids below
    /// `boundary` are the boundary points in their own order.
    pub cell_vertices: Vec<Vec<usize>>,
}

impl LevelOne {
    pub fn build(spec: &FractalSpec) -> Result<Self> {
        let (n, b) = (spec.n, spec.boundary);
        let mut uf = UnionFind::new(n * b);
        for g in &spec.gluings {
            uf.union(g[0] * b + g[1], g[2] * b + g[3]);
        }
        let mut id_of_root = vec![usize::MAX; n * b];
        for p in 0..b {
            let root = uf.find(spec.fixed_point[p] * b + p);
            if id_of_root[root] != usize::MAX {
                return Err(Error::invariant("gluings", "gluings identify two boundary vertices"));
            }
            id_of_root[root] = p;
        }
        let mut next = b;
        for a in 0..n * b {
            let root = uf.find(a);
            if id_of_root[root] == usize::MAX {
                id_of_root[root] = next;
                next += 1;
            }
        }
        let cell_vertices = (0..n).map(|i| (0..b).map(|p| id_of_root[uf.find(i * b + p)]).collect()).collect();
        Ok(LevelOne { num_vertices: next, cell_vertices })
    }

    fn connected(&self, spec: &FractalSpec) -> bool {
        let mut uf = UnionFind::new(self.num_vertices);
        for cell in &self.cell_vertices {
            for p in 0..spec.boundary {
                for q in 0..spec.boundary {
                    if p != q && spec.h0[p][q] > 0.0 {
                        uf.union(cell[p], cell[q]);
                    }
                }
            }
        }
        let root = uf.find(0);
        (0..self.num_vertices).all(|v| uf.find(v) == root)
    }

    /// Level-1 conductance Laplacian Σ_i r_i^{-1} P_iᵀ H0 P_i.
    pub fn laplacian(&self, spec: &FractalSpec) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.num_vertices, self.num_vertices);
        for (i, cell) in self.cell_vertices.iter().enumerate() {
            let c = 1.0 / spec.r[i];
            for p in 0..spec.boundary {
                for q in 0..spec.boundary {
                    h[(cell[p], cell[q])] += c * spec.h0[p][q];
                }
            }
        }
        h
    }

    pub fn interior(&self, spec: &FractalSpec) -> usize {
        self.num_vertices - spec.boundary
    }

    /// Values of the harmonic extension on interior vertices, one column per
    /// boundary unit vector.
    pub fn interior_extension(&self, spec: &FractalSpec) -> Result<DMatrix<f64>> {
        let b = spec.boundary;
        let ni = self.interior(spec);
        if ni == 0 {
            return Ok(DMatrix::zeros(0, b));
        }
        let h = self.laplacian(spec);
        let neg_hii = -h.view((b, b), (ni, ni)).clone_owned();
        let hib = h.view((b, 0), (ni, b)).clone_owned();
        let chol = Spd::new(neg_hii, "level-1 interior block").map_err(|_| {
            Error::Singular("level-1 interior block is singular (disconnected level-1 graph)".into())
        })?;
        Ok(chol.solve_mat(&hib))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionMatrices {
    pub a: Vec<DMatrix<f64>>,
}

impl ExtensionMatrices {
    /// Boundary values on child cell `i` from boundary values on the parent.
    pub fn apply(&self, i: usize, values: &[f64]) -> Vec<f64> {
        let a = &self.a[i];
        (0..a.nrows()).map(|p| (0..a.ncols()).map(|q| a[(p, q)] * values[q]).sum()).collect()
    }
}

pub fn extension_matrices(spec: &FractalSpec) -> Result<ExtensionMatrices> {
    let b = spec.boundary;
    let net = LevelOne::build(spec)?;
    let x = net.interior_extension(spec)?;
    let a = net
        .cell_vertices
        .iter()
        .map(|cell| {
            DMatrix::from_fn(b, b, |p, q| {
                let v = cell[p];
                if v < b {
                    if v == q { 1.0 } else { 0.0 }
                } else {
                    x[(v - b, q)]
                }
            })
        })
        .collect();
    Ok(ExtensionMatrices { a })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicReport {
    /// Max-entry deviation of the level-1 trace from H0.
    pub deviation: f64,
    pub trace: Vec<Vec<f64>>,
    pub passes: bool,
}

pub const HARMONIC_TOLERANCE: f64 = 1e-10;

/// Trace of E_1 onto V_0 (Schur complement) compared with E_0.
pub fn verify_harmonic_structure(spec: &FractalSpec) -> Result<HarmonicReport> {
    let b = spec.boundary;
    let net = LevelOne::build(spec)?;
    let h = net.laplacian(spec);
    let ni = net.interior(spec);
    let mut trace = h.view((0, 0), (b, b)).clone_owned();
    if ni > 0 {
        let x = net.interior_extension(spec)?;
        let hbi = h.view((0, b), (b, ni)).clone_owned();
        trace += hbi * x;
    }
    let h0 = spec.h0_matrix();
    let deviation = (&trace - &h0).amax();
    let scale = h0.amax().max(1.0);
    Ok(HarmonicReport {
        deviation,
        trace: (0..b).map(|i| (0..b).map(|j| trace[(i, j)]).collect()).collect(),
        passes: deviation <= HARMONIC_TOLERANCE * scale,
    })
}

/// E_0(f) = −fᵀ H0 f.
pub fn boundary_energy(h0: &DMatrix<f64>, f: &[f64]) -> f64 {
    let v = DVector::from_column_slice(f);
    -(v.transpose() * h0 * &v)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        FractalSpec::sierpinski_gasket().validate().unwrap();
        FractalSpec::interval().validate().unwrap();
    }

    #[test]
    fn r_equal_one_is_rejected() {
        let mut s = FractalSpec::sierpinski_gasket();
        s.r[0] = 1.0;
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("regular harmonic structure requires r_i<1"), "{msg}");
        assert!(msg.contains("r[0]"), "{msg}");
    }

    #[test]
    fn schema_errors_are_reported() {
        assert!(matches!(parse_spec("{\"name\": 3}"), Err(Error::Schema(_))));
        let json = serde_json::to_string(&FractalSpec::interval()).unwrap();
        assert_eq!(parse_spec(&json).unwrap(), FractalSpec::interval());
    }

    #[test]
    fn disconnected_level_one_graph_is_rejected() {
        let mut s = FractalSpec::sierpinski_gasket();
        s.gluings.clear();
        assert!(matches!(s.validate(), Err(Error::Disconnected)));
    }

    #[test]
    fn asymmetric_h0_is_rejected() {
        let mut s = FractalSpec::sierpinski_gasket();
        s.h0[0][1] = 2.0;
        s.h0[0][0] = -3.0;
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("symmetric"), "{e}");
    }

    #[test]
    fn fixed_point_must_be_injective() {
        let mut s = FractalSpec::sierpinski_gasket();
        s.fixed_point = vec![0, 0, 2];
        assert!(s.validate().unwrap_err().to_string().contains("fixed_point[1]"));
    }

    #[test]
    fn dimensions() {
        let sg = derived_constants(&FractalSpec::sierpinski_gasket());
        assert!((sg.d_h - 3f64.ln() / (5.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((sg.lambda(0.0) - 3f64.powf(-0.5)).abs() < 1e-12);
        assert!((sg.lambda(sg.d_s / 2.0) - 1.0).abs() < 1e-12);
        let iv = derived_constants(&FractalSpec::interval());
        assert!((iv.d_h - 1.0).abs() < 1e-12);
        let mut odd = FractalSpec::interval();
        odd.r = vec![0.5, 0.25];
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln() / 2f64.ln();
        assert!((hausdorff_dimension(&odd) - golden).abs() < 1e-12);
    }

    #[test]
    fn critical_orders_on_sg() {
        let c = derived_constants(&FractalSpec::sierpinski_gasket());
        let orders = c.critical_orders(2.0);
        assert_eq!(orders.len(), 2);
        assert!((orders[0] - 3f64.ln() / 5f64.ln()).abs() < 1e-12);
        assert!((orders[1] - (2.0 - 3f64.ln() / 5f64.ln())).abs() < 1e-12);
        assert!(c.is_critical(orders[1]));
        assert!(!c.is_critical(1.0));
    }

    #[test]
    fn sg_extension_values() {
        let ext = extension_matrices(&FractalSpec::sierpinski_gasket()).unwrap();
        // F_0 fixes p_0; its other corners are the midpoints next to p_0.
        let v = ext.apply(0, &[1.0, 0.0, 0.0]);
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[1] - 0.4).abs() < 1e-14 && (v[2] - 0.4).abs() < 1e-14);
        let w = ext.apply(1, &[1.0, 0.0, 0.0]);
        assert!((w[2] - 0.2).abs() < 1e-14);
        for a in &ext.a {
            for p in 0..3 {
                assert!((a.row(p).sum() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interval_midpoint_is_mean() {
        let ext = extension_matrices(&FractalSpec::interval()).unwrap();
        assert!((ext.apply(0, &[1.0, 0.0])[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn harmonic_structure_check() {
        assert!(verify_harmonic_structure(&FractalSpec::sierpinski_gasket()).unwrap().deviation < 1e-12);
        assert!(verify_harmonic_structure(&FractalSpec::interval()).unwrap().passes);
        let mut bad = FractalSpec::sierpinski_gasket();
        bad.r = vec![0.5; 3];
        let rep = verify_harmonic_structure(&bad).unwrap();
        assert!(!rep.passes && rep.deviation > 0.1);
    }
}
