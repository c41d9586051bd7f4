//! Partitions Λ(t), vertex and cell graphs, the self-similar measure,
//! quadrature and the resistance metric.
//!
//! [`Fractal`] bundles a validated spec with its derived constants and
//! caches the approximations built from it. It is cheap to share across
//! threads; every cached object is immutable.

mod cell;
mod functions;
mod resistance;
mod vertex;

use std::any::Any;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

pub use cell::{CellApprox, CellEdge};
pub use functions::{CellFunction, Function, Quadrature, VertexFunction};
pub use resistance::{
    measure_regularity_report, resistance_ball, resistance_cell_ball, resistance_matrix, RegularityReport,
};
pub use vertex::VertexApprox;

use crate::address::Word;
use crate::linalg::Spd;
use crate::spec_core::{
    derived_constants, extension_matrices, verify_harmonic_structure, DerivedConstants, ExtensionMatrices,
    FractalSpec,
};
use crate::{Error, Result};

/// Relative slack when testing r_w ≤ t for products of floating weights.
const SCALE_SLACK: f64 = 1e-10;

pub(crate) fn fits(r: f64, t: f64) -> bool {
    r <= t * (1.0 + SCALE_SLACK)
}

type Slot = Arc<OnceLock<Arc<dyn Any + Send + Sync>>>;

pub struct Fractal {
    spec: FractalSpec,
    constants: DerivedConstants,
    ext: ExtensionMatrices,
    h0: DMatrix<f64>,
    ell: Vec<f64>,
    gram: DMatrix<f64>,
    green_cells: Vec<Vec<f64>>,
    bubble_gamma: f64,
    cache: Mutex<HashMap<String, Slot>>,
}

impl std::fmt::Debug for Fractal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fractal").field("spec", &self.spec.name).finish_non_exhaustive()
    }
}

impl Fractal {
    /// Validate `spec`, check the harmonic structure and precompute the
    /// integral functional, Gram matrix and Green data of the unit cell.
    pub fn new(spec: FractalSpec) -> Result<Self> {
        spec.validate()?;
        let report = verify_harmonic_structure(&spec)?;
        if !report.passes {
            return Err(Error::NotHarmonic(report.deviation));
        }
        let constants = derived_constants(&spec);
        let ext = extension_matrices(&spec)?;
        let ell = integral_functional(&ext, &constants.mu)?;
        let gram = harmonic_gram(&ext, &constants.mu)?;
        let mut fr = Fractal {
            h0: spec.h0_matrix(),
            spec,
            constants,
            ext,
            ell,
            gram,
            green_cells: Vec::new(),
            bubble_gamma: 0.0,
            cache: Mutex::new(HashMap::new()),
        };
        fr.init_green()?;
        Ok(fr)
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::new(FractalSpec::preset(name)?)
    }

    pub fn spec(&self) -> &FractalSpec {
        &self.spec
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    pub fn ext(&self) -> &ExtensionMatrices {
        &self.ext
    }

    pub fn h0(&self) -> &DMatrix<f64> {
        &self.h0
    }

    /// ℓ with ℓ·(h|V_0) = ∫h dμ for harmonic h.
    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    /// G_pq = ∫ h_p h_q dμ for the harmonic basis h_p.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// ∫ G1 dμ, where G1 is the Dirichlet Green function of the constant 1.
    pub fn bubble_gamma(&self) -> f64 {
        self.bubble_gamma
    }

    /// Values of G1 on F_i(V_0).
    pub fn green_cell_values(&self, i: usize) -> &[f64] {
        &self.green_cells[i]
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn b(&self) -> usize {
        self.spec.boundary
    }

    pub fn scale(&self, m: usize) -> f64 {
        self.constants.r_min.powi(m as i32)
    }

    pub fn r_of(&self, w: &Word) -> f64 {
        w.letters().map(|i| self.spec.r[i]).product()
    }

    pub fn mu_of(&self, w: &Word) -> f64 {
        w.letters().map(|i| self.constants.mu[i]).product()
    }

    /// Λ(t); see [`partition_words`].
    pub fn partition_words(&self, t: f64) -> Result<Vec<Word>> {
        partition_words(&self.spec, t)
    }

    /// Λ_m, with Λ_0 = {∅}.
    pub fn level_words(&self, m: usize) -> Vec<Word> {
        if m == 0 {
            vec![Word::empty()]
        } else {
            self.partition_words(self.scale(m)).expect("scale in range")
        }
    }

    /// Words below `start` down to scale `t` (relative to the whole fractal).
    pub fn words_below(&self, start: &Word, t: f64) -> Vec<Word> {
        let mut out = Vec::new();
        self.descend(start, &vec![0.0; self.b()], t, &mut |w, _| out.push(w.clone()));
        out
    }

    pub(crate) fn cached<T, F>(&self, key: String, build: F) -> Result<Arc<T>>
    where
        T: Any + Send + Sync,
        F: FnOnce() -> Result<T>,
    {
        let slot = {
            let mut map = self.cache.lock().expect("cache lock");
            map.entry(key).or_default().clone()
        };
        if let Some(v) = slot.get() {
            return Ok(v.clone().downcast::<T>().expect("cache type"));
        }
        let value: Arc<dyn Any + Send + Sync> = Arc::new(build()?);
        let v = slot.get_or_init(|| value).clone();
        Ok(v.downcast::<T>().expect("cache type"))
    }

    fn build_approx(&self, level: usize, scale: f64, words: Vec<Word>) -> Result<VertexApprox> {
        let r_w = words.iter().map(|w| self.r_of(w)).collect();
        let mu_w = words.iter().map(|w| self.mu_of(w)).collect();
        VertexApprox::build(&self.spec, level, scale, words, r_w, mu_w)
    }

    pub fn try_vertex_approx(&self, m: usize) -> Result<Arc<VertexApprox>> {
        self.cached(format!("vertex/{m}"), || self.build_approx(m, self.scale(m), self.level_words(m)))
    }

    /// Vertex graph G_{v,m}. Panics if the address space is unreasonably
    /// large; use [`Fractal::try_vertex_approx`] to handle that case.
    pub fn vertex_approx(&self, m: usize) -> Arc<VertexApprox> {
        self.try_vertex_approx(m).expect("vertex approximation")
    }

    /// Vertex graph of the unit cell partitioned at relative scale `t`
    /// (the partition {∅} when t ≥ 1).
    pub fn relative_approx(&self, t: f64) -> Result<Arc<VertexApprox>> {
        let key = format!("relative/{:.9e}", t);
        self.cached(key, || {
            let words = self.words_below(&Word::empty(), t);
            self.build_approx(usize::MAX, t, words)
        })
    }

    pub fn cell_approx(&self, m: usize) -> Result<Arc<CellApprox>> {
        if m == 0 {
            return Err(Error::arg("cell graphs start at level 1"));
        }
        self.cached(format!("cell/{m}"), || {
            let vertex = self.try_vertex_approx(m)?;
            Ok(CellApprox::build(m, &vertex, self.ancestor_map(m, m - 1)))
        })
    }

    /// For each word of Λ_fine, the index of its ancestor in Λ_coarse.
    pub fn ancestor_map(&self, fine: usize, coarse: usize) -> Vec<usize> {
        assert!(coarse <= fine, "ancestor map needs coarse <= fine");
        let fine_words = &self.vertex_approx(fine).words;
        let coarse_words = &self.vertex_approx(coarse).words;
        let index: HashMap<&Word, usize> = coarse_words.iter().enumerate().map(|(i, w)| (w, i)).collect();
        let max_len = coarse_words.iter().map(Word::len).max().unwrap_or(0);
        fine_words
            .iter()
            .map(|w| {
                (0..=w.len().min(max_len))
                    .rev()
                    .find_map(|k| index.get(&w.prefix(k)).copied())
                    .expect("partition ancestor")
            })
            .collect()
    }

    /// Walk the cells below `start`, carrying harmonic boundary values, and
    /// visit each cell w with r_w ≤ t. `values` holds one or more columns of
    /// length #V_0 laid end to end.
    pub fn descend(&self, start: &Word, values: &[f64], t: f64, visit: &mut dyn FnMut(&Word, &[f64])) {
        let b = self.b();
        let mut stack = vec![(start.clone(), self.r_of(start), values.to_vec())];
        while let Some((w, r, vals)) = stack.pop() {
            if fits(r, t) {
                visit(&w, &vals);
                continue;
            }
            for i in (0..self.n()).rev() {
                let mut child = Vec::with_capacity(vals.len());
                for col in vals.chunks(b) {
                    child.extend(self.ext.apply(i, col));
                }
                stack.push((w.child(i), r * self.spec.r[i], child));
            }
        }
    }

    fn init_green(&mut self) -> Result<()> {
        let b = self.b();
        let letters: Vec<Word> = (0..self.n()).map(|i| Word::from_letters(&[i])).collect();
        let one = self.build_approx(1, self.constants.r_min, letters)?;
        let d = one.tent_weights(&self.ell);
        let nv = one.num_vertices();
        let mut g = vec![0.0; nv];
        if nv > b {
            let h = one.dense_h();
            let neg = -h.view((b, b), (nv - b, nv - b)).clone_owned();
            let rhs = nalgebra::DVector::from_column_slice(&d[b..]);
            let sol = Spd::new(neg, "level-1 Green")?.solve(&rhs);
            g[b..].copy_from_slice(sol.as_slice());
        }
        let gamma1: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        let q: f64 = (0..self.n()).map(|i| self.spec.r[i] * self.constants.mu[i].powi(2)).sum();
        self.bubble_gamma = gamma1 / (1.0 - q);
        self.green_cells = one.cell_vertices.iter().map(|cell| cell.iter().map(|&v| g[v]).collect()).collect();
        Ok(())
    }
}

/// Λ(t) = {w : r_w ≤ t < r_{w*}} in lexicographic order. At t = 1 this is
/// the set of single letters.
pub fn partition_words(spec: &FractalSpec, t: f64) -> Result<Vec<Word>> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::arg(format!("scale t = {t} outside (0, 1]")));
    }
    let mut out = Vec::new();
    let mut stack: Vec<(Word, f64)> = (0..spec.n).rev().map(|i| (Word::from_letters(&[i]), spec.r[i])).collect();
    while let Some((w, r)) = stack.pop() {
        if fits(r, t) {
            out.push(w);
        } else {
            for i in (0..spec.n).rev() {
                stack.push((w.child(i), r * spec.r[i]));
            }
        }
    }
    Ok(out)
}

/// Normalized fixed point of ℓ = Σ μ_i A_iᵀ ℓ.
fn integral_functional(ext: &ExtensionMatrices, mu: &[f64]) -> Result<Vec<f64>> {
    let b = ext.a[0].nrows();
    let mut ell = vec![1.0 / b as f64; b];
    for _ in 0..100_000 {
        let mut next = vec![0.0; b];
        for (a, &m) in ext.a.iter().zip(mu) {
            for q in 0..b {
                next[q] += m * (0..b).map(|p| a[(p, q)] * ell[p]).sum::<f64>();
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let change = next.iter().zip(&ell).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ell = next;
        if change < 1e-16 {
            return Ok(ell);
        }
    }
    Err(Error::NoConvergence("integral functional fixed point".into()))
}

/// Fixed point of G = Σ μ_i A_iᵀ G A_i normalized by 1ᵀG1 = 1.
fn harmonic_gram(ext: &ExtensionMatrices, mu: &[f64]) -> Result<DMatrix<f64>> {
    let b = ext.a[0].nrows();
    let mut g = DMatrix::<f64>::identity(b, b) / b as f64;
    for _ in 0..100_000 {
        let mut next = DMatrix::zeros(b, b);
        for (a, &m) in ext.a.iter().zip(mu) {
            next += a.transpose() * &g * a * m;
        }
        let s = next.sum();
        next /= s;
        let change = (&next - &g).amax();
        g = next;
        if change < 1e-16 {
            return Ok((&g + g.transpose()) * 0.5);
        }
    }
    Err(Error::NoConvergence("harmonic Gram fixed point".into()))
}
