use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::address::{UnionFind, Word};
use crate::spec_core::FractalSpec;
use crate::{Error, Result};

const NONE: u32 = u32::MAX;
const ADDRESS_LIMIT: usize = 40_000_000;

/// Vertex graph of a partition: the points F_w(p) for w in the partition and
/// p in V_0, identified under the gluing rules.
///
/// Vertex ids follow the canonical address of each point, which is the
/// shortlex-smallest (word, boundary index) pair naming it. Boundary points
/// (∅, p) therefore come first, in order.
#[derive(Clone, Debug)]
pub struct VertexApprox {
    pub level: usize,
    pub scale: f64,
    pub words: Vec<Word>,
    pub r_w: Vec<f64>,
    pub mu_w: Vec<f64>,
    /// `cell_vertices[c][p]` is the id of F_{words[c]}(p).
    pub cell_vertices: Vec<Vec<usize>>,
    pub addresses: Vec<(Word, usize)>,
    /// Oriented from the smaller id to the larger, conductances merged.
    pub edges: Vec<(usize, usize, f64)>,
    pub(crate) n: usize,
    pub(crate) b: usize,
    depth: usize,
    fixed_point: Vec<usize>,
    addr_to_id: Vec<u32>,
}

fn pow(n: usize, k: usize) -> usize {
    n.pow(k as u32)
}

fn word_index(w: &Word, n: usize) -> usize {
    w.letters().fold(0, |acc, l| acc * n + l)
}

impl VertexApprox {
    pub(crate) fn build(
        spec: &FractalSpec,
        level: usize,
        scale: f64,
        words: Vec<Word>,
        r_w: Vec<f64>,
        mu_w: Vec<f64>,
    ) -> Result<Self> {
        let (n, b) = (spec.n, spec.boundary);
        let depth = words.iter().map(Word::len).max().unwrap_or(0);
        let leaves = pow(n, depth);
        let total = leaves
            .checked_mul(b)
            .filter(|&t| t <= ADDRESS_LIMIT)
            .ok_or_else(|| Error::TooLarge(format!("address space n^{depth}·{b}")))?;
        // repeat[k] = Σ_{j<k} n^j, the index of ι^k divided by ι.
        let repeat: Vec<usize> = (0..=depth).map(|k| (0..k).map(|j| pow(n, j)).sum()).collect();
        let addr = |idx: usize, len: usize, p: usize| -> usize {
            let pad = depth - len;
            (idx * pow(n, pad) + spec.fixed_point[p] * repeat[pad]) * b + p
        };

        let mut uf = UnionFind::new(total);
        for k in 0..depth {
            for v in 0..pow(n, k) {
                for g in &spec.gluings {
                    uf.union(addr(v * n + g[0], k + 1, g[1]), addr(v * n + g[2], k + 1, g[3]));
                }
            }
        }

        let mut needed = vec![false; total];
        for w in &words {
            let idx = word_index(w, n);
            for p in 0..b {
                let root = uf.find(addr(idx, w.len(), p));
                needed[root] = true;
            }
        }
        // Canonical key per class: (stripped length, word index, p). For a
        // fixed length, word index order is lexicographic order.
        let mut key: Vec<(usize, usize, usize)> = vec![(usize::MAX, 0, 0); total];
        let mut roots = vec![0usize; total];
        for a in 0..total {
            let root = uf.find(a);
            roots[a] = root;
            if !needed[root] {
                continue;
            }
            let p = a % b;
            let mut idx = a / b;
            let mut len = depth;
            while len > 0 && idx % n == spec.fixed_point[p] {
                idx /= n;
                len -= 1;
            }
            let cand = (len, idx, p);
            if cand < key[root] {
                key[root] = cand;
            }
        }
        let mut classes: Vec<usize> = (0..total).filter(|&a| needed[a] && roots[a] == a).collect();
        classes.sort_by_key(|&root| key[root]);
        let mut id_of_root = vec![NONE; total];
        for (id, &root) in classes.iter().enumerate() {
            id_of_root[root] = id as u32;
        }
        let addr_to_id: Vec<u32> = roots.iter().map(|&root| id_of_root[root]).collect();
        let addresses = classes
            .iter()
            .map(|&root| {
                let (len, mut idx, p) = key[root];
                let mut letters = vec![0usize; len];
                for slot in letters.iter_mut().rev() {
                    *slot = idx % n;
                    idx /= n;
                }
                (Word::from_letters(&letters), p)
            })
            .collect();
        let cell_vertices: Vec<Vec<usize>> = words
            .iter()
            .map(|w| {
                let idx = word_index(w, n);
                (0..b).map(|p| addr_to_id[addr(idx, w.len(), p)] as usize).collect()
            })
            .collect();

        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (c, verts) in cell_vertices.iter().enumerate() {
            for p in 0..b {
                for q in p + 1..b {
                    let h = spec.h0[p][q];
                    if h > 0.0 {
                        let (x, y) = (verts[p].min(verts[q]), verts[p].max(verts[q]));
                        *merged.entry((x, y)).or_insert(0.0) += h / r_w[c];
                    }
                }
            }
        }
        let edges = merged.into_iter().map(|((x, y), c)| (x, y, c)).collect();

        Ok(VertexApprox {
            level,
            scale,
            words,
            r_w,
            mu_w,
            cell_vertices,
            addresses,
            edges,
            n,
            b,
            depth,
            fixed_point: spec.fixed_point.clone(),
            addr_to_id,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.addresses.len()
    }

    pub fn num_cells(&self) -> usize {
        self.words.len()
    }

    pub fn boundary_size(&self) -> usize {
        self.b
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        id < self.b
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        self.b..self.num_vertices()
    }

    /// Id of the point F_w(p), if it is a vertex of this approximation.
    pub fn id_of(&self, w: &Word, p: usize) -> Option<usize> {
        let mut len = w.len();
        while len > self.depth {
            if w.0[len - 1] as usize != self.fixed_point[p] {
                return None;
            }
            len -= 1;
        }
        let idx = w.0[..len].iter().fold(0usize, |acc, &l| acc * self.n + l as usize);
        let pad = self.depth - len;
        let rep: usize = (0..pad).map(|j| pow(self.n, j)).sum();
        let a = (idx * pow(self.n, pad) + self.fixed_point[p] * rep) * self.b + p;
        match self.addr_to_id[a] {
            NONE => None,
            id => Some(id as usize),
        }
    }

    /// Map from ids of `coarse` to ids of `self`.
    pub fn embedding_from(&self, coarse: &VertexApprox) -> Result<Vec<usize>> {
        coarse
            .addresses
            .iter()
            .map(|(w, p)| {
                self.id_of(w, *p)
                    .ok_or_else(|| Error::arg(format!("vertex ({w}, {p}) missing from the finer approximation")))
            })
            .collect()
    }

    pub fn cell_values(&self, values: &[f64], cell: usize) -> Vec<f64> {
        self.cell_vertices[cell].iter().map(|&v| values[v]).collect()
    }

    /// d_x = Σ over cells containing x of μ_w ℓ_p.
    pub fn tent_weights(&self, ell: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.num_vertices()];
        for (c, verts) in self.cell_vertices.iter().enumerate() {
            for (p, &v) in verts.iter().enumerate() {
                d[v] += self.mu_w[c] * ell[p];
            }
        }
        d
    }

    /// (H f)(x) = Σ_cells r_w^{-1} (H0 f|_w)(p).
    pub fn apply_h(&self, h0: &DMatrix<f64>, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices()];
        for (c, verts) in self.cell_vertices.iter().enumerate() {
            let inv = 1.0 / self.r_w[c];
            for p in 0..self.b {
                let s: f64 = (0..self.b).map(|q| h0[(p, q)] * values[verts[q]]).sum();
                out[verts[p]] += inv * s;
            }
        }
        out
    }

    /// E(f, g) = Σ_w r_w^{-1} E_0(f|_w, g|_w).
    pub fn energy_pair(&self, h0: &DMatrix<f64>, f: &[f64], g: &[f64]) -> f64 {
        let mut e = 0.0;
        for (c, verts) in self.cell_vertices.iter().enumerate() {
            let mut s = 0.0;
            for p in 0..self.b {
                for q in 0..self.b {
                    s -= f[verts[p]] * h0[(p, q)] * g[verts[q]];
                }
            }
            e += s / self.r_w[c];
        }
        e
    }

    /// Dense conductance Laplacian H (negative semidefinite).
    pub fn dense_h(&self) -> DMatrix<f64> {
        let nv = self.num_vertices();
        let mut h = DMatrix::zeros(nv, nv);
        for &(x, y, c) in &self.edges {
            h[(x, y)] += c;
            h[(y, x)] += c;
            h[(x, x)] -= c;
            h[(y, y)] -= c;
        }
        h
    }

    /// For each vertex, the (cell, boundary index) pairs naming it.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = vec![Vec::new(); self.num_vertices()];
        for (c, verts) in self.cell_vertices.iter().enumerate() {
            for (p, &v) in verts.iter().enumerate() {
                inc[v].push((c, p));
            }
        }
        inc
    }

    /// Smallest vertex id of each cell.
    pub fn anchors(&self) -> Vec<usize> {
        self.cell_vertices.iter().map(|v| *v.iter().min().unwrap()).collect()
    }
}
