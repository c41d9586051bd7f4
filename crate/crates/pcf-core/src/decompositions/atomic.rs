use serde::Serialize;

use super::haar::haar_expand;
use super::tent::{tent_expand, tent_reconstruct, TentLayers};
use crate::address::Word;
use crate::approximation::{CellFunction, Fractal, VertexFunction};
use crate::operators::{graph_laplacian, laplacian_apply, DirichletGreen};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Indicator atoms, below the first critical order of each band.
    A,
    /// Tent atoms, between the two critical orders of each band.
    B,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WindowMode {
    #[default]
    Strict,
    /// Log a warning and proceed outside the window (critical orders are
    /// still rejected).
    Warn,
}

/// Coefficients attached to the cell w at level m. Variant a: labels are
/// the Λ_m cells below w; variant b: the new vertices of V_{Λ_m} in w.
#[derive(Clone, Debug, Serialize)]
pub struct AtomTerm {
    pub m: usize,
    pub word: Word,
    pub r_w: f64,
    pub labels: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomCoefficients {
    pub variant: Variant,
    pub k: usize,
    pub level: usize,
    pub constant: f64,
    /// Multiharmonic part.
    pub harmonic: VertexFunction,
    pub harmonic_norm: f64,
    pub terms: Vec<AtomTerm>,
}

/// Open window of σ for (variant, k).
pub fn atomic_window(fr: &Fractal, variant: Variant, k: usize) -> (f64, f64) {
    let h = fr.constants().d_s / 2.0;
    let c = 2.0 * k as f64;
    match variant {
        Variant::A => ((c - h).max(0.0), c + h),
        Variant::B => (c + h, c + 2.0 - h),
    }
}

fn check_window(fr: &Fractal, variant: Variant, k: usize, sigma: f64, mode: WindowMode) -> Result<()> {
    if fr.constants().is_critical(sigma) {
        return Err(Error::CriticalOrder(sigma));
    }
    let (lo, hi) = atomic_window(fr, variant, k);
    // σ = 0 belongs to the first window (H^0 = L²).
    let inside = (sigma > lo || (sigma == 0.0 && lo == 0.0)) && sigma < hi;
    if inside {
        return Ok(());
    }
    let what = format!("atomic variant {variant:?} with k = {k} ({lo:.5}, {hi:.5})");
    match mode {
        WindowMode::Strict => Err(Error::OutOfWindow { sigma, what }),
        WindowMode::Warn => {
            log::warn!("sigma = {sigma} outside the window of {what}");
            Ok(())
        }
    }
}

pub fn atomic_norm(fr: &Fractal, coeffs: &AtomCoefficients, sigma: f64, mode: WindowMode) -> Result<f64> {
    check_window(fr, coeffs.variant, coeffs.k, sigma, mode)?;
    let c = fr.constants();
    let e = c.d_h - (sigma - 2.0 * coeffs.k as f64) * c.d_w;
    let sum: f64 =
        coeffs.terms.iter().map(|t| t.r_w.powf(e) * t.values.iter().map(|v| v * v).sum::<f64>()).sum();
    let base = coeffs.harmonic_norm.powi(2) + if coeffs.variant == Variant::A { coeffs.constant.powi(2) } else { 0.0 };
    Ok((base + sum).sqrt())
}

/// Chooses (variant, k) from σ's window, k ∈ {0, 1}.
pub fn atomic_from_function(fr: &Fractal, f: &VertexFunction, sigma: f64) -> Result<AtomCoefficients> {
    if fr.constants().is_critical(sigma) {
        return Err(Error::CriticalOrder(sigma));
    }
    for k in 0..=1 {
        for variant in [Variant::A, Variant::B] {
            if check_window(fr, variant, k, sigma, WindowMode::Strict).is_ok() {
                return atomic_from_function_with(fr, f, variant, k, sigma, WindowMode::Strict);
            }
        }
    }
    Err(Error::OutOfWindow { sigma, what: "every atomic decomposition with k <= 1".into() })
}

/// −Δ f on the interior; boundary entries are the mean over interior
/// neighbours.
fn peel(fr: &Fractal, f: &VertexFunction) -> Result<Vec<f64>> {
    let lap = graph_laplacian(fr, f.level)?;
    let mut u: Vec<f64> = laplacian_apply(fr, f, f.level)?.values.iter().map(|v| -v).collect();
    for p in 0..lap.boundary {
        let inner: Vec<f64> = lap.rows[p].iter().filter(|(y, _)| *y >= lap.boundary).map(|&(y, _)| u[y]).collect();
        u[p] = if inner.is_empty() { 0.0 } else { inner.iter().sum::<f64>() / inner.len() as f64 };
    }
    Ok(u)
}

pub fn atomic_from_function_with(
    fr: &Fractal,
    f: &VertexFunction,
    variant: Variant,
    k: usize,
    sigma: f64,
    mode: WindowMode,
) -> Result<AtomCoefficients> {
    f.check(fr)?;
    check_window(fr, variant, k, sigma, mode)?;
    if k > 1 {
        return Err(Error::arg("atomic decompositions are available for k <= 1"));
    }
    let m_top = f.level;
    let b = fr.b();
    let (g, harmonic) = match (variant, k) {
        (_, 0) => (f.clone(), fr.harmonic_extend(&f.values[..b], 0, m_top)?),
        (Variant::A, _) => {
            let u = peel(fr, f)?;
            (VertexFunction { level: m_top, values: u }, fr.harmonic_extend(&f.values[..b], 0, m_top)?)
        }
        (Variant::B, _) => {
            let u = VertexFunction { level: m_top, values: peel(fr, f)? };
            // h = f − G(u − φ_0(u)) satisfies Δ²h = 0.
            let phi0 = fr.harmonic_extend(&u.values[..b], 0, m_top)?;
            let tent_part: Vec<f64> = u.values.iter().zip(&phi0.values).map(|(a, c)| a - c).collect();
            let gu = DirichletGreen::new(fr, m_top)?.apply(&tent_part);
            let h = f.values.iter().zip(&gu).map(|(a, c)| a - c).collect();
            (u, VertexFunction { level: m_top, values: h })
        }
    };
    let harmonic_norm = fr.l2_norm(&harmonic);
    let (constant, terms) = match variant {
        Variant::A => {
            let cells = CellFunction { level: m_top, averages: fr.averages(&g, m_top)? };
            let haar = haar_expand(fr, &cells)?;
            let mut terms = Vec::new();
            for (i, layer) in haar.layers.iter().enumerate() {
                let m = i + 1;
                let parents = fr.vertex_approx(m - 1);
                let children = fr.vertex_approx(m);
                let anc = fr.ancestor_map(m, m - 1);
                let mut groups: Vec<Vec<usize>> = vec![Vec::new(); parents.num_cells()];
                for (c, &p) in anc.iter().enumerate() {
                    if children.words[c] != parents.words[p] {
                        groups[p].push(c);
                    }
                }
                for (p, labels) in groups.into_iter().enumerate() {
                    if labels.is_empty() {
                        continue;
                    }
                    let values = labels.iter().map(|&c| layer.averages[c]).collect();
                    terms.push(AtomTerm { m, word: parents.words[p].clone(), r_w: parents.r_w[p], labels, values });
                }
            }
            (haar.base, terms)
        }
        Variant::B => {
            let tents = tent_expand(fr, &g)?;
            (0.0, group_tents(fr, &tents))
        }
    };
    Ok(AtomCoefficients { variant, k, level: m_top, constant, harmonic, harmonic_norm, terms })
}

fn group_tents(fr: &Fractal, tents: &TentLayers) -> Vec<AtomTerm> {
    let mut terms: Vec<AtomTerm> = Vec::new();
    for layer in &tents.layers {
        let start = terms.len();
        for c in &layer.coeffs {
            match terms[start..].iter_mut().find(|t| t.word == c.group) {
                Some(t) => {
                    t.labels.push(c.vertex);
                    t.values.push(c.value);
                }
                None => terms.push(AtomTerm {
                    m: layer.m,
                    word: c.group.clone(),
                    r_w: fr.r_of(&c.group),
                    labels: vec![c.vertex],
                    values: vec![c.value],
                }),
            }
        }
        terms[start..].sort_by(|a, b| a.word.cmp(&b.word));
    }
    terms
}

impl AtomCoefficients {
    /// Cell averages on Λ_M rebuilt from C and the Haar coefficients
    /// (variant a, k = 0).
    pub fn reconstruct_averages(&self, fr: &Fractal) -> Result<CellFunction> {
        if self.variant != Variant::A || self.k != 0 {
            return Err(Error::arg("average reconstruction needs variant a with k = 0"));
        }
        let mut cur = vec![self.constant];
        let mut terms = self.terms.iter().peekable();
        for m in 1..=self.level {
            let anc = fr.ancestor_map(m, m - 1);
            let mut next: Vec<f64> = anc.iter().map(|&p| cur[p]).collect();
            while let Some(t) = terms.next_if(|t| t.m == m) {
                for (&c, v) in t.labels.iter().zip(&t.values) {
                    next[c] += v;
                }
            }
            cur = next;
        }
        Ok(CellFunction { level: self.level, averages: cur })
    }

    /// Vertex values on V_{Λ_M} rebuilt from h and the tent coefficients
    /// (variant b).
    pub fn reconstruct_values(&self, fr: &Fractal) -> Result<VertexFunction> {
        if self.variant != Variant::B {
            return Err(Error::arg("value reconstruction needs variant b"));
        }
        let b = fr.b();
        let mut layers = TentLayers {
            level: self.level,
            boundary: if self.k == 0 { self.harmonic.values[..b].to_vec() } else { vec![0.0; b] },
            layers: (1..=self.level).map(|m| super::tent::TentLayer { m, coeffs: Vec::new() }).collect(),
        };
        for t in &self.terms {
            for (&x, &v) in t.labels.iter().zip(&t.values) {
                layers.layers[t.m - 1].coeffs.push(super::tent::TentCoeff { vertex: x, group: t.word.clone(), local: 0, value: v });
            }
        }
        let tents = tent_reconstruct(fr, &layers)?;
        if self.k == 0 {
            return Ok(tents);
        }
        let gu = DirichletGreen::new(fr, self.level)?.apply(&tents.values);
        let values = self.harmonic.values.iter().zip(&gu).map(|(a, c)| a + c).collect();
        Ok(VertexFunction { level: self.level, values })
    }
}
