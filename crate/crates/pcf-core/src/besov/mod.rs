//! Besov-type norms Γ, Γ̃, Λ, Λ̃ and B with truncation diagnostics, the
//! difference operators they are built from, sequence spaces, and boundary
//! restriction sequences.

mod difference;
mod pairs;
mod restriction;
mod sequence;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::approximation::{Fractal, Function, VertexFunction};
use crate::decompositions::haar_expand;
use crate::operators::{graph_laplacian, spectral_sobolev_norm, Boundary};
use crate::{Error, Result};

pub use difference::{difference_field, DiffKind, DifferenceField};
pub use pairs::{b_terms, BesovPairs};
pub use restriction::{boundary_restriction, riesz_representers, RestrictionKind, RieszRepresenters};
pub use sequence::{sequence_norm, SequenceFamily, SequenceKind, SequenceNorm};

/// Tail ratios below this mark a converging sum.
pub const CONVERGING_RATIO: f64 = 0.9;
/// Tail ratios at or above this mark a diverging sum.
pub const DIVERGING_RATIO: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "tgamma")]
    TildeGamma,
    #[serde(rename = "lambda")]
    Lambda,
    #[serde(rename = "tlambda")]
    TildeLambda,
    #[serde(rename = "b22")]
    B,
    #[serde(rename = "spectralN")]
    SpectralN,
    #[serde(rename = "spectralD")]
    SpectralD,
}

impl NormKind {
    pub const ALL: [NormKind; 7] = [
        NormKind::Gamma,
        NormKind::TildeGamma,
        NormKind::Lambda,
        NormKind::TildeLambda,
        NormKind::B,
        NormKind::SpectralN,
        NormKind::SpectralD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Gamma => "gamma",
            NormKind::TildeGamma => "tgamma",
            NormKind::Lambda => "lambda",
            NormKind::TildeLambda => "tlambda",
            NormKind::B => "b22",
            NormKind::SpectralN => "spectralN",
            NormKind::SpectralD => "spectralD",
        }
    }

    /// Range of σ where the norm characterizes H^σ: (lo, hi) with lo
    /// included when `closed_lo`.
    pub fn window(self, fr: &Fractal) -> (f64, f64, bool) {
        let h = fr.constants().d_s / 2.0;
        match self {
            NormKind::Gamma => (0.0, 1.0, true),
            NormKind::TildeGamma => (0.0, h, true),
            NormKind::Lambda => (h, 1.0, false),
            NormKind::TildeLambda => (h, 2.0, false),
            NormKind::B => (0.0, 1.0, false),
            NormKind::SpectralN | NormKind::SpectralD => (f64::NEG_INFINITY, f64::INFINITY, false),
        }
    }

    pub fn in_window(self, fr: &Fractal, sigma: f64) -> bool {
        let (lo, hi, closed) = self.window(fr);
        (sigma > lo || (closed && sigma == lo)) && sigma < hi
    }

    pub fn needs_vertex(self) -> bool {
        matches!(self, NormKind::Lambda | NormKind::TildeLambda | NormKind::SpectralN | NormKind::SpectralD)
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::arg(format!("unknown norm kind '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converging,
    Diverging,
    Flat,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converging => "converging",
            Verdict::Diverging => "diverging",
            Verdict::Flat => "flat",
        })
    }
}

/// Ratios t_{m+1}/t_m of the last `count` consecutive terms.
pub fn tail_ratios(terms: &[f64], count: usize) -> Vec<f64> {
    let ratios: Vec<f64> = terms
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::MAX
            } else {
                0.0
            }
        })
        .collect();
    ratios[ratios.len().saturating_sub(count)..].to_vec()
}

pub fn verdict(ratios: &[f64]) -> Verdict {
    if ratios.is_empty() {
        Verdict::Flat
    } else if ratios.iter().all(|&q| q < CONVERGING_RATIO) {
        Verdict::Converging
    } else if ratios.iter().all(|&q| q >= DIVERGING_RATIO) {
        Verdict::Diverging
    } else {
        Verdict::Flat
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTerm {
    pub m: usize,
    pub term: f64,
    pub cumulative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub sigma: f64,
    pub level: usize,
    pub base: f64,
    pub terms: Vec<LevelTerm>,
    pub total: f64,
    pub tail_ratios: Vec<f64>,
    pub verdict: Verdict,
    /// Total with the geometric tail t_M q/(1−q) added when the last ratio
    /// q is below one.
    pub extrapolated: f64,
}

impl NormReport {
    pub(crate) fn from_terms(kind: NormKind, sigma: f64, level: usize, base: f64, terms: Vec<(usize, f64)>) -> Self {
        let mut acc = base;
        let terms: Vec<LevelTerm> = terms
            .into_iter()
            .map(|(m, term)| {
                acc += term;
                LevelTerm { m, term, cumulative: acc }
            })
            .collect();
        let values: Vec<f64> = terms.iter().map(|t| t.term).collect();
        let tail_ratios = tail_ratios(&values, 3);
        let verdict = verdict(&tail_ratios);
        let tail = match (values.last(), tail_ratios.last()) {
            (Some(&t), Some(&q)) if q < 1.0 => t * q / (1.0 - q),
            _ => 0.0,
        };
        NormReport {
            kind,
            sigma,
            level,
            base,
            total: acc.max(0.0).sqrt(),
            extrapolated: (acc + tail).max(0.0).sqrt(),
            terms,
            tail_ratios,
            verdict,
        }
    }

    pub fn last_ratio(&self) -> Option<f64> {
        self.tail_ratios.last().copied()
    }
}

fn vertex_at(fr: &Fractal, f: &VertexFunction, m: usize) -> Result<VertexFunction> {
    if f.level >= m {
        fr.restrict(f, m)
    } else {
        fr.extend(f, m)
    }
}

/// Truncated norm of f at order σ through level M.
pub fn besov_norm(fr: &Fractal, f: &Function, sigma: f64, level: usize, kind: NormKind) -> Result<NormReport> {
    f.check(fr)?;
    if kind.needs_vertex() && f.as_vertex().is_none() {
        return Err(Error::arg(format!("{kind} needs vertex values")));
    }
    if matches!(kind, NormKind::Lambda | NormKind::TildeLambda) && sigma <= fr.constants().d_s / 2.0 {
        log::warn!("{kind} at sigma = {sigma} is below d_S/2; the norm only sees constants there");
    }
    let c = fr.constants();
    let lambda2 = c.lambda(sigma).powi(2);
    let r = c.r_min;
    let lv = |m: usize| lambda2.powi(m as i32);
    let lifted;
    let f = match f {
        Function::Vertex(v) if v.level < level => {
            lifted = Function::Vertex(fr.extend(v, level)?);
            &lifted
        }
        _ => f,
    };
    if f.level() < level {
        return Err(Error::arg(format!("level {level} exceeds the function's level {}", f.level())));
    }
    let top = level;
    let l2 = || -> Result<f64> { Ok(f.l2_norm(fr).powi(2)) };
    let report = match kind {
        NormKind::Gamma => {
            let terms = (1..=top)
                .map(|m| {
                    let field = difference_field(fr, f, m, DiffKind::Cell)?;
                    Ok((m, lv(m) * field.norm_sq()))
                })
                .collect::<Result<Vec<_>>>()?;
            NormReport::from_terms(kind, sigma, top, l2()?, terms)
        }
        NormKind::TildeGamma => {
            let cells = crate::approximation::CellFunction { level: top, averages: f.averages(fr, top)? };
            let haar = haar_expand(fr, &cells)?;
            let terms = haar
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let m = i + 1;
                    (m, r.powf(-(m as f64) * c.d_h) * lv(m) * fr.cell_l2_norm(l).powi(2))
                })
                .collect();
            NormReport::from_terms(kind, sigma, top, haar.base.powi(2), terms)
        }
        NormKind::Lambda => {
            let terms = (0..=level)
                .map(|m| Ok((m, lv(m) * difference_field(fr, f, m, DiffKind::Vertex)?.norm_sq())))
                .collect::<Result<Vec<_>>>()?;
            NormReport::from_terms(kind, sigma, level, l2()?, terms)
        }
        NormKind::TildeLambda => {
            let v = f.as_vertex().unwrap();
            let terms = (0..=level)
                .map(|m| {
                    let g = vertex_at(fr, v, m)?;
                    let lap = graph_laplacian(fr, m)?;
                    let hg = lap.apply(&g.values);
                    let s: f64 = hg[lap.boundary..].iter().map(|x| x * x).sum();
                    Ok((m, r.powi(2 * m as i32) * lv(m) * s))
                })
                .collect::<Result<Vec<_>>>()?;
            NormReport::from_terms(kind, sigma, level, l2()?, terms)
        }
        NormKind::B => {
            let avgs = f.averages(fr, top)?;
            let pairs = BesovPairs::get(fr, top)?;
            let terms = b_terms(fr, &pairs, &avgs)?.into_iter().enumerate().map(|(m, i2)| (m, lv(m) * i2)).collect();
            NormReport::from_terms(kind, sigma, top, l2()?, terms)
        }
        NormKind::SpectralN | NormKind::SpectralD => {
            let bc = if kind == NormKind::SpectralN { Boundary::Neumann } else { Boundary::Dirichlet };
            let g = vertex_at(fr, f.as_vertex().unwrap(), level)?;
            let n = spectral_sobolev_norm(fr, &g, sigma, bc)?;
            NormReport::from_terms(kind, sigma, level, n * n, Vec::new())
        }
    };
    Ok(report)
}
