use serde::Serialize;

use super::{tail_ratios, verdict, Verdict};
use crate::approximation::Fractal;
use crate::{Error, Result};

/// One sequence α^p = (α_1, α_2, …) per boundary vertex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceFamily {
    pub sequences: Vec<Vec<f64>>,
}

impl SequenceFamily {
    pub fn new(sequences: Vec<Vec<f64>>) -> Result<Self> {
        let len = sequences.first().map(Vec::len).unwrap_or(0);
        if sequences.iter().any(|s| s.len() != len) {
            return Err(Error::arg("sequence lengths differ across boundary vertices"));
        }
        if sequences.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::arg("sequence entries must be finite"));
        }
        Ok(SequenceFamily { sequences })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SequenceKind {
    /// |α_1| + ‖λ^m (α_{m+1} − α_m)‖.
    S,
    /// ‖λ^m α_m‖.
    TildeS,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceNorm {
    pub value: f64,
    /// Tail ratios of the squared ℓ² terms, worst over the family.
    pub tail_ratios: Vec<f64>,
    pub verdict: Verdict,
}

pub fn sequence_norm(fr: &Fractal, alpha: &SequenceFamily, sigma: f64, kind: SequenceKind) -> SequenceNorm {
    let lambda = fr.constants().lambda(sigma);
    let mut value = 0.0;
    let mut worst: Vec<f64> = Vec::new();
    for a in &alpha.sequences {
        let terms: Vec<f64> = match kind {
            SequenceKind::S => (1..a.len()).map(|m| (lambda.powi(m as i32) * (a[m] - a[m - 1])).powi(2)).collect(),
            SequenceKind::TildeS => (1..=a.len()).map(|m| (lambda.powi(m as i32) * a[m - 1]).powi(2)).collect(),
        };
        let head = if kind == SequenceKind::S { a.first().map_or(0.0, |x| x.abs()) } else { 0.0 };
        value += head + terms.iter().sum::<f64>().sqrt();
        let r = tail_ratios(&terms, 3);
        if worst.is_empty() || r.iter().sum::<f64>() > worst.iter().sum::<f64>() {
            worst = r;
        }
    }
    let verdict = verdict(&worst);
    SequenceNorm { value, tail_ratios: worst, verdict }
}
