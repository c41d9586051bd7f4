use std::sync::Arc;

use crate::approximation::{resistance_matrix, Fractal};
use crate::{Error, Result};

/// Largest cell count for which all cell pairs are tabulated.
pub const PAIR_LIMIT: usize = 2000;

/// Unordered pairs of Λ_M cells sorted by the resistance between their
/// anchors, with the cut index for each scale r_min^m.
pub struct BesovPairs {
    pub level: usize,
    pairs: Vec<(u32, u32)>,
    /// `cuts[m]` pairs have R < r_min^m.
    cuts: Vec<usize>,
}

impl BesovPairs {
    pub fn get(fr: &Fractal, level: usize) -> Result<Arc<BesovPairs>> {
        fr.cached(format!("bpairs/{level}"), || {
            let approx = fr.try_vertex_approx(level)?;
            let nc = approx.num_cells();
            if nc > PAIR_LIMIT {
                return Err(Error::TooLarge(format!("B norm at level {level}: {nc} cells exceed {PAIR_LIMIT}")));
            }
            let anchors = approx.anchors();
            let mut ids = anchors.clone();
            ids.sort_unstable();
            ids.dedup();
            let pos = |a: usize| ids.binary_search(&a).unwrap();
            let r = resistance_matrix(&approx, &ids)?;
            let mut pairs: Vec<(f64, u32, u32)> = Vec::with_capacity(nc * (nc - 1) / 2);
            for a in 0..nc {
                for b in a + 1..nc {
                    pairs.push((r[(pos(anchors[a]), pos(anchors[b]))], a as u32, b as u32));
                }
            }
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            let cuts = (0..=level)
                .map(|m| {
                    let t = fr.scale(m);
                    pairs.partition_point(|p| p.0 < t)
                })
                .collect();
            Ok(BesovPairs { level, pairs: pairs.into_iter().map(|(_, a, b)| (a, b)).collect(), cuts })
        })
    }
}

/// I_m(f)² = r^{−2m d_H} Σ_{ordered pairs, R < r^m} μ μ' (A − A')² for
/// m = 0..=M, from averages on Λ_M.
pub fn b_terms(fr: &Fractal, pairs: &BesovPairs, averages: &[f64]) -> Result<Vec<f64>> {
    let approx = fr.try_vertex_approx(pairs.level)?;
    if averages.len() != approx.num_cells() {
        return Err(Error::arg("averages do not match the pair table level"));
    }
    let mu = &approx.mu_w;
    let mut prefix = Vec::with_capacity(pairs.pairs.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for &(a, b) in &pairs.pairs {
        let (a, b) = (a as usize, b as usize);
        let d = averages[a] - averages[b];
        acc += mu[a] * mu[b] * d * d;
        prefix.push(acc);
    }
    let c = fr.constants();
    Ok(pairs
        .cuts
        .iter()
        .enumerate()
        .map(|(m, &cut)| 2.0 * prefix[cut] * c.r_min.powf(-2.0 * m as f64 * c.d_h))
        .collect())
}
