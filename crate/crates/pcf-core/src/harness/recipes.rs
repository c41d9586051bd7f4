use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::address::Word;
use crate::approximation::{CellFunction, Fractal, Function, VertexFunction};
use crate::decompositions::{haar_reconstruct, smoothed_haar_layer, HaarLayers, Smoothing};
use crate::operators::{eigensystem, Boundary};
use crate::{Error, Result};

/// Relative eigenvalue gap below which eigenvalues count as one cluster.
const CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RecipeKind {
    /// Neumann eigenfunction `index` (0 is the constant). Inside a
    /// degenerate cluster a seeded random element of the eigenspace is used.
    Eigenfunction { index: usize },
    /// Harmonic extension of boundary data.
    Harmonic { boundary: Vec<f64> },
    /// Random Haar layers whose Γ̃ sum converges exactly for σ ≤ σ*.
    /// `layers` defaults to the full level for cell output and to level − 2
    /// for vertex output.
    RandomHaar {
        sigma_star: f64,
        #[serde(default)]
        layers: Option<usize>,
        #[serde(default)]
        cell: bool,
    },
    /// ψ_x for the vertex with id `vertex` in V_{Λ_tent}.
    SingleTent { tent_level: usize, vertex: usize },
    /// Random values on V_{Λ_m} extended harmonically.
    PiecewiseHarmonic { source_level: usize },
    /// χ of the cell F_w K; the word uses the 1-based textual form.
    Indicator { word: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionRecipe {
    #[serde(flatten)]
    pub kind: RecipeKind,
    pub level: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TestFunctionRecipe {
    pub fn new(kind: RecipeKind, level: usize, seed: u64) -> Self {
        TestFunctionRecipe { kind, level, seed }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            RecipeKind::Eigenfunction { index } => format!("eigenfunction[{index}]"),
            RecipeKind::Harmonic { .. } => "harmonic".into(),
            RecipeKind::RandomHaar { sigma_star, .. } => format!("random-haar[{sigma_star}]#{}", self.seed),
            RecipeKind::SingleTent { tent_level, vertex } => format!("single-tent[{tent_level},{vertex}]"),
            RecipeKind::PiecewiseHarmonic { source_level } => format!("piecewise-harmonic[{source_level}]#{}", self.seed),
            RecipeKind::Indicator { word } => format!("indicator[{word}]"),
        }
    }
}

/// Standard deviation of the level-m random Haar coefficients.
pub fn random_haar_std(fr: &Fractal, sigma_star: f64, m: usize) -> f64 {
    let c = fr.constants();
    c.r_min.powf(m as f64 * sigma_star * c.d_w / 2.0) / m as f64
}

fn random_haar_layer(fr: &Fractal, m: usize, std: f64, rng: &mut ChaCha8Rng) -> CellFunction {
    let approx = fr.vertex_approx(m);
    let mut layer = CellFunction {
        level: m,
        averages: (0..approx.num_cells()).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect(),
    };
    let parent = fr.coarsen(&layer, m - 1).expect("coarser level");
    let anc = fr.ancestor_map(m, m - 1);
    for (a, &p) in layer.averages.iter_mut().zip(&anc) {
        *a -= parent.averages[p];
    }
    layer
}

pub fn generate(fr: &Fractal, recipe: &TestFunctionRecipe) -> Result<Function> {
    let level = recipe.level;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let out: Function = match &recipe.kind {
        RecipeKind::Eigenfunction { index } => {
            let sys = eigensystem(fr, level, Boundary::Neumann, None, true)?;
            let values = &sys.values;
            if *index >= values.len() {
                return Err(Error::arg(format!("eigenfunction index {index} out of range ({})", values.len())));
            }
            let vecs = sys.vectors.as_ref().expect("vectors requested");
            let close = |j: usize| (values[j] - values[*index]).abs() <= CLUSTER_TOL * values[*index].abs().max(1.0);
            let cluster: Vec<usize> = (0..values.len()).filter(|&j| close(j)).collect();
            let mut v = vec![0.0; vecs.nrows()];
            if cluster.len() == 1 {
                v.copy_from_slice(vecs.column(*index).as_slice());
            } else {
                for &j in &cluster {
                    let a: f64 = rng.sample(StandardNormal);
                    for (x, y) in v.iter_mut().zip(vecs.column(j).iter()) {
                        *x += a * y;
                    }
                }
            }
            let mut f = VertexFunction { level, values: v };
            let n = fr.l2_norm(&f);
            f.values.iter_mut().for_each(|x| *x /= n);
            f.into()
        }
        RecipeKind::Harmonic { boundary } => {
            if boundary.len() != fr.b() {
                return Err(Error::arg(format!("harmonic recipe needs {} boundary values", fr.b())));
            }
            fr.harmonic_extend(boundary, 0, level)?.into()
        }
        RecipeKind::RandomHaar { sigma_star, layers, cell } => {
            let top = layers.unwrap_or(if *cell { level } else { level.saturating_sub(2).max(1) });
            if top > level || top == 0 {
                return Err(Error::arg(format!("random-haar needs 1 <= layers <= level, got {top}")));
            }
            let base: f64 = rng.sample(StandardNormal);
            let cells: Vec<CellFunction> =
                (1..=top).map(|m| random_haar_layer(fr, m, random_haar_std(fr, *sigma_star, m), &mut rng)).collect();
            if *cell {
                let mut all = cells;
                for m in top + 1..=level {
                    all.push(CellFunction { level: m, averages: vec![0.0; fr.vertex_approx(m).num_cells()] });
                }
                haar_reconstruct(fr, &HaarLayers { base, layers: all })?.into()
            } else {
                let mut f = VertexFunction::constant(fr, level, base);
                for c in &cells {
                    let layer = smoothed_haar_layer(fr, c, Smoothing::Continuum)?;
                    f.add_scaled(&layer.materialize(fr, level)?, 1.0);
                }
                f.into()
            }
        }
        RecipeKind::SingleTent { tent_level, vertex } => {
            if tent_level > &level {
                return Err(Error::arg("tent level exceeds the output level"));
            }
            let mut f = VertexFunction::zeros(fr, *tent_level);
            if *vertex >= f.len() {
                return Err(Error::arg(format!("vertex {vertex} out of range ({})", f.len())));
            }
            f.values[*vertex] = 1.0;
            fr.extend(&f, level)?.into()
        }
        RecipeKind::PiecewiseHarmonic { source_level } => {
            if source_level > &level {
                return Err(Error::arg("source level exceeds the output level"));
            }
            let n = fr.vertex_approx(*source_level).num_vertices();
            let f = VertexFunction { level: *source_level, values: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
            fr.extend(&f, level)?.into()
        }
        RecipeKind::Indicator { word } => {
            let w = Word::parse(word, fr.n())?;
            let approx = fr.vertex_approx(level);
            let averages: Vec<f64> = approx.words.iter().map(|u| if w.is_prefix_of(u) { 1.0 } else { 0.0 }).collect();
            if !averages.contains(&1.0) {
                return Err(Error::arg(format!("cell {word} is finer than level {level}")));
            }
            CellFunction { level, averages }.into()
        }
    };
    Ok(out)
}
