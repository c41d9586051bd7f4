//! Randomized properties across modules.

use std::sync::LazyLock;

use proptest::prelude::*;

use crate::approximation::{CellFunction, Fractal, VertexFunction};
use crate::besov::{besov_norm, difference_field, sequence_norm, tail_ratios, verdict, DiffKind, NormKind};
use crate::besov::{SequenceFamily, SequenceKind, Verdict};
use crate::decompositions::{haar_expand, haar_reconstruct, tent_expand, tent_reconstruct};
use crate::exec::{self, Exec};
use crate::harness::{generate, RecipeKind, TestFunctionRecipe};
use crate::spec_core::{boundary_energy, extension_matrices, hausdorff_dimension, parse_spec, FractalSpec};

static SG: LazyLock<Fractal> = LazyLock::new(|| Fractal::preset("sg").unwrap());
static UNEQUAL: LazyLock<Fractal> = LazyLock::new(|| {
    let mut s = FractalSpec::interval();
    s.r = vec![0.3, 0.7];
    Fractal::new(s).unwrap()
});

fn cell_fn(fr: &Fractal, level: usize, seed: &[f64]) -> CellFunction {
    let n = fr.vertex_approx(level).num_cells();
    CellFunction { level, averages: (0..n).map(|i| seed[i % seed.len()] + (i as f64).sin()).collect() }
}

fn vertex_fn(fr: &Fractal, level: usize, seed: &[f64]) -> VertexFunction {
    let n = fr.vertex_approx(level).num_vertices();
    VertexFunction { level, values: (0..n).map(|i| seed[i % seed.len()] * (1.0 + (i as f64 * 0.7).cos())).collect() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn similarity_dimension_solves_moran(r in prop::collection::vec(0.05f64..0.95, 2..6)) {
        let mut spec = FractalSpec::interval();
        spec.r = r.clone();
        let d = hausdorff_dimension(&spec);
        let s: f64 = r.iter().map(|x| x.powf(d)).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extensions_preserve_constants(c in -10.0f64..10.0, a in 0.1f64..0.9) {
        let mut interval = FractalSpec::interval();
        interval.r = vec![a, 1.0 - a];
        for spec in [FractalSpec::sierpinski_gasket(), interval] {
            let ext = extension_matrices(&spec).unwrap();
            for i in 0..spec.n {
                for v in ext.apply(i, &vec![c; spec.boundary]) {
                    prop_assert!((v - c).abs() < 1e-13 * (1.0 + c.abs()));
                }
            }
        }
    }

    #[test]
    fn level_one_energy_renormalizes(f in prop::collection::vec(-5.0f64..5.0, 3)) {
        for (fr, b) in [(&*SG, 3), (&*UNEQUAL, 2)] {
            let f0 = &f[..b];
            let e0 = boundary_energy(fr.h0(), f0);
            let h = fr.harmonic_extend(f0, 0, 1).unwrap();
            let approx = fr.vertex_approx(1);
            let e1 = approx.energy_pair(fr.h0(), &h.values, &h.values);
            prop_assert!(close(e0, e1, 1e-10), "{e0} vs {e1}");
        }
    }

    #[test]
    fn weak_form_matches_laplacian(a in prop::collection::vec(-2.0f64..2.0, 1..8), b in prop::collection::vec(-2.0f64..2.0, 1..8)) {
        let approx = SG.vertex_approx(2);
        let f = vertex_fn(&SG, 2, &a);
        let g = vertex_fn(&SG, 2, &b);
        let e = approx.energy_pair(SG.h0(), &f.values, &g.values);
        let h = approx.dense_h();
        let hg = &h * nalgebra::DVector::from_column_slice(&g.values);
        let pairing: f64 = f.values.iter().zip(hg.iter()).map(|(x, y)| x * y).sum();
        prop_assert!(close(e, -pairing, 1e-10));
        let ones = &h * nalgebra::DVector::from_element(approx.num_vertices(), 1.0);
        prop_assert!(ones.amax() < 1e-10);
    }

    #[test]
    fn haar_round_trip_and_parseval(seed in prop::collection::vec(-3.0f64..3.0, 1..10), level in 1usize..4) {
        for fr in [&*SG, &*UNEQUAL] {
            let f = cell_fn(fr, level, &seed);
            let layers = haar_expand(fr, &f).unwrap();
            let back = haar_reconstruct(fr, &layers).unwrap();
            for (x, y) in f.averages.iter().zip(&back.averages) {
                prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
            }
            let mut energy = layers.base * layers.base;
            for l in &layers.layers {
                energy += fr.cell_l2_norm(l).powi(2);
            }
            prop_assert!(close(energy, fr.cell_l2_norm(&f).powi(2), 1e-10));
        }
    }

    #[test]
    fn tent_round_trip(seed in prop::collection::vec(-3.0f64..3.0, 1..10), level in 0usize..4) {
        for fr in [&*SG, &*UNEQUAL] {
            let f = vertex_fn(fr, level, &seed);
            let back = tent_reconstruct(fr, &tent_expand(fr, &f).unwrap()).unwrap();
            for (x, y) in f.values.iter().zip(&back.values) {
                prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn refined_differences_are_a_subset(seed in prop::collection::vec(-3.0f64..3.0, 1..10), m in 1usize..4) {
        let f = crate::approximation::Function::Cell(cell_fn(&SG, 3, &seed));
        let full = difference_field(&SG, &f, m, DiffKind::Cell).unwrap();
        let refined = difference_field(&SG, &f, m, DiffKind::RefinedCell).unwrap();
        prop_assert!(refined.norm_sq() <= full.norm_sq() + 1e-12);
    }

    #[test]
    fn constants_have_no_level_terms(c in -5.0f64..5.0, sigma in 0.05f64..0.6) {
        let f = crate::approximation::Function::Vertex(VertexFunction::constant(&SG, 3, c));
        for kind in [NormKind::Gamma, NormKind::TildeGamma, NormKind::B] {
            let rep = besov_norm(&SG, &f, sigma, 3, kind).unwrap();
            prop_assert!(rep.terms.iter().all(|t| t.term.abs() < 1e-18 * (1.0 + c * c)));
        }
    }

    #[test]
    fn norm_total_is_root_of_sum(seed in prop::collection::vec(-3.0f64..3.0, 1..10), sigma in 0.1f64..0.6) {
        let f = crate::approximation::Function::Vertex(vertex_fn(&SG, 3, &seed));
        for kind in [NormKind::Gamma, NormKind::TildeGamma, NormKind::B, NormKind::SpectralN] {
            let rep = besov_norm(&SG, &f, sigma, 3, kind).unwrap();
            let sum = rep.base + rep.terms.iter().map(|t| t.term).sum::<f64>();
            prop_assert!(close(rep.total * rep.total, sum, 1e-12));
            prop_assert!(rep.tail_ratios.iter().all(|q| q.is_finite()));
        }
    }

    #[test]
    fn geometric_tails_get_expected_verdicts(q in 0.05f64..1.5, t0 in 0.1f64..10.0) {
        let terms: Vec<f64> = (0..8).map(|m| t0 * q.powi(m)).collect();
        let ratios = tail_ratios(&terms, 3);
        prop_assert_eq!(ratios.len(), 3);
        for r in &ratios {
            prop_assert!((r - q).abs() < 1e-12 * q.max(1.0));
        }
        let expected = if q < 0.9 - 1e-9 {
            Verdict::Converging
        } else if q >= 0.98 + 1e-9 {
            Verdict::Diverging
        } else if q > 0.9 + 1e-9 && q < 0.98 - 1e-9 {
            Verdict::Flat
        } else {
            return Ok(());
        };
        prop_assert_eq!(verdict(&ratios), expected);
    }

    #[test]
    fn zero_sequences_have_zero_norm(len in 1usize..8, count in 1usize..4, sigma in -1.0f64..2.0) {
        let fam = SequenceFamily::new(vec![vec![0.0; len]; count]).unwrap();
        for kind in [SequenceKind::S, SequenceKind::TildeS] {
            prop_assert_eq!(sequence_norm(&SG, &fam, sigma, kind).value, 0.0);
        }
    }

    #[test]
    fn exec_modes_agree(xs in prop::collection::vec(-1e3f64..1e3, 0..200)) {
        let f = |x: &f64| x.sin() * x;
        prop_assert_eq!(exec::map(Exec::Sequential, &xs, f), exec::map(Exec::Parallel, &xs, f));
    }

    #[test]
    fn spec_json_round_trips(a in 0.05f64..0.95) {
        let mut spec = FractalSpec::interval();
        spec.r = vec![a, 1.0 - a];
        let text = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(parse_spec(&text).unwrap(), spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn recipes_are_deterministic(seed in any::<u64>(), sigma_star in 0.2f64..1.5) {
        let recipe = TestFunctionRecipe::new(RecipeKind::RandomHaar { sigma_star, layers: None, cell: false }, 4, seed);
        prop_assert_eq!(generate(&SG, &recipe).unwrap(), generate(&SG, &recipe).unwrap());
        let cell = TestFunctionRecipe::new(RecipeKind::RandomHaar { sigma_star, layers: None, cell: true }, 4, seed);
        prop_assert_eq!(generate(&SG, &cell).unwrap(), generate(&SG, &cell).unwrap());
    }
}
