use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::approximation::{Fractal, VertexFunction};
use crate::linalg::max_abs;

fn sg() -> Fractal {
    Fractal::preset("sg").unwrap()
}

fn random_fn(fr: &Fractal, m: usize, seed: u64) -> VertexFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = fr.vertex_approx(m).num_vertices();
    VertexFunction { level: m, values: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() }
}

#[test]
fn tent_weights_and_row_sums() {
    let fr = sg();
    let lap = graph_laplacian(&fr, 1).unwrap();
    for x in 3..6 {
        assert!((lap.d[x] - 2.0 / 9.0).abs() < 1e-14);
    }
    for m in 1..=4 {
        let lap = graph_laplacian(&fr, m).unwrap();
        assert!((lap.d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(lap.d.iter().all(|&d| d > 0.0));
        let ones = vec![1.0; lap.len()];
        assert!(max_abs(&lap.apply(&ones)) < 1e-9);
        let dense = lap.dense();
        assert!((&dense - dense.transpose()).amax() == 0.0);
    }
}

#[test]
fn energy_examples() {
    let fr = sg();
    for m in 0..=4 {
        let c = VertexFunction::constant(&fr, m, 3.0);
        assert!(graph_energy(&fr, &c, m).unwrap().abs() < 1e-12);
        let h = fr.harmonic_extend(&[1.0, 0.0, 0.0], 0, m).unwrap();
        assert!((graph_energy(&fr, &h, m).unwrap() - 2.0).abs() < 1e-10, "level {m}");
    }
}

#[test]
fn weak_form_identity() {
    let fr = sg();
    for m in 1..=4 {
        let lap = graph_laplacian(&fr, m).unwrap();
        let approx = fr.vertex_approx(m);
        for s in 0..20 {
            let f = random_fn(&fr, m, s);
            let g = random_fn(&fr, m, 100 + s);
            let e = approx.energy_pair(fr.h0(), &f.values, &g.values);
            let w = -crate::linalg::dot(&f.values, &lap.apply(&g.values));
            assert!((e - w).abs() <= 1e-10 * e.abs().max(1.0));
            assert!((graph_energy(&fr, &f, m).unwrap() + crate::linalg::dot(&f.values, &lap.apply(&f.values))).abs() < 1e-9);
        }
    }
}

#[test]
fn self_similar_energy_identity() {
    let fr = sg();
    let m = 4;
    let f = random_fn(&fr, m, 9);
    let fine = fr.vertex_approx(m);
    let coarse = fr.vertex_approx(m - 1);
    let mut total = 0.0;
    for i in 0..3 {
        // f∘F_i on V_{Λ_{m−1}}: the vertex F_w(p) maps to F_{iw}(p).
        let mut g = vec![0.0; coarse.num_vertices()];
        for (c, w) in coarse.words.iter().enumerate() {
            let iw = Word::from_letters(&[i]).concat(w);
            for p in 0..3 {
                g[coarse.cell_vertices[c][p]] = f.values[fine.id_of(&iw, p).unwrap()];
            }
        }
        let e = graph_energy(&fr, &VertexFunction { level: m - 1, values: g }, m - 1).unwrap();
        total += e / fr.spec().r[i];
    }
    let e = graph_energy(&fr, &f, m).unwrap();
    assert!((e - total).abs() < 1e-12 * e.max(1.0));
}

use crate::address::Word;

#[test]
fn energy_grows_under_refinement_only_off_harmonic() {
    let fr = sg();
    let f = random_fn(&fr, 2, 5);
    let e2 = graph_energy(&fr, &f, 2).unwrap();
    let ext = fr.extend(&f, 3).unwrap();
    assert!((graph_energy(&fr, &ext, 3).unwrap() - e2).abs() < 1e-10);
    let mut bumped = ext.clone();
    let b = fr.vertex_approx(2).num_vertices();
    bumped.values[b] += 0.1;
    assert!(graph_energy(&fr, &bumped, 3).unwrap() > e2);
}

#[test]
fn harmonic_extension_energy_invariance() {
    let fr = sg();
    let f = random_fn(&fr, 1, 1);
    let e = graph_energy(&fr, &f, 1).unwrap();
    for big in 2..=5 {
        let g = fr.extend(&f, big).unwrap();
        assert!((graph_energy(&fr, &g, big).unwrap() - e).abs() < 1e-10);
    }
    let h = fr.harmonic_extend(&[1.0, 0.0, 0.0], 0, 1).unwrap();
    assert!((h.values[3] - 0.4).abs() < 1e-14 || (h.values[3] - 0.2).abs() < 1e-14);
}

#[test]
fn laplacian_of_tent_is_local_and_level_independent() {
    let fr = sg();
    let mut tent = VertexFunction::zeros(&fr, 1);
    tent.values[3] = 1.0;
    let mut norms = Vec::new();
    for m in 1..=5 {
        let t = fr.extend(&tent, m).unwrap();
        let lap = graph_laplacian(&fr, m).unwrap();
        let h = lap.apply(&t.values);
        let support = h.iter().filter(|v| v.abs() > 1e-12).count();
        assert!(support <= 6, "level {m}: support {support}");
        // Nonzero only on V_1.
        assert!(h[fr.vertex_approx(1).num_vertices()..].iter().all(|v| v.abs() < 1e-10));
        norms.push(h.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    assert!(norms.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-10));
}

#[test]
fn neumann_and_dirichlet_spectra() {
    let fr = sg();
    let m = 3;
    let lap = graph_laplacian(&fr, m).unwrap();
    let dense = lap.dense();
    for bc in [Boundary::Neumann, Boundary::Dirichlet] {
        let sys = eigensystem(&fr, m, bc, None, true).unwrap();
        let v = sys.vectors.as_ref().unwrap();
        for i in 0..sys.values.len() {
            let u = v.column(i);
            let hu = &dense * u;
            for x in 0..lap.len() {
                if bc == Boundary::Dirichlet && x < lap.boundary {
                    continue;
                }
                assert!((hu[x] + sys.values[i] * lap.d[x] * u[x]).abs() < 1e-8);
            }
            for j in 0..sys.values.len() {
                let g: f64 = (0..lap.len()).map(|x| lap.d[x] * u[x] * v[(x, j)]).sum();
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
        assert!(sys.values.windows(2).all(|w| w[0] <= w[1]));
        let values_only = eigensystem(&fr, m, bc, None, false).unwrap();
        for (a, b) in values_only.values.iter().zip(&sys.values) {
            assert!((a - b).abs() < 1e-8 * b.max(1.0));
        }
    }
    let neu = eigensystem(&fr, m, Boundary::Neumann, Some(4), true).unwrap();
    assert_eq!(neu.values.len(), 4);
    assert_eq!(neu.values[0], 0.0);
    let u1 = neu.vector(0).unwrap();
    assert!(u1.iter().all(|x| (x - u1[0]).abs() < 1e-10));
    let dir = eigensystem(&fr, m, Boundary::Dirichlet, Some(1), true).unwrap();
    assert!(dir.values[0] > 0.0);
    let u = dir.vector(0).unwrap();
    assert!(u[3..].iter().all(|&x| x > 0.0) || u[3..].iter().all(|&x| x < 0.0));
    assert!(u[..3].iter().all(|&x| x == 0.0));
}

#[test]
fn interval_dirichlet_spectrum_matches_path_graph() {
    // Level m: path with 2^m unit-length edges of conductance 2^m and
    // lumped mass 2^{-m}, so λ_j = 4^{m+1} sin²(jπ/2^{m+1}).
    let fr = Fractal::preset("interval").unwrap();
    let m = 5;
    let sys = eigensystem(&fr, m, Boundary::Dirichlet, None, false).unwrap();
    let n = 1usize << m;
    for (j, l) in sys.values.iter().enumerate() {
        let x = ((j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).sin();
        let expected = 4.0 * (n * n) as f64 * x * x;
        assert!((l - expected).abs() < 1e-9 * expected, "{j}: {l} vs {expected}");
    }
}

#[test]
fn green_operators() {
    let fr = sg();
    let m = 4;
    let zero = VertexFunction::zeros(&fr, m);
    assert!(max_abs(&green_apply(&fr, &zero, Boundary::Dirichlet).unwrap().values) == 0.0);
    for s in 0..5 {
        let f = random_fn(&fr, m, 40 + s);
        let g = green_apply(&fr, &f, Boundary::Dirichlet).unwrap();
        assert!(g.values[..3].iter().all(|&v| v == 0.0));
        let lg = laplacian_apply(&fr, &g, m).unwrap();
        for x in 3..f.len() {
            assert!((lg.values[x] + f.values[x]).abs() < 1e-8);
        }
    }
    // Neumann Green against the spectral sum.
    let m = 3;
    let sys = eigensystem(&fr, m, Boundary::Neumann, None, true).unwrap();
    for i in [1, 2, 7, 20] {
        let u = VertexFunction { level: m, values: sys.vector(i).unwrap() };
        let g = green_apply(&fr, &u, Boundary::Neumann).unwrap();
        for x in 0..u.len() {
            assert!((g.values[x] - u.values[x] / sys.values[i]).abs() < 1e-8);
        }
    }
    let f = random_fn(&fr, m, 3);
    let (values, coeffs) = spectral_coefficients(&fr, &f, Boundary::Neumann).unwrap();
    let v = sys.vectors.as_ref().unwrap();
    let g = green_apply(&fr, &f, Boundary::Neumann).unwrap();
    for x in 0..f.len() {
        let s: f64 = (1..values.len()).map(|i| coeffs[i] / values[i] * v[(x, i)]).sum();
        assert!((g.values[x] - s).abs() < 1e-8);
    }
}

#[test]
fn spectral_norm_examples() {
    let fr = sg();
    let m = 3;
    let lap = graph_laplacian(&fr, m).unwrap();
    let f = random_fn(&fr, m, 11);
    let l2: f64 = f.values.iter().zip(&lap.d).map(|(v, d)| d * v * v).sum::<f64>().sqrt();
    let n0 = spectral_sobolev_norm(&fr, &f, 0.0, Boundary::Neumann).unwrap();
    assert!((n0 - l2).abs() < 1e-10);
    let n1 = spectral_sobolev_norm(&fr, &f, 1.0, Boundary::Neumann).unwrap();
    let e = graph_energy(&fr, &f, m).unwrap();
    assert!((n1 * n1 - l2 * l2 - e).abs() < 1e-8 * (l2 * l2 + e));
    let sys = eigensystem(&fr, m, Boundary::Dirichlet, None, true).unwrap();
    let u = VertexFunction { level: m, values: sys.vector(5).unwrap() };
    for sigma in [-1.0, 0.5, 1.5] {
        let got = spectral_sobolev_norm(&fr, &u, sigma, Boundary::Dirichlet).unwrap();
        assert!((got - (1.0 + sys.values[5]).powf(sigma / 2.0)).abs() < 1e-8 * got);
    }
    let nf = VertexFunction { level: m, values: f.values.iter().map(|v| v / l2).collect() };
    let mut prev = 0.0;
    for k in 0..10 {
        let s = spectral_sobolev_norm(&fr, &nf, -1.0 + 0.3 * k as f64, Boundary::Neumann).unwrap();
        assert!(s >= prev - 1e-12);
        prev = s;
    }
}

#[test]
fn multiharmonic_dimensions_and_residuals() {
    let fr = sg();
    let m = 4;
    let b1 = multiharmonic_basis(&fr, m, 1).unwrap();
    assert_eq!(b1.harmonic.len(), 3);
    assert_eq!(b1.harmonic_prime.len(), 3);
    let b2 = multiharmonic_basis(&fr, m, 2).unwrap();
    assert_eq!((b2.harmonic.len(), b2.harmonic_prime.len()), (6, 6));
    for b in [&b1, &b2] {
        let (r, rp) = b.residual(&fr).unwrap();
        assert!(r < 1e-8 && rp < 1e-8, "{r} {rp}");
        for f in &b.harmonic_prime {
            assert!(fr.integrate(f).abs() < 1e-12);
        }
    }
    // 𝓗'_0: Δf constant on the interior.
    for f in &b1.harmonic_prime {
        let lf = laplacian_apply(&fr, f, m).unwrap();
        let inner = &lf.values[3..];
        assert!(inner.iter().all(|v| (v - inner[0]).abs() < 1e-8));
    }
    let basis_rank = |fs: &[VertexFunction]| {
        let mat = nalgebra::DMatrix::from_fn(fs[0].len(), fs.len(), |i, j| fs[j].values[i]);
        crate::linalg::rank(&mat, 1e-9)
    };
    assert_eq!(basis_rank(&b2.harmonic), 6);
    assert!(multiharmonic_basis(&fr, m, 0).is_err());
}

#[test]
fn harmonic_split_of_random_functions() {
    let fr = sg();
    for s in 0..5 {
        let f = random_fn(&fr, 4, 70 + s);
        let split = harmonic_split(&fr, &f).unwrap();
        assert!(split.residual < 1e-8);
        // The harmonic part is determined by the boundary values.
        let h = fr.harmonic_extend(&f.values[..3], 0, 4).unwrap();
        for (a, b) in h.values.iter().zip(&split.harmonic_part.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn weyl_slope_on_small_levels() {
    let fr = sg();
    let w = weyl_slope(&fr, 5).unwrap();
    assert!(w.fitted_points > 50);
    assert!((w.target - 3f64.ln() / 5f64.ln()).abs() < 1e-12);
    assert!(w.relative_error < 0.15, "{w:?}");
    let iv = Fractal::preset("interval").unwrap();
    let wi = weyl_slope(&iv, 9).unwrap();
    assert!((wi.slope - 0.5).abs() < 0.05, "{wi:?}");
}
