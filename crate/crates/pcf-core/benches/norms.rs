use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pcf_core::approximation::Fractal;
use pcf_core::besov::NormKind;
use pcf_core::exec::Exec;
use pcf_core::harness::{divergence_probe, equivalence_experiment, RecipeKind, TestFunctionRecipe, Thresholds};
use pcf_core::spec_core::FractalSpec;

fn family(level: usize, n: u64) -> Vec<TestFunctionRecipe> {
    (0..n)
        .map(|seed| {
            let kind = RecipeKind::RandomHaar { sigma_star: 1.0, layers: None, cell: false };
            TestFunctionRecipe::new(kind, level, seed)
        })
        .collect()
}

fn bench_equivalence(c: &mut Criterion) {
    let fr = Fractal::new(FractalSpec::preset("sg").unwrap()).unwrap();
    let level = 5;
    let fam = family(level, 24);
    let sigmas = [0.3, 0.5];
    // warm the approximation caches so both modes time the same work
    equivalence_experiment(&fr, (NormKind::SpectralN, NormKind::Gamma), &sigmas, &fam[..1], level, Thresholds::default(), Exec::Sequential)
        .unwrap();

    let mut group = c.benchmark_group("equivalence_sg_m5");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                equivalence_experiment(&fr, (NormKind::SpectralN, NormKind::Gamma), &sigmas, &fam, level, Thresholds::default(), exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_probe(c: &mut Criterion) {
    let fr = Fractal::new(FractalSpec::preset("sg").unwrap()).unwrap();
    let level = 6;
    let recipe = TestFunctionRecipe::new(RecipeKind::SingleTent { tent_level: 1, vertex: 3 }, level, 0);
    let sigmas: Vec<f64> = (0..15).map(|i| 0.5 + 0.05 * i as f64).collect();
    divergence_probe(&fr, NormKind::Gamma, &recipe, &sigmas, level, Exec::Sequential).unwrap();

    let mut group = c.benchmark_group("probe_gamma_sg_m6");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| divergence_probe(&fr, NormKind::Gamma, &recipe, &sigmas, level, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_equivalence, bench_probe);
criterion_main!(benches);
