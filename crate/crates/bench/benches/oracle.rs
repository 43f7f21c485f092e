use criterion::{criterion_group, criterion_main, Criterion};
use fehlab_bench::perturbed_torus;
use fehlab_core::oracle::{run_formula_suite, Scenario, Suite};
use fehlab_core::FScalarFunction;

fn suites(c: &mut Criterion) {
    let (chart, metric) = perturbed_torus(2, 32);
    let mut sc = Scenario::new(chart, metric, FScalarFunction::power(2));
    sc.directions = 1;
    let mut group = c.benchmark_group("suite");
    group.sample_size(10);
    for suite in [Suite::FirstVariation, Suite::RicciVariation, Suite::EinsteinDivergence] {
        group.bench_function(suite.name(), |b| b.iter(|| run_formula_suite(&sc, suite).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, suites);
criterion_main!(benches);
